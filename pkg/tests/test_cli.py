"""CLI tests: every subcommand, exit codes, and output formats."""

import json

import numpy as np

from jbf import (FilterParams, PipelineState, Window, load_params,
                 load_volume, make_phantom, save_params, save_volume)
from jbf.cli import main


def write_phantom_pair(tmp_path, dims=(12, 12, 2), seed=0, noise=25.0):
    clean, noisy = make_phantom(dims, seed=seed, noise_sigma=noise)
    save_volume(clean, tmp_path / "clean")
    save_volume(noisy, tmp_path / "noisy")
    return clean, noisy


def write_state(tmp_path, **kwargs):
    state = PipelineState(
        layers=kwargs.pop("layers", (FilterParams(1.0, 1.0, 1.0, 60.0),)),
        window=kwargs.pop("window", Window((1, 1, 0))), **kwargs)
    path = tmp_path / "params.json"
    save_params(state, path)
    return state, path


def test_phantom_cmd(tmp_path, capsys):
    out = tmp_path / "ph"
    assert main(["phantom", str(out), "--dims", "10,8,2", "--seed", "3",
                 "--noise", "12"]) == 0
    printed = capsys.readouterr().out
    assert "ph_clean.raw" in printed and "ph_noisy.raw" in printed
    clean = load_volume(f"{out}_clean")
    noisy = load_volume(f"{out}_noisy")
    assert clean.dims == (10, 8, 2)
    assert not clean.equals(noisy)


def test_phantom_cmd_deterministic(tmp_path):
    assert main(["phantom", str(tmp_path / "a"), "--dims", "8,8,2", "--seed", "5"]) == 0
    assert main(["phantom", str(tmp_path / "b"), "--dims", "8,8,2", "--seed", "5"]) == 0
    assert (tmp_path / "a_noisy.raw").read_bytes() == (tmp_path / "b_noisy.raw").read_bytes()


def test_phantom_bad_dims_exit2(tmp_path, capsys):
    assert main(["phantom", str(tmp_path / "p"), "--dims", "8,8"]) == 2
    assert "usage error" in capsys.readouterr().err


def test_metrics_cmd(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    assert main(["metrics", str(tmp_path / "noisy"), str(tmp_path / "clean")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rmse"] > 0
    assert report["n_voxels"] == 288
    assert 0 < report["ssim"] < 1


def test_metrics_cmd_identical_infinite_psnr(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    assert main(["metrics", str(tmp_path / "clean"), str(tmp_path / "clean")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["psnr"] == "infinite"
    assert report["rmse"] == 0.0
    assert report["ssim"] == 1.0


def test_metrics_cmd_roi(tmp_path, capsys):
    write_phantom_pair(tmp_path, dims=(16, 16, 3))
    assert main(["metrics", str(tmp_path / "noisy"), str(tmp_path / "clean"),
                 "--roi", "2,2,1,12,12,1"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["n_voxels"] == 144


def test_metrics_cmd_bad_roi_exit2(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    assert main(["metrics", str(tmp_path / "noisy"), str(tmp_path / "clean"),
                 "--roi", "1,1,1"]) == 2


def test_metrics_cmd_missing_file_exit1(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    assert main(["metrics", str(tmp_path / "nope"), str(tmp_path / "clean")]) == 1
    assert "error" in capsys.readouterr().err


def test_denoise_self_guided(tmp_path, capsys):
    clean, noisy = write_phantom_pair(tmp_path)
    _, params = write_state(tmp_path)
    out = tmp_path / "denoised"
    assert main(["denoise", str(tmp_path / "noisy"), str(out),
                 "--params", str(params), "--target", str(tmp_path / "clean")]) == 0
    printed = capsys.readouterr().out
    assert "denoised.raw" in printed
    report = json.loads(printed.split("\n", 1)[1])
    denoised = load_volume(out)
    assert denoised.dims == noisy.dims
    # filtering moved the volume toward the target
    noisy_rmse = float(np.sqrt(np.mean((noisy.data - clean.data) ** 2)))
    assert report["rmse"] < noisy_rmse


def test_denoise_file_guide(tmp_path):
    write_phantom_pair(tmp_path)
    _, params = write_state(tmp_path, guide_mode="file")
    assert main(["denoise", str(tmp_path / "noisy"), str(tmp_path / "out"),
                 "--params", str(params), "--guide", str(tmp_path / "clean")]) == 0
    assert (tmp_path / "out.raw").exists()


def test_denoise_missing_guide_exit2(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    _, params = write_state(tmp_path, guide_mode="file")
    assert main(["denoise", str(tmp_path / "noisy"), str(tmp_path / "out"),
                 "--params", str(params)]) == 2
    assert "usage error" in capsys.readouterr().err


def test_denoise_stray_guide_exit2(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    _, params = write_state(tmp_path)
    assert main(["denoise", str(tmp_path / "noisy"), str(tmp_path / "out"),
                 "--params", str(params), "--guide", str(tmp_path / "clean")]) == 2


def test_denoise_gauss_guide(tmp_path):
    write_phantom_pair(tmp_path)
    _, params = write_state(tmp_path, guide_mode="gauss", gauss_sigma=1.0)
    assert main(["denoise", str(tmp_path / "noisy"), str(tmp_path / "out"),
                 "--params", str(params)]) == 0


def test_denoise_missing_input_exit1(tmp_path, capsys):
    _, params = write_state(tmp_path)
    assert main(["denoise", str(tmp_path / "ghost"), str(tmp_path / "out"),
                 "--params", str(params)]) == 1
    assert "missing" in capsys.readouterr().err


def test_denoise_corrupt_sidecar_exit1(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    _, params = write_state(tmp_path)
    (tmp_path / "noisy.json").write_text("{broken")
    assert main(["denoise", str(tmp_path / "noisy"), str(tmp_path / "out"),
                 "--params", str(params)]) == 1
    assert "corrupt" in capsys.readouterr().err


def test_train_cmd(tmp_path, capsys):
    noisy_dir = tmp_path / "noisy"
    target_dir = tmp_path / "target"
    noisy_dir.mkdir()
    target_dir.mkdir()
    clean, noisy = make_phantom((12, 12, 2), seed=4, noise_sigma=25.0)
    save_volume(noisy, noisy_dir / "case0")
    save_volume(clean, target_dir / "case0")
    out_params = tmp_path / "trained.json"
    out_loss = tmp_path / "loss.csv"
    assert main(["train", str(noisy_dir), str(target_dir),
                 "--out-params", str(out_params), "--out-loss", str(out_loss),
                 "--epochs", "3", "--layers", "1", "--radii", "1,1,0",
                 "--seed", "0"]) == 0
    printed = capsys.readouterr().out
    assert "epoch 3/3" in printed
    state = load_params(out_params)
    assert state.n_layers == 1
    assert state.window.radii == (1, 1, 0)
    # sigma_r was initialized from the target range, then trained
    assert state.layers[0].sigma_r > 1.0
    lines = out_loss.read_text().strip().split("\n")
    assert lines[0] == "epoch,mean_train_mse"
    assert len(lines) == 4


def test_train_cmd_unpaired_exit1(tmp_path, capsys):
    noisy_dir = tmp_path / "noisy"
    target_dir = tmp_path / "target"
    noisy_dir.mkdir()
    target_dir.mkdir()
    clean, noisy = make_phantom((8, 8, 2), seed=1, noise_sigma=10.0)
    save_volume(noisy, noisy_dir / "a")
    save_volume(clean, target_dir / "b")
    assert main(["train", str(noisy_dir), str(target_dir),
                 "--out-params", str(tmp_path / "p.json")]) == 1
    assert "unpaired" in capsys.readouterr().err


def test_train_cmd_gauss_without_sigma_exit2(tmp_path, capsys):
    assert main(["train", str(tmp_path), str(tmp_path),
                 "--out-params", str(tmp_path / "p.json"),
                 "--guide-mode", "gauss"]) == 2


def test_train_cmd_file_mode_needs_guide_dir(tmp_path):
    assert main(["train", str(tmp_path), str(tmp_path),
                 "--out-params", str(tmp_path / "p.json"),
                 "--guide-mode", "file"]) == 2


def test_gradcheck_cmd(tmp_path, capsys):
    assert main(["gradcheck", "--dims", "4,4,2", "--radii", "1,1,1",
                 "--sigmas", "1.0,1.0,0.8,40.0", "--seed", "2"]) == 0
    printed = capsys.readouterr().out
    assert "gradcheck: PASS" in printed
    assert "d_guide" in printed


def test_gradcheck_cmd_bad_sigmas_exit2(capsys):
    assert main(["gradcheck", "--sigmas", "1,1,1,-5"]) == 2


def test_no_command_exit2(capsys):
    assert main([]) == 2


def test_unknown_command_exit2(capsys):
    assert main(["frobnicate"]) == 2


def test_help_exit0(capsys):
    assert main(["--help"]) == 0
    assert "denoise" in capsys.readouterr().out


def test_bad_threads_exit2(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    assert main(["metrics", str(tmp_path / "clean"), str(tmp_path / "clean"),
                 "--threads", "zero"]) == 2
    assert main(["metrics", str(tmp_path / "clean"), str(tmp_path / "clean"),
                 "--threads", "0"]) == 2


def test_threads_max_ok(tmp_path, capsys):
    write_phantom_pair(tmp_path)
    assert main(["metrics", str(tmp_path / "clean"), str(tmp_path / "clean"),
                 "--threads", "max"]) == 0
