"""Command-line interface.

Subcommands: ``denoise``, ``train``, ``gradcheck``, ``metrics``,
``phantom``.  Exit codes: 0 success, 1 runtime/IO/validation failure,
2 usage error (bad flags or inconsistent flag combinations).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import parallel
from .forward import FilterParams, Window
from .gradcheck import gradcheck
from .metrics import compute_metrics
from .optim import TrainConfig, train, write_loss_csv
from .pipeline import (PipelineState, default_window, load_params,
                       pipeline_forward, resolve_guide, save_params)
from .volume import Roi, crop, load_volume, make_phantom, save_volume


class UsageError(Exception):
    """Inconsistent or incomplete flags; maps to exit code 2."""


def _ints(text: str, n: int, what: str) -> tuple[int, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise UsageError(f"{what} needs {n} comma-separated integers, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError:
        raise UsageError(f"{what} needs {n} comma-separated integers, got {text!r}")


def _floats(text: str, n: int, what: str) -> tuple[float, ...]:
    parts = text.split(",")
    if len(parts) != n:
        raise UsageError(f"{what} needs {n} comma-separated numbers, got {text!r}")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise UsageError(f"{what} needs {n} comma-separated numbers, got {text!r}")


def _configure_threads(args) -> None:
    choice = getattr(args, "threads", None)
    if choice is None:
        parallel.threads_from_env()
        return
    if choice == "max":
        parallel.set_threads(parallel.max_threads())
        return
    try:
        n = int(choice)
    except ValueError:
        raise UsageError(f"--threads must be an integer or 'max', got {choice!r}")
    if n < 1:
        raise UsageError(f"--threads must be >= 1, got {n}")
    parallel.set_threads(n)


def _check_guide_flags(mode: str, guide_path, gauss_sigma) -> None:
    if mode == "file" and guide_path is None:
        raise UsageError("guide_mode 'file' requires a guide volume")
    if mode != "file" and guide_path is not None:
        raise UsageError(f"guide volume given but guide_mode is {mode!r}")
    if mode == "gauss" and gauss_sigma is None:
        raise UsageError("guide_mode 'gauss' requires --gauss-sigma")
    if mode != "gauss" and gauss_sigma is not None:
        raise UsageError(f"--gauss-sigma only applies to guide_mode 'gauss', not {mode!r}")


def cmd_denoise(args) -> int:
    state = load_params(args.params)
    x = load_volume(args.input)
    if state.guide_mode == "file" and args.guide is None:
        raise UsageError("params use guide_mode 'file': pass --guide")
    if state.guide_mode != "file" and args.guide is not None:
        raise UsageError(f"--guide given but params use guide_mode {state.guide_mode!r}")
    guide_vol = load_volume(args.guide) if args.guide is not None else None
    guide = resolve_guide(x, state, guide_vol)
    tape = pipeline_forward(x, guide, state)
    raw_path, _ = save_volume(tape.prediction, args.output)
    print(f"wrote {raw_path}")
    if args.target is not None:
        target = load_volume(args.target)
        report = compute_metrics(tape.prediction, target, data_range=args.data_range)
        print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    return 0


def _scan_pairs(noisy_dir: Path, target_dir: Path) -> list[str]:
    for d in (noisy_dir, target_dir):
        if not d.is_dir():
            raise ValueError(f"not a directory: {d}")
    noisy = sorted(p.stem for p in noisy_dir.glob("*.raw"))
    target = sorted(p.stem for p in target_dir.glob("*.raw"))
    if not noisy:
        raise ValueError(f"no volumes (*.raw) found in {noisy_dir}")
    if noisy != target:
        only_n = sorted(set(noisy) - set(target))
        only_t = sorted(set(target) - set(noisy))
        raise ValueError(
            f"unpaired volumes: only in {noisy_dir}: {only_n}; only in {target_dir}: {only_t}")
    return noisy


def cmd_train(args) -> int:
    _check_guide_flags(args.guide_mode, args.guide_dir, args.gauss_sigma)
    noisy_dir = Path(args.noisy_dir)
    target_dir = Path(args.target_dir)
    names = _scan_pairs(noisy_dir, target_dir)
    pairs = [(load_volume(noisy_dir / n), load_volume(target_dir / n)) for n in names]
    guides = None
    if args.guide_mode == "file":
        guide_dir = Path(args.guide_dir)
        if not guide_dir.is_dir():
            raise ValueError(f"not a directory: {guide_dir}")
        guides = [load_volume(guide_dir / n) for n in names]

    sigma_r0 = args.sigma_r_init
    if sigma_r0 is None:
        ref = pairs[0][1].data
        span = float(ref.max() - ref.min())
        if span <= 0.0:
            raise ValueError("constant target volume: pass --sigma-r-init explicitly")
        sigma_r0 = 0.1 * span
    s0 = args.sigma_spatial_init
    layers = [FilterParams(s0, s0, s0, sigma_r0) for _ in range(args.layers)]
    window = (Window(_ints(args.radii, 3, "--radii")) if args.radii is not None
              else default_window(layers))
    state = PipelineState(layers=tuple(layers), window=window,
                          guide_mode=args.guide_mode, gauss_sigma=args.gauss_sigma)
    config = TrainConfig(epochs=args.epochs, lr_range=args.lr_range,
                         lr_spatial=args.lr_spatial, seed=args.seed,
                         sigma_min=args.sigma_min)

    def progress(epoch, loss):
        print(f"epoch {epoch + 1}/{config.epochs}  mean_train_mse {loss:.6f}", flush=True)

    trained, history = train(pairs, state, config, guides=guides, on_epoch=progress)
    out = save_params(trained, args.out_params)
    print(f"wrote {out}")
    if args.out_loss is not None:
        print(f"wrote {write_loss_csv(history, args.out_loss)}")
    return 0


def cmd_gradcheck(args) -> int:
    dims = _ints(args.dims, 3, "--dims")
    window = Window(_ints(args.radii, 3, "--radii"))
    sig = _floats(args.sigmas, 4, "--sigmas")
    try:
        layer = FilterParams(*sig)
    except ValueError as exc:
        raise UsageError(str(exc))
    if args.layers < 1:
        raise UsageError(f"--layers must be >= 1, got {args.layers}")
    report = gradcheck(dims=dims, window=window, params=[layer] * args.layers,
                       seed=args.seed, tolerance=args.tolerance)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 1


def cmd_metrics(args) -> int:
    a = load_volume(args.a)
    b = load_volume(args.b)
    if args.roi is not None:
        vals = _ints(args.roi, 6, "--roi")
        roi = Roi(origin=vals[:3], extent=vals[3:])
        a = crop(a, roi)
        b = crop(b, roi)
    report = compute_metrics(a, b, data_range=args.data_range,
                             window_radius=args.window_radius)
    print(json.dumps(report.to_json_dict(), indent=2, sort_keys=True))
    return 0


def cmd_phantom(args) -> int:
    dims = _ints(args.dims, 3, "--dims")
    clean, noisy = make_phantom(dims, args.seed, args.noise)
    for suffix, vol in (("clean", clean), ("noisy", noisy)):
        raw_path, _ = save_volume(vol, f"{args.prefix}_{suffix}")
        print(f"wrote {raw_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jbf",
        description="Trainable joint bilateral filtering for volumetric images.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_threads(p):
        p.add_argument("--threads", default=None,
                       help="worker threads: an integer or 'max' "
                            f"(default: ${parallel.ENV_VAR} or all cores)")

    p = sub.add_parser("denoise", help="filter a volume with trained parameters")
    p.add_argument("input", help="input volume (.raw/.json pair)")
    p.add_argument("output", help="output volume path")
    p.add_argument("--params", required=True, help="pipeline parameters JSON")
    p.add_argument("--guide", default=None, help="guide volume (guide_mode 'file')")
    p.add_argument("--target", default=None, help="reference volume; prints metrics")
    p.add_argument("--data-range", type=float, default=None,
                   help="intensity range for PSNR/SSIM (default: target range)")
    add_threads(p)
    p.set_defaults(func=cmd_denoise)

    p = sub.add_parser("train", help="fit sigmas on paired noisy/target volumes")
    p.add_argument("noisy_dir", help="directory of noisy volumes")
    p.add_argument("target_dir", help="directory of matching target volumes")
    p.add_argument("--out-params", required=True, help="where to write trained JSON")
    p.add_argument("--out-loss", default=None, help="where to write loss CSV")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr-range", type=float, default=1e-2,
                   help="Adam learning rate of the range sigmas")
    p.add_argument("--lr-spatial", type=float, default=5e-4,
                   help="Adam learning rate of the spatial sigmas")
    p.add_argument("--seed", type=int, default=0, help="shuffling seed")
    p.add_argument("--layers", type=int, default=3, help="stacked filter layers")
    p.add_argument("--sigma-spatial-init", type=float, default=1.0)
    p.add_argument("--sigma-r-init", type=float, default=None,
                   help="default: 0.1 x intensity range of the first target")
    p.add_argument("--sigma-min", type=float, default=1e-3)
    p.add_argument("--radii", default=None,
                   help="window radii rx,ry,rz (default: ceil(2*sigma) capped at 7)")
    p.add_argument("--guide-mode", choices=["self", "file", "gauss"], default="self")
    p.add_argument("--gauss-sigma", type=float, default=None,
                   help="smoothing width for guide_mode 'gauss'")
    p.add_argument("--guide-dir", default=None,
                   help="directory of guide volumes for guide_mode 'file'")
    add_threads(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--dims", default="5,5,3")
    p.add_argument("--radii", default="2,2,1")
    p.add_argument("--sigmas", default="1.2,0.8,1.0,30.0",
                   help="sigma_x,sigma_y,sigma_z,sigma_r")
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tolerance", type=float, default=1e-5)
    add_threads(p)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("metrics", help="compare two volumes")
    p.add_argument("a", help="volume under test")
    p.add_argument("b", help="reference volume")
    p.add_argument("--roi", default=None, help="x0,y0,z0,ex,ey,ez crop applied to both")
    p.add_argument("--data-range", type=float, default=None)
    p.add_argument("--window-radius", type=int, default=5, help="SSIM window radius")
    add_threads(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("phantom", help="generate a synthetic clean/noisy volume pair")
    p.add_argument("prefix", help="output path prefix (writes <prefix>_clean, <prefix>_noisy)")
    p.add_argument("--dims", default="64,64,8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=20.0, help="noise standard deviation")
    p.set_defaults(func=cmd_phantom)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _configure_threads(args)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run() -> None:
    raise SystemExit(main())
