"""Gradcheck harness tests, including corruption-injection sensitivity."""

import numpy as np
import pytest

import jbf.pipeline
from jbf import FilterParams, Volume, Window, gradcheck, make_test_instance


def test_default_instance_passes():
    report = gradcheck()
    assert report.passed
    assert report.max_rel_err < 1e-5
    assert len(report.checks) == 6  # 4 sigmas + d_input + d_guide
    names = [c.name for c in report.checks]
    assert names[:4] == ["layer1.sigma_x", "layer1.sigma_y",
                         "layer1.sigma_z", "layer1.sigma_r"]
    assert names[4:] == ["d_input", "d_guide"]


def test_three_layer_instance_passes():
    params = [FilterParams(1.0, 1.0, 0.7, 40.0)] * 3
    report = gradcheck(dims=(4, 4, 2), window=Window((1, 1, 1)), params=params,
                       seed=5)
    assert report.passed
    assert len(report.checks) == 14  # 3 layers x 4 sigmas + input + guide


def test_instance_determinism():
    layers = [FilterParams(1.2, 0.8, 1.0, 30.0)]
    x1, z1, t1 = make_test_instance((5, 5, 3), layers, seed=9)
    x2, z2, t2 = make_test_instance((5, 5, 3), layers, seed=9)
    assert x1.equals(x2) and z1.equals(z2) and t1.equals(t2)
    x3, _, _ = make_test_instance((5, 5, 3), layers, seed=10)
    assert not x1.equals(x3)


def test_instance_guide_band():
    # the guide must stay inside a band the range kernel resolves
    layers = [FilterParams(1.0, 1.0, 1.0, 8.0)]
    _, z, _ = make_test_instance((6, 6, 3), layers, seed=11)
    assert np.ptp(z.data) <= 4.0 * 8.0 + 1e-9
    x, _, _ = make_test_instance((6, 6, 3), layers, seed=11)
    assert np.ptp(x.data) > 400.0  # input spans the full working range


def _corrupting(scale_sigma=1.0, scale_input=1.0, scale_guide=1.0):
    real = jbf.pipeline.pipeline_backward

    def corrupted(tape, guide, state, dl_dpred):
        sigma_grads, d_guide, d_input = real(tape, guide, state, dl_dpred)
        sigma_grads = [g * scale_sigma for g in sigma_grads]
        d_input = Volume(d_input.dims, d_input.data * scale_input)
        d_guide = Volume(d_guide.dims, d_guide.data * scale_guide)
        return sigma_grads, d_guide, d_input

    return corrupted


def test_detects_corrupted_sigma_grads(monkeypatch):
    monkeypatch.setattr(jbf.pipeline, "pipeline_backward", _corrupting(scale_sigma=1.01))
    report = gradcheck()
    assert not report.passed
    failing = {c.name for c in report.checks if c.max_rel_err >= report.tolerance}
    assert "layer1.sigma_x" in failing and "layer1.sigma_r" in failing


def test_detects_corrupted_input_grad(monkeypatch):
    monkeypatch.setattr(jbf.pipeline, "pipeline_backward", _corrupting(scale_input=1.001))
    report = gradcheck()
    by_name = {c.name: c for c in report.checks}
    assert by_name["d_input"].max_rel_err > 1e-4
    assert not report.passed


def test_detects_corrupted_guide_grad(monkeypatch):
    monkeypatch.setattr(jbf.pipeline, "pipeline_backward", _corrupting(scale_guide=1.001))
    report = gradcheck()
    by_name = {c.name: c for c in report.checks}
    assert by_name["d_guide"].max_rel_err > 1e-4
    assert not report.passed


def test_report_lines():
    report = gradcheck(dims=(4, 4, 2), window=Window((1, 1, 0)))
    lines = report.lines()
    assert len(lines) == len(report.checks) + 1
    assert any("d_guide" in l for l in lines)
    assert lines[-1].startswith("gradcheck: PASS")
    assert "tolerance 1.0e-05" in lines[-1]


def test_tolerance_validation():
    with pytest.raises(ValueError, match="tolerance"):
        gradcheck(tolerance=-1e-5)
