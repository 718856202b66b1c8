"""Finite-difference verification of the analytical gradients.

Builds a seeded random instance (input, guide, target), runs the
analytical backward pass, and compares every gradient component against
central finite differences of the pipeline loss.  The guide is drawn
inside a band of width ``2 * sigma_r`` around a random center so the
range kernel stays sensitive: with a full-scale guide and a small
sigma_r, almost all neighbor weights vanish and finite differences of
the loss would sit below float64 resolution, telling us nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import pipeline as _pipeline
from .forward import SIGMA_ORDER, FilterParams, Window
from .pipeline import PipelineState, mse_loss, pipeline_forward
from .volume import Volume

#: Relative-error floor added to |fd| in the denominator.
REL_FLOOR = 1e-12


@dataclass(frozen=True)
class QuantityCheck:
    """Worst-case agreement of one gradient quantity."""

    name: str
    max_rel_err: float
    max_abs_err: float
    step: float


@dataclass(frozen=True)
class GradCheckReport:
    """All per-quantity checks of one gradcheck run."""

    checks: tuple[QuantityCheck, ...]
    tolerance: float

    @property
    def max_rel_err(self) -> float:
        return max(c.max_rel_err for c in self.checks)

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tolerance

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            out.append(f"{c.name:<16s} max_rel {c.max_rel_err:10.3e}   "
                       f"max_abs {c.max_abs_err:10.3e}   step {c.step:.3e}")
        verdict = "PASS" if self.passed else "FAIL"
        out.append(f"gradcheck: {verdict} ({len(self.checks)} quantities, "
                   f"tolerance {self.tolerance:.1e}, max_rel {self.max_rel_err:.3e})")
        return out


def make_test_instance(dims, layers, seed: int) -> tuple[Volume, Volume, Volume]:
    """Seeded (input, guide, target) triple for gradient testing.

    Input and target span the full working range; the guide varies by at
    most ``2 * min(sigma_r)`` around a random center (clipped to keep a
    325-unit half-range) so neighbor weights stay well above the dead
    band of the range kernel.
    """
    dims = tuple(int(d) for d in dims)
    n = dims[0] * dims[1] * dims[2]
    rng = np.random.default_rng(int(seed))
    x = rng.uniform(-150.0, 500.0, size=n)
    amp = min(2.0 * min(p.sigma_r for p in layers), 325.0)
    center = rng.uniform(-150.0 + amp, 500.0 - amp)
    z = center + rng.uniform(-amp, amp, size=n)
    target = rng.uniform(-150.0, 500.0, size=n)
    return Volume(dims, x), Volume(dims, z), Volume(dims, target)


def _loss(x: Volume, z: Volume, layers, window: Window, target: Volume) -> float:
    state = PipelineState(layers=tuple(layers), window=window, guide_mode="file")
    tape = pipeline_forward(x, z, state)
    loss, _ = mse_loss(tape.prediction, target)
    return loss


def _volume_fd(x: Volume, z: Volume, layers, window, target,
               which: str, step: float) -> np.ndarray:
    base = (x if which == "input" else z).data
    fd = np.empty(base.size)
    for j in range(base.size):
        plus = base.copy()
        plus[j] += step
        minus = base.copy()
        minus[j] -= step
        if which == "input":
            lp = _loss(Volume(x.dims, plus), z, layers, window, target)
            lm = _loss(Volume(x.dims, minus), z, layers, window, target)
        else:
            lp = _loss(x, Volume(z.dims, plus), layers, window, target)
            lm = _loss(x, Volume(z.dims, minus), layers, window, target)
        fd[j] = (lp - lm) / (2.0 * step)
    return fd


def _agreement(name, analytical, fd, step) -> QuantityCheck:
    analytical = np.asarray(analytical, dtype=np.float64)
    fd = np.asarray(fd, dtype=np.float64)
    abs_err = np.abs(analytical - fd)
    rel_err = abs_err / (np.abs(fd) + REL_FLOOR)
    return QuantityCheck(name=name, max_rel_err=float(rel_err.max()),
                         max_abs_err=float(abs_err.max()), step=float(step))


def gradcheck(dims=(5, 5, 3), window: Window = Window((2, 2, 1)),
              params=FilterParams(1.2, 0.8, 1.0, 30.0),
              seed: int = 0, tolerance: float = 1e-5) -> GradCheckReport:
    """Compare analytical against finite-difference gradients.

    ``params`` may be a single :class:`FilterParams` (one layer) or a
    sequence (stacked pipeline).  Sigma steps are ``1e-4 * sigma``;
    voxel steps ``1e-4`` of the volume's standard deviation.  Checks
    one quantity per sigma component per layer plus ``d_input`` and
    ``d_guide``; a quantity passes when every component's relative
    error ``|ana - fd| / (|fd| + 1e-12)`` stays below ``tolerance``.
    """
    layers = [params] if isinstance(params, FilterParams) else list(params)
    if not (isinstance(tolerance, float) and tolerance > 0.0):
        raise ValueError(f"tolerance must be a positive float, got {tolerance!r}")
    x, z, target = make_test_instance(dims, layers, seed)

    state = PipelineState(layers=tuple(layers), window=window, guide_mode="file")
    tape = pipeline_forward(x, z, state)
    _, dl_dpred = mse_loss(tape.prediction, target)
    sigma_grads, d_guide, d_input = _pipeline.pipeline_backward(tape, z, state, dl_dpred)

    checks = []
    for li, layer in enumerate(layers):
        values = layer.as_array()
        for ci, comp in enumerate(SIGMA_ORDER):
            h = 1e-4 * values[ci]
            bumped = values.copy()
            bumped[ci] = values[ci] + h
            plus = list(layers)
            plus[li] = FilterParams.from_array(bumped)
            bumped[ci] = values[ci] - h
            minus = list(layers)
            minus[li] = FilterParams.from_array(bumped)
            fd = (_loss(x, z, plus, window, target)
                  - _loss(x, z, minus, window, target)) / (2.0 * h)
            checks.append(_agreement(f"layer{li + 1}.{comp}",
                                     sigma_grads[li][ci], fd, h))

    h_x = 1e-4 * (float(np.std(x.data)) or 1.0)
    checks.append(_agreement(
        "d_input", d_input.data,
        _volume_fd(x, z, layers, window, target, "input", h_x), h_x))
    h_z = 1e-4 * (float(np.std(z.data)) or 1.0)
    checks.append(_agreement(
        "d_guide", d_guide.data,
        _volume_fd(x, z, layers, window, target, "guide", h_z), h_z))

    return GradCheckReport(checks=tuple(checks), tolerance=float(tolerance))
