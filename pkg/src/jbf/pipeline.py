"""Stacked filtering pipeline: guide resolution, forward, loss, backward.

A pipeline applies L filter layers in sequence, every layer reading the
same guide volume.  The forward pass records a tape of per-layer inputs
and caches; the backward pass replays it in reverse, chaining each
layer's input gradient into the previous layer and accumulating the
guide gradient across layers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .backward import backward
from .forward import FilterParams, Window, ForwardCache, jbf_forward, spatial_lut
from .volume import Volume, atomic_write_text

GUIDE_MODES = ("self", "file", "gauss")


@dataclass(frozen=True)
class PipelineState:
    """Configuration of a filtering pipeline: the per-layer sigmas, the
    shared window, and how the guide is obtained.

    ``gauss_sigma`` is required exactly when ``guide_mode == "gauss"``.
    """

    layers: tuple[FilterParams, ...]
    window: Window
    guide_mode: str = "self"
    gauss_sigma: float | None = None

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("pipeline needs at least one layer")
        if not all(isinstance(p, FilterParams) for p in layers):
            raise ValueError("layers must be FilterParams instances")
        if self.guide_mode not in GUIDE_MODES:
            raise ValueError(f"guide_mode must be one of {GUIDE_MODES}, got {self.guide_mode!r}")
        if self.guide_mode == "gauss":
            if self.gauss_sigma is None:
                raise ValueError("guide_mode 'gauss' requires gauss_sigma")
            sig = float(self.gauss_sigma)
            if not (math.isfinite(sig) and sig > 0.0):
                raise ValueError(f"gauss_sigma must be finite and > 0, got {self.gauss_sigma!r}")
            object.__setattr__(self, "gauss_sigma", sig)
        elif self.gauss_sigma is not None:
            raise ValueError(f"gauss_sigma only applies to guide_mode 'gauss', got mode {self.guide_mode!r}")
        object.__setattr__(self, "layers", layers)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def with_layers(self, layers) -> "PipelineState":
        return replace(self, layers=tuple(layers))

    def to_json_dict(self) -> dict:
        d = {
            "window": {"radii": list(self.window.radii)},
            "guide_mode": self.guide_mode,
            "layers": [p.to_dict() for p in self.layers],
        }
        if self.gauss_sigma is not None:
            d["gauss_sigma"] = self.gauss_sigma
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "PipelineState":
        try:
            radii = d["window"]["radii"]
            layers = d["layers"]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"params JSON missing field: {exc}") from exc
        return cls(
            layers=tuple(FilterParams.from_dict(p) for p in layers),
            window=Window(tuple(radii)),
            guide_mode=d.get("guide_mode", "self"),
            gauss_sigma=d.get("gauss_sigma"),
        )


def save_params(state: PipelineState, path) -> Path:
    """Write pipeline parameters as JSON (atomic)."""
    out = Path(path)
    atomic_write_text(out, json.dumps(state.to_json_dict(), indent=2) + "\n")
    return out


def load_params(path) -> PipelineState:
    """Read pipeline parameters written by :func:`save_params`."""
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"missing params file {p}")
    try:
        d = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt params file {p}: {exc}") from exc
    return PipelineState.from_json_dict(d)


@dataclass(frozen=True)
class PipelineTape:
    """Record of one pipeline forward pass.

    ``inputs[i]`` is what layer i consumed; ``caches[i]`` its forward
    cache; ``prediction`` the final output (== ``caches[-1].y_hat``).
    """

    inputs: tuple[Volume, ...]
    caches: tuple[ForwardCache, ...]
    prediction: Volume


def default_window(layers, cap: int = 7) -> Window:
    """Window radii from the initial sigmas: ``ceil(2 sigma)`` per axis,
    capped at ``cap``, maximized over layers.  Resolved once up front;
    later sigma updates never change the window.
    """
    radii = [0, 0, 0]
    for p in layers:
        for axis, sig in enumerate(p.spatial):
            radii[axis] = max(radii[axis], min(int(math.ceil(2.0 * sig)), cap))
    return Window(tuple(radii))


def gaussian_smooth(v: Volume, sigma: float, radius: int | None = None) -> Volume:
    """Gaussian-blur ``v`` with an isotropic truncated window.

    The default radius is ``ceil(2 sigma)``; borders renormalize.  With
    ``radius=0`` the window is the center voxel alone and the volume
    passes through bitwise unchanged.
    """
    sigma = float(sigma)
    if not (math.isfinite(sigma) and sigma > 0.0):
        raise ValueError(f"sigma must be finite and > 0, got {sigma!r}")
    if radius is None:
        radius = int(math.ceil(2.0 * sigma))
    radius = int(radius)
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    lut = spatial_lut(sigma, radius)
    out = np.empty_like(v.zyx)
    _kernels.gauss_smooth(v.zyx, lut, lut, lut, radius, radius, radius, out)
    return Volume.from_zyx(out)


def resolve_guide(x: Volume, state: PipelineState, guide_file: Volume | None = None) -> Volume:
    """Produce the shared guide for ``x`` according to ``state.guide_mode``.

    ``guide_file`` must be given exactly when the mode is ``"file"``.
    """
    if state.guide_mode == "file":
        if guide_file is None:
            raise ValueError("guide_mode 'file' requires a guide volume")
        if guide_file.dims != x.dims:
            raise ValueError(f"guide dims {guide_file.dims} != input dims {x.dims}")
        return guide_file
    if guide_file is not None:
        raise ValueError(f"guide volume given but guide_mode is {state.guide_mode!r}")
    if state.guide_mode == "self":
        return x
    return gaussian_smooth(x, state.gauss_sigma)


def pipeline_forward(x: Volume, guide: Volume, state: PipelineState) -> PipelineTape:
    """Run all layers on ``x`` under the shared ``guide``."""
    if guide.dims != x.dims:
        raise ValueError(f"guide dims {guide.dims} != input dims {x.dims}")
    inputs = []
    caches = []
    current = x
    for params in state.layers:
        inputs.append(current)
        cache = jbf_forward(current, guide, params, state.window)
        caches.append(cache)
        current = cache.y_hat
    return PipelineTape(inputs=tuple(inputs), caches=tuple(caches), prediction=current)


def mse_loss(prediction: Volume, target: Volume) -> tuple[float, Volume]:
    """Mean squared error and its gradient ``(2/N) (prediction - target)``."""
    if prediction.dims != target.dims:
        raise ValueError(f"prediction dims {prediction.dims} != target dims {target.dims}")
    diff = prediction.data - target.data
    loss = float(np.mean(diff * diff))
    grad = (2.0 / diff.size) * diff
    return loss, Volume(prediction.dims, grad)


def pipeline_backward(tape: PipelineTape, guide: Volume, state: PipelineState,
                      dl_dpred: Volume):
    """Reverse sweep through the tape.

    Returns ``(sigma_grads, d_guide, d_input)`` where ``sigma_grads`` is
    a list of length-4 arrays in layer order, ``d_guide`` the guide
    gradient accumulated over all layers, and ``d_input`` the gradient
    w.r.t. the pipeline input.  In self-guided pipelines the guide is
    treated as a detached copy of the input: its gradient is still
    reported, but does not flow back into ``d_input``.
    """
    n = state.n_layers
    if len(tape.inputs) != n or len(tape.caches) != n:
        raise ValueError(f"tape has {len(tape.caches)} layers, state has {n}")
    if dl_dpred.dims != tape.prediction.dims:
        raise ValueError("dl_dpred dims do not match prediction")
    sigma_grads: list[np.ndarray | None] = [None] * n
    d_guide = np.zeros(guide.n_voxels)
    running = dl_dpred
    for i in range(n - 1, -1, -1):
        bundle = backward(tape.inputs[i], guide, state.layers[i], state.window,
                          tape.caches[i], running)
        sigma_grads[i] = bundle.d_sigma
        d_guide += bundle.d_guide.data
        running = bundle.d_input
    return sigma_grads, Volume(guide.dims, d_guide), running
