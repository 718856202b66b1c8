"""Adam training of pipeline sigmas.

Every sigma is a scalar parameter with its own Adam moment state.  The
range sigmas and the spatial sigmas use separate learning rates, since
they live on very different scales (intensity units vs. voxels).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .forward import FilterParams
from .pipeline import PipelineState, mse_loss, pipeline_backward, pipeline_forward, resolve_guide
from .volume import atomic_write_text


@dataclass(frozen=True)
class AdamState:
    """Moment estimates of one scalar parameter."""

    m: float = 0.0
    v: float = 0.0
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(param: float, grad: float, state: AdamState, lr: float) -> tuple[float, AdamState]:
    """One bias-corrected Adam update; returns the new parameter and state."""
    grad = float(grad)
    if not math.isfinite(grad):
        raise ValueError(f"non-finite gradient {grad!r}")
    if not (math.isfinite(lr) and lr > 0.0):
        raise ValueError(f"learning rate must be finite and > 0, got {lr!r}")
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * (grad * grad)
    t = state.t + 1
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_param = float(param) - lr * m_hat / (math.sqrt(v_hat) + state.eps)
    return new_param, replace(state, m=m, v=v, t=t)


def project_sigmas(params: FilterParams, sigma_min: float) -> FilterParams:
    """Clamp every sigma from below so the filter stays well-defined."""
    sigma_min = float(sigma_min)
    if not (math.isfinite(sigma_min) and sigma_min > 0.0):
        raise ValueError(f"sigma_min must be finite and > 0, got {sigma_min!r}")
    return FilterParams(*(max(s, sigma_min) for s in params.as_array()))


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of :func:`train`.

    The defaults mirror the setup this engine was built around: range
    sigmas at 1e-2, spatial sigmas at 5e-4, sample-at-a-time updates.
    """

    epochs: int
    lr_range: float = 1e-2
    lr_spatial: float = 5e-4
    seed: int = 0
    sigma_min: float = 1e-3

    def __post_init__(self):
        if int(self.epochs) < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs!r}")
        object.__setattr__(self, "epochs", int(self.epochs))
        for name in ("lr_range", "lr_spatial", "sigma_min"):
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {getattr(self, name)!r}")
            object.__setattr__(self, name, val)
        object.__setattr__(self, "seed", int(self.seed))


def train(pairs, state: PipelineState, config: TrainConfig,
          guides=None, on_epoch=None) -> tuple[PipelineState, list[float]]:
    """Fit the pipeline sigmas to ``(noisy, target)`` volume pairs.

    Each epoch visits every pair once in a seeded shuffled order and
    takes one Adam step per pair (batch size 1) on all sigmas of all
    layers, projecting them onto ``[sigma_min, inf)`` after each step.
    ``guides`` must supply one guide volume per pair exactly when the
    state's guide mode is ``"file"``.  ``on_epoch(i, mean_loss)`` is
    called after each epoch when given (progress reporting).

    Returns the trained state and the per-epoch mean training loss.
    Raises if a loss ever becomes non-finite (divergence) rather than
    continuing silently.
    """
    pairs = list(pairs)
    if not pairs:
        raise ValueError("need at least one training pair")
    for noisy, target in pairs:
        if noisy.dims != target.dims:
            raise ValueError(f"pair dims mismatch: {noisy.dims} vs {target.dims}")
    if state.guide_mode == "file":
        guides = list(guides) if guides is not None else []
        if len(guides) != len(pairs):
            raise ValueError(f"guide_mode 'file' needs {len(pairs)} guides, got {len(guides)}")
    elif guides is not None:
        raise ValueError(f"guides given but guide_mode is {state.guide_mode!r}")

    n_layers = state.n_layers
    adam = [[AdamState() for _ in range(4)] for _ in range(n_layers)]
    lrs = (config.lr_spatial, config.lr_spatial, config.lr_spatial, config.lr_range)

    rng = np.random.default_rng(config.seed)
    current = state
    history: list[float] = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(pairs))
        epoch_losses = []
        for j in order:
            noisy, target = pairs[j]
            guide = resolve_guide(noisy, current,
                                  guides[j] if current.guide_mode == "file" else None)
            tape = pipeline_forward(noisy, guide, current)
            loss, dl_dpred = mse_loss(tape.prediction, target)
            if not math.isfinite(loss):
                raise ArithmeticError(f"training diverged: loss {loss!r}")
            sigma_grads, _, _ = pipeline_backward(tape, guide, current, dl_dpred)
            new_layers = []
            for li in range(n_layers):
                values = list(current.layers[li].as_array())
                for ci in range(4):
                    values[ci], adam[li][ci] = adam_step(
                        values[ci], sigma_grads[li][ci], adam[li][ci], lrs[ci])
                new_layers.append(project_sigmas(FilterParams.from_array(values),
                                                 config.sigma_min))
            current = current.with_layers(new_layers)
            epoch_losses.append(loss)
        history.append(float(np.mean(epoch_losses)))
        if on_epoch is not None:
            on_epoch(epoch, history[-1])
    return current, history


def write_loss_csv(history, path) -> Path:
    """Write the per-epoch loss history as ``epoch,mean_train_mse`` CSV."""
    lines = ["epoch,mean_train_mse"]
    for i, loss in enumerate(history, start=1):
        lines.append(f"{i},{loss!r}")
    out = Path(path)
    atomic_write_text(out, "\n".join(lines) + "\n")
    return out
