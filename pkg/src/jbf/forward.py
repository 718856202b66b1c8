"""Joint bilateral filter forward pass.

Each output voxel is a normalized, guide-weighted average of the input
over a truncated box window:

    y_k = a_k / w_k
    a_k = sum_n Gs(p_k - p_n) * Gr(z_k - z_n) * x_n
    w_k = sum_n Gs(p_k - p_n) * Gr(z_k - z_n)

with per-axis spatial Gaussians Gs and a range Gaussian Gr over guide
differences.  Out-of-bounds neighbors are excluded, which renormalizes
the window; the center voxel always contributes weight 1, so w_k >= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .volume import Volume

#: Order of sigma components in gradient arrays and JSON layers.
SIGMA_ORDER = ("sigma_x", "sigma_y", "sigma_z", "sigma_r")


@dataclass(frozen=True)
class FilterParams:
    """The four trainable kernel widths of one filter layer.

    Spatial widths are in voxels, the range width in guide intensity
    units.  All must be finite and positive.
    """

    sigma_x: float
    sigma_y: float
    sigma_z: float
    sigma_r: float

    def __post_init__(self):
        for name in SIGMA_ORDER:
            val = float(getattr(self, name))
            if not (math.isfinite(val) and val > 0.0):
                raise ValueError(f"{name} must be finite and > 0, got {getattr(self, name)!r}")
            object.__setattr__(self, name, val)

    @property
    def spatial(self) -> tuple[float, float, float]:
        return (self.sigma_x, self.sigma_y, self.sigma_z)

    def as_array(self) -> np.ndarray:
        """Sigmas as a length-4 array in :data:`SIGMA_ORDER`."""
        return np.array([self.sigma_x, self.sigma_y, self.sigma_z, self.sigma_r])

    @classmethod
    def from_array(cls, values) -> "FilterParams":
        vx, vy, vz, vr = (float(v) for v in values)
        return cls(vx, vy, vz, vr)

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in SIGMA_ORDER}

    @classmethod
    def from_dict(cls, d: dict) -> "FilterParams":
        missing = [name for name in SIGMA_ORDER if name not in d]
        if missing:
            raise ValueError(f"filter params missing {missing}")
        return cls(**{name: d[name] for name in SIGMA_ORDER})


@dataclass(frozen=True)
class Window:
    """Truncation radii ``(rx, ry, rz)`` of the filter window, in voxels.

    A radius of 0 collapses that axis to the center plane.  The window
    is fixed independently of the sigmas so that parameter perturbations
    never change the support the filter sums over.
    """

    radii: tuple[int, int, int]

    def __post_init__(self):
        radii = tuple(int(r) for r in self.radii)
        if len(radii) != 3 or any(r < 0 for r in radii):
            raise ValueError(f"radii must be three non-negative integers, got {self.radii!r}")
        object.__setattr__(self, "radii", radii)

    @property
    def rx(self) -> int:
        return self.radii[0]

    @property
    def ry(self) -> int:
        return self.radii[1]

    @property
    def rz(self) -> int:
        return self.radii[2]


@dataclass(frozen=True)
class ForwardCache:
    """Everything the forward pass computed that the backward pass reuses:
    the weight total ``w``, weighted sum ``alpha``, and output ``y_hat``.
    """

    w: Volume
    alpha: Volume
    y_hat: Volume

    def __post_init__(self):
        if not (self.w.dims == self.alpha.dims == self.y_hat.dims):
            raise ValueError("cache volumes must share dims")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w.dims


def gauss_range(c, sigma_r: float):
    """Range kernel ``exp(-c^2 / (2 sigma_r^2))`` for guide difference ``c``."""
    sigma_r = float(sigma_r)
    if not (math.isfinite(sigma_r) and sigma_r > 0.0):
        raise ValueError(f"sigma_r must be finite and > 0, got {sigma_r!r}")
    c = np.asarray(c, dtype=np.float64)
    out = np.exp(-(c * c) / (2.0 * sigma_r * sigma_r))
    return float(out) if out.ndim == 0 else out


def gauss_spatial(d, params: FilterParams):
    """Separable spatial kernel for voxel offset ``d = (dx, dy, dz)``."""
    dx, dy, dz = (np.asarray(v, dtype=np.float64) for v in d)
    out = (np.exp(-(dx * dx) / (2.0 * params.sigma_x ** 2))
           * np.exp(-(dy * dy) / (2.0 * params.sigma_y ** 2))
           * np.exp(-(dz * dz) / (2.0 * params.sigma_z ** 2)))
    return float(out) if out.ndim == 0 else out


def spatial_lut(sigma: float, radius: int) -> np.ndarray:
    """Per-axis spatial weights for offsets ``-radius..radius`` (index ``d + radius``)."""
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    return np.exp(-(offs * offs) / (2.0 * float(sigma) ** 2))


def factor_lut(sigma: float, radius: int) -> np.ndarray:
    """Per-axis sigma-derivative factors ``d^2 / sigma^3`` (index ``d + radius``)."""
    offs = np.arange(-radius, radius + 1, dtype=np.float64)
    return (offs * offs) / float(sigma) ** 3


def _check_pair(x: Volume, z: Volume) -> None:
    if x.dims != z.dims:
        raise ValueError(f"input dims {x.dims} != guide dims {z.dims}")


def jbf_forward(x: Volume, z: Volume, params: FilterParams, window: Window) -> ForwardCache:
    """Filter ``x`` under guide ``z`` and return the full forward cache.

    The output at each voxel is a convex combination of input values
    inside that voxel's (clipped) window; in particular constant inputs
    pass through unchanged and the output range never exceeds the input
    range in the window.
    """
    _check_pair(x, z)
    rx, ry, rz = window.radii
    xa = x.zyx
    za = z.zyx
    w = np.empty_like(xa)
    alpha = np.empty_like(xa)
    y = np.empty_like(xa)
    inv_two_sr2 = 1.0 / (2.0 * params.sigma_r ** 2)
    _kernels.jbf_forward(
        xa, za,
        spatial_lut(params.sigma_x, rx),
        spatial_lut(params.sigma_y, ry),
        spatial_lut(params.sigma_z, rz),
        inv_two_sr2, rx, ry, rz,
        w, alpha, y)
    return ForwardCache(w=Volume.from_zyx(w), alpha=Volume.from_zyx(alpha),
                        y_hat=Volume.from_zyx(y))


def jbf_filter(x: Volume, z: Volume, params: FilterParams, window: Window) -> Volume:
    """Convenience wrapper returning just the filtered volume."""
    return jbf_forward(x, z, params, window).y_hat
