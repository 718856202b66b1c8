"""Analytical gradients of the joint bilateral filter.

Given the forward cache and the loss gradient ``dL/dy`` at the filter
output, these routines return exact derivatives with respect to the
four sigmas, the input volume, and the guide volume.  Everything is a
closed-form window sum; no autodiff and no approximation beyond float64
arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .forward import FilterParams, ForwardCache, Window, factor_lut, spatial_lut
from .volume import Volume


@dataclass(frozen=True)
class GradientBundle:
    """Gradients of one filter layer.

    ``d_sigma`` is a length-4 array ordered like
    :data:`jbf.forward.SIGMA_ORDER`; ``d_input`` and ``d_guide`` are
    volumes matching the layer's input.
    """

    d_sigma: np.ndarray
    d_input: Volume
    d_guide: Volume


def _check(x: Volume, z: Volume, cache: ForwardCache, dl_dy: Volume) -> None:
    if not (x.dims == z.dims == cache.dims == dl_dy.dims):
        raise ValueError(
            f"dims mismatch: input {x.dims}, guide {z.dims}, "
            f"cache {cache.dims}, dl_dy {dl_dy.dims}")


def grad_sigma(x: Volume, z: Volume, params: FilterParams, window: Window,
               cache: ForwardCache, dl_dy: Volume) -> np.ndarray:
    """Loss gradient w.r.t. ``(sigma_x, sigma_y, sigma_z, sigma_r)``.

    Per voxel k the chain rule gives

        dL/dsigma = sum_k (dL/dy_k / w_k) * sum_n wt_kn * f_n * (x_n - y_k)

    where ``f_n`` is ``d^2/sigma^3`` for a spatial sigma (d the offset
    along that axis) or ``c^2/sigma_r^3`` for the range sigma (c the
    guide difference).  The ``(x_n - y_k)`` form folds the alpha and w
    derivatives together, so constant inputs yield exact zeros.  The
    per-voxel contributions are reduced in a fixed order, making the
    result independent of the worker count.
    """
    _check(x, z, cache, dl_dy)
    rx, ry, rz = window.radii
    contrib = np.empty((x.n_voxels, 4))
    _kernels.grad_sigma_contrib(
        x.zyx, z.zyx, cache.w.zyx, cache.y_hat.zyx, dl_dy.zyx,
        spatial_lut(params.sigma_x, rx),
        spatial_lut(params.sigma_y, ry),
        spatial_lut(params.sigma_z, rz),
        factor_lut(params.sigma_x, rx),
        factor_lut(params.sigma_y, ry),
        factor_lut(params.sigma_z, rz),
        1.0 / (2.0 * params.sigma_r ** 2),
        1.0 / params.sigma_r ** 3,
        rx, ry, rz, contrib)
    return contrib.sum(axis=0)


def grad_input(z: Volume, params: FilterParams, window: Window,
               cache: ForwardCache, dl_dy: Volume) -> Volume:
    """Loss gradient w.r.t. the input volume.

    The filter is linear in the input, so this is a pure gather of
    ``(dL/dy_k / w_k) * wt_ki`` over the voxels k whose windows contain
    i; the box window is symmetric, so those are the voxels inside i's
    own window.
    """
    if not (z.dims == cache.dims == dl_dy.dims):
        raise ValueError(
            f"dims mismatch: guide {z.dims}, cache {cache.dims}, dl_dy {dl_dy.dims}")
    rx, ry, rz = window.radii
    out = np.empty_like(z.zyx)
    _kernels.grad_input(
        z.zyx, cache.w.zyx, dl_dy.zyx,
        spatial_lut(params.sigma_x, rx),
        spatial_lut(params.sigma_y, ry),
        spatial_lut(params.sigma_z, rz),
        1.0 / (2.0 * params.sigma_r ** 2),
        rx, ry, rz, out)
    return Volume.from_zyx(out)


def grad_guide(x: Volume, z: Volume, params: FilterParams, window: Window,
               cache: ForwardCache, dl_dy: Volume) -> Volume:
    """Loss gradient w.r.t. the guide volume.

    Guide voxel i enters the filter twice: as the center of its own
    window (every neighbor weight depends on z_i) and as a neighbor in
    the windows of nearby voxels.  Both contributions share the factor
    ``wt * (z_n - z_i) / sigma_r^2`` and are gathered in one window
    sweep.  A constant guide yields exact zeros.
    """
    _check(x, z, cache, dl_dy)
    rx, ry, rz = window.radii
    out = np.empty_like(x.zyx)
    _kernels.grad_guide(
        x.zyx, z.zyx, cache.w.zyx, cache.y_hat.zyx, dl_dy.zyx,
        spatial_lut(params.sigma_x, rx),
        spatial_lut(params.sigma_y, ry),
        spatial_lut(params.sigma_z, rz),
        1.0 / (2.0 * params.sigma_r ** 2),
        1.0 / params.sigma_r ** 2,
        rx, ry, rz, out)
    return Volume.from_zyx(out)


def backward(x: Volume, z: Volume, params: FilterParams, window: Window,
             cache: ForwardCache, dl_dy: Volume) -> GradientBundle:
    """All gradients of one layer in a single call."""
    return GradientBundle(
        d_sigma=grad_sigma(x, z, params, window, cache, dl_dy),
        d_input=grad_input(z, params, window, cache, dl_dy),
        d_guide=grad_guide(x, z, params, window, cache, dl_dy),
    )
