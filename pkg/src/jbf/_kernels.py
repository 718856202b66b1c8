"""Numba stencil kernels behind the public filtering API.

All kernels parallelize over a flat voxel index and keep each voxel's
window loop in a fixed z-outer / y-middle / x-inner order, so every
accumulation happens in the same sequence regardless of the worker
count: results are bitwise reproducible for any thread count.  Borders
truncate the window (out-of-bounds neighbors are skipped); weights are
renormalized implicitly by dividing through the accumulated total.
"""

from __future__ import annotations

import math

from . import parallel  # noqa: F401  (sets the thread cap before numba loads)
from numba import njit, prange


@njit(cache=True, parallel=True)
def jbf_forward(x, z, lut_x, lut_y, lut_z, inv_two_sr2, rx, ry, rz,
                w_out, a_out, y_out):
    nz, ny, nx = x.shape
    total = nz * ny * nx
    for idx in prange(total):
        kz = idx // (ny * nx)
        rem = idx - kz * ny * nx
        ky = rem // nx
        kx = rem - ky * nx
        zc = z[kz, ky, kx]
        w = 0.0
        a = 0.0
        lo = x[kz, ky, kx]
        hi = lo
        for nz_ in range(max(kz - rz, 0), min(kz + rz, nz - 1) + 1):
            gz = lut_z[nz_ - kz + rz]
            for ny_ in range(max(ky - ry, 0), min(ky + ry, ny - 1) + 1):
                gzy = gz * lut_y[ny_ - ky + ry]
                for nx_ in range(max(kx - rx, 0), min(kx + rx, nx - 1) + 1):
                    gs = gzy * lut_x[nx_ - kx + rx]
                    c = zc - z[nz_, ny_, nx_]
                    wt = gs * math.exp(-(c * c) * inv_two_sr2)
                    xv = x[nz_, ny_, nx_]
                    w += wt
                    a += wt * xv
                    if xv < lo:
                        lo = xv
                    elif xv > hi:
                        hi = xv
        y = a / w
        # the exact result is a convex combination of window values; pin
        # down the last-ulp drift so the bound holds exactly
        if y < lo:
            y = lo
        elif y > hi:
            y = hi
        w_out[kz, ky, kx] = w
        a_out[kz, ky, kx] = a
        y_out[kz, ky, kx] = y


@njit(cache=True, parallel=True)
def grad_input(z, w, dldy, lut_x, lut_y, lut_z, inv_two_sr2, rx, ry, rz, out):
    nz, ny, nx = z.shape
    total = nz * ny * nx
    for idx in prange(total):
        iz = idx // (ny * nx)
        rem = idx - iz * ny * nx
        iy = rem // nx
        ix = rem - iy * nx
        zi = z[iz, iy, ix]
        acc = 0.0
        # gather over the voxels whose windows contain i (window symmetry)
        for kz in range(max(iz - rz, 0), min(iz + rz, nz - 1) + 1):
            gz = lut_z[kz - iz + rz]
            for ky in range(max(iy - ry, 0), min(iy + ry, ny - 1) + 1):
                gzy = gz * lut_y[ky - iy + ry]
                for kx in range(max(ix - rx, 0), min(ix + rx, nx - 1) + 1):
                    gs = gzy * lut_x[kx - ix + rx]
                    c = z[kz, ky, kx] - zi
                    wt = gs * math.exp(-(c * c) * inv_two_sr2)
                    acc += (dldy[kz, ky, kx] / w[kz, ky, kx]) * wt
        out[iz, iy, ix] = acc


@njit(cache=True, parallel=True)
def grad_sigma_contrib(x, z, w, y, dldy, lut_x, lut_y, lut_z,
                       fac_x, fac_y, fac_z, inv_two_sr2, inv_sr3,
                       rx, ry, rz, out):
    # out has shape (total, 4): per-voxel contributions to the four
    # sigma gradients, reduced outside in a fixed order
    nz, ny, nx = x.shape
    total = nz * ny * nx
    for idx in prange(total):
        kz = idx // (ny * nx)
        rem = idx - kz * ny * nx
        ky = rem // nx
        kx = rem - ky * nx
        zc = z[kz, ky, kx]
        yk = y[kz, ky, kx]
        sx = 0.0
        sy = 0.0
        sz = 0.0
        sr = 0.0
        for nz_ in range(max(kz - rz, 0), min(kz + rz, nz - 1) + 1):
            gz = lut_z[nz_ - kz + rz]
            fz = fac_z[nz_ - kz + rz]
            for ny_ in range(max(ky - ry, 0), min(ky + ry, ny - 1) + 1):
                gzy = gz * lut_y[ny_ - ky + ry]
                fy = fac_y[ny_ - ky + ry]
                for nx_ in range(max(kx - rx, 0), min(kx + rx, nx - 1) + 1):
                    gs = gzy * lut_x[nx_ - kx + rx]
                    c = zc - z[nz_, ny_, nx_]
                    wt = gs * math.exp(-(c * c) * inv_two_sr2)
                    # (x_n - y_k) form: alpha and w derivatives combined,
                    # exactly zero on constant inputs
                    d = wt * (x[nz_, ny_, nx_] - yk)
                    sx += d * fac_x[nx_ - kx + rx]
                    sy += d * fy
                    sz += d * fz
                    sr += d * ((c * c) * inv_sr3)
        scale = dldy[kz, ky, kx] / w[kz, ky, kx]
        out[idx, 0] = scale * sx
        out[idx, 1] = scale * sy
        out[idx, 2] = scale * sz
        out[idx, 3] = scale * sr


@njit(cache=True, parallel=True)
def grad_guide(x, z, w, y, dldy, lut_x, lut_y, lut_z, inv_two_sr2, inv_sr2,
               rx, ry, rz, out):
    nz, ny, nx = x.shape
    total = nz * ny * nx
    for idx in prange(total):
        iz = idx // (ny * nx)
        rem = idx - iz * ny * nx
        iy = rem // nx
        ix = rem - iy * nx
        zi = z[iz, iy, ix]
        xi = x[iz, iy, ix]
        yi = y[iz, iy, ix]
        own = 0.0    # i as the filtered voxel: its window shifts
        cross = 0.0  # i as a neighbor inside other voxels' windows
        for nz_ in range(max(iz - rz, 0), min(iz + rz, nz - 1) + 1):
            gz = lut_z[nz_ - iz + rz]
            for ny_ in range(max(iy - ry, 0), min(iy + ry, ny - 1) + 1):
                gzy = gz * lut_y[ny_ - iy + ry]
                for nx_ in range(max(ix - rx, 0), min(ix + rx, nx - 1) + 1):
                    gs = gzy * lut_x[nx_ - ix + rx]
                    c = z[nz_, ny_, nx_] - zi
                    wt = gs * math.exp(-(c * c) * inv_two_sr2)
                    t = wt * c * inv_sr2
                    own += t * (x[nz_, ny_, nx_] - yi)
                    if nz_ != iz or ny_ != iy or nx_ != ix:
                        cross += (dldy[nz_, ny_, nx_] / w[nz_, ny_, nx_]) \
                            * t * (xi - y[nz_, ny_, nx_])
        out[iz, iy, ix] = (dldy[iz, iy, ix] / w[iz, iy, ix]) * own + cross


@njit(cache=True, parallel=True)
def gauss_smooth(x, lut_x, lut_y, lut_z, rx, ry, rz, out):
    nz, ny, nx = x.shape
    total = nz * ny * nx
    for idx in prange(total):
        kz = idx // (ny * nx)
        rem = idx - kz * ny * nx
        ky = rem // nx
        kx = rem - ky * nx
        w = 0.0
        a = 0.0
        for nz_ in range(max(kz - rz, 0), min(kz + rz, nz - 1) + 1):
            gz = lut_z[nz_ - kz + rz]
            for ny_ in range(max(ky - ry, 0), min(ky + ry, ny - 1) + 1):
                gzy = gz * lut_y[ny_ - ky + ry]
                for nx_ in range(max(kx - rx, 0), min(kx + rx, nx - 1) + 1):
                    g = gzy * lut_x[nx_ - kx + rx]
                    w += g
                    a += g * x[nz_, ny_, nx_]
        out[kz, ky, kx] = a / w


@njit(cache=True, parallel=True)
def ssim_map(a, b, lut, r, c1, c2, out):
    # 2-D per-pixel structural similarity over one slice, Gaussian
    # windows truncated and renormalized at borders
    ny, nx = a.shape
    total = ny * nx
    for idx in prange(total):
        iy = idx // nx
        ix = idx - iy * nx
        sw = 0.0
        sa = 0.0
        sb = 0.0
        saa = 0.0
        sbb = 0.0
        sab = 0.0
        for wy in range(max(iy - r, 0), min(iy + r, ny - 1) + 1):
            gy = lut[wy - iy + r]
            for wx in range(max(ix - r, 0), min(ix + r, nx - 1) + 1):
                g = gy * lut[wx - ix + r]
                av = a[wy, wx]
                bv = b[wy, wx]
                sw += g
                sa += g * av
                sb += g * bv
                # products grouped so that swapping a and b is bitwise
                # neutral: ssim(a, b) == ssim(b, a) exactly
                saa += g * (av * av)
                sbb += g * (bv * bv)
                sab += g * (av * bv)
        ma = sa / sw
        mb = sb / sw
        va = saa / sw - ma * ma
        vb = sbb / sw - mb * mb
        cab = sab / sw - ma * mb
        out[iy, ix] = ((2.0 * (ma * mb) + c1) * (2.0 * cab + c2)) \
            / ((ma * ma + mb * mb + c1) * (va + vb + c2))
