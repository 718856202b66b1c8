"""Image-quality metrics and a paired significance test.

All metrics compare two volumes of equal dims in float64.  SSIM is
computed slice-by-slice in 2-D with a Gaussian window and averaged, the
usual convention for stacked tomographic slices.  The Wilcoxon
signed-rank test is exact (full sign enumeration) for small samples and
a tie-corrected normal approximation beyond that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _kernels
from .forward import spatial_lut
from .volume import Volume, atomic_write_text

#: Window std-dev of the SSIM Gaussian, in pixels.
SSIM_SIGMA = 1.5
#: Largest sample size for which the Wilcoxon p-value is enumerated exactly.
WILCOXON_EXACT_MAX_N = 20


def _check_dims(a: Volume, b: Volume) -> None:
    if a.dims != b.dims:
        raise ValueError(f"dims mismatch: {a.dims} vs {b.dims}")


def rmse(a: Volume, b: Volume) -> float:
    """Root-mean-square difference."""
    _check_dims(a, b)
    diff = a.data - b.data
    return float(np.sqrt(np.mean(diff * diff)))


def psnr(a: Volume, b: Volume, data_range: float) -> float:
    """Peak signal-to-noise ratio in dB over ``data_range``.

    Identical volumes have infinite PSNR; ``math.inf`` is returned.
    """
    data_range = float(data_range)
    if not (math.isfinite(data_range) and data_range > 0.0):
        raise ValueError(f"data_range must be finite and > 0, got {data_range!r}")
    r = rmse(a, b)
    if r == 0.0:
        return math.inf
    return 20.0 * math.log10(data_range) - 20.0 * math.log10(r)


def ssim(a: Volume, b: Volume, data_range: float, window_radius: int = 5) -> float:
    """Mean structural similarity, slice-wise 2-D with a Gaussian window.

    Uses the standard stabilizers ``C1 = (0.01 R)^2`` and
    ``C2 = (0.03 R)^2``.  Windows are truncated and renormalized at the
    slice borders.  Identical volumes score exactly 1.0.
    """
    _check_dims(a, b)
    data_range = float(data_range)
    if not (math.isfinite(data_range) and data_range > 0.0):
        raise ValueError(f"data_range must be finite and > 0, got {data_range!r}")
    r = int(window_radius)
    if r < 0:
        raise ValueError(f"window_radius must be >= 0, got {window_radius!r}")
    if 2 * r + 1 > min(a.nx, a.ny):
        raise ValueError(
            f"SSIM window {2 * r + 1} exceeds slice extent {(a.nx, a.ny)}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    lut = spatial_lut(SSIM_SIGMA, r)
    az = a.zyx
    bz = b.zyx
    means = np.empty(a.nz)
    smap = np.empty((a.ny, a.nx))
    for z in range(a.nz):
        _kernels.ssim_map(az[z], bz[z], lut, r, c1, c2, smap)
        means[z] = np.mean(smap)
    return float(np.mean(means))


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j hold equal values; their ranks are i+1..j+1
        ranks[order[i:j + 1]] = (i + 1 + j + 1) / 2.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(diffs) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped; ties in |d| share averaged ranks.  The
    statistic is ``W = min(W+, W-)``.  For n <= 20 the p-value comes
    from enumerating all 2^n sign assignments; above that, a normal
    approximation with tie and continuity corrections is used.

    Returns ``(W, p)``.  Requires at least 5 nonzero differences.
    """
    d = np.asarray(diffs, dtype=np.float64)
    if d.ndim != 1:
        raise ValueError(f"diffs must be 1-D, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("diffs contain non-finite values")
    d = d[d != 0.0]
    n = d.size
    if n < 5:
        raise ValueError(f"need at least 5 nonzero differences, got {n}")
    ranks = _average_ranks(np.abs(d))
    w_plus = float(np.sum(ranks[d > 0]))
    w_minus = float(np.sum(ranks[d < 0]))
    w = min(w_plus, w_minus)

    if n <= WILCOXON_EXACT_MAX_N:
        # every sign assignment's W+: doubling concat enumerates all
        # subset-rank sums; averaged ranks are dyadic so sums are exact
        sums = np.zeros(1)
        for r in ranks:
            sums = np.concatenate([sums, sums + r])
        p = 2.0 * np.count_nonzero(sums <= w) / sums.size
    else:
        mu = n * (n + 1) / 4.0
        var = n * (n + 1) * (2 * n + 1) / 24.0
        _, counts = np.unique(ranks, return_counts=True)
        var -= float(np.sum(counts.astype(np.float64) ** 3 - counts)) / 48.0
        zscore = (w - mu + 0.5) / math.sqrt(var)
        p = 2.0 * 0.5 * math.erfc(-zscore / math.sqrt(2.0))
    return w, min(1.0, p)


@dataclass(frozen=True)
class MetricsReport:
    """The three quality metrics of one volume comparison."""

    rmse: float
    psnr: float
    ssim: float
    n_voxels: int
    data_range: float

    def to_json_dict(self) -> dict:
        return {
            "rmse": self.rmse,
            "psnr": "infinite" if math.isinf(self.psnr) else self.psnr,
            "ssim": self.ssim,
            "n_voxels": self.n_voxels,
            "data_range": self.data_range,
        }

    CSV_HEADER = "rmse,psnr,ssim,n_voxels,data_range"

    def to_csv_row(self) -> str:
        p = "infinite" if math.isinf(self.psnr) else repr(self.psnr)
        return f"{self.rmse!r},{p},{self.ssim!r},{self.n_voxels},{self.data_range!r}"


def compute_metrics(a: Volume, b: Volume, data_range: float | None = None,
                    window_radius: int = 5) -> MetricsReport:
    """RMSE, PSNR and SSIM of ``a`` against reference ``b``.

    ``data_range`` defaults to the intensity range of the reference.
    """
    _check_dims(a, b)
    if data_range is None:
        data_range = float(b.data.max() - b.data.min())
        if data_range == 0.0:
            raise ValueError("constant reference: pass data_range explicitly")
    return MetricsReport(
        rmse=rmse(a, b),
        psnr=psnr(a, b, data_range),
        ssim=ssim(a, b, data_range, window_radius),
        n_voxels=a.n_voxels,
        data_range=float(data_range),
    )


def write_metrics_csv(reports, path, labels=None) -> Path:
    """Write one CSV row per report; optional leading label column."""
    reports = list(reports)
    if labels is not None:
        labels = list(labels)
        if len(labels) != len(reports):
            raise ValueError("labels and reports length mismatch")
        lines = ["label," + MetricsReport.CSV_HEADER]
        lines += [f"{lab},{rep.to_csv_row()}" for lab, rep in zip(labels, reports)]
    else:
        lines = [MetricsReport.CSV_HEADER]
        lines += [rep.to_csv_row() for rep in reports]
    out = Path(path)
    atomic_write_text(out, "\n".join(lines) + "\n")
    return out
