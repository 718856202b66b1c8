"""Dense 3-D scalar volumes: construction, cropping, file IO, phantoms.

Volumes are immutable value objects over a flat float64 buffer in
x-fastest order.  File IO uses a raw little-endian float32 payload next
to a small JSON sidecar describing it; writes are atomic (temp file +
rename) so a crash never leaves a half-written volume behind.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

_SIDECAR = {"dtype": "f32", "order": "x-fastest", "endian": "little"}


@dataclass(frozen=True, eq=False, repr=False)
class Volume:
    """A dense 3-D scalar field on a unit-spaced voxel grid.

    ``dims`` is ``(nx, ny, nz)`` and ``data`` the flat float64 payload in
    x-fastest order, so ``data[x + nx * (y + ny * z)]`` is the voxel at
    ``(x, y, z)``.  Values are validated finite at construction and the
    buffer is frozen read-only; operations on volumes return new
    instances rather than mutating.
    """

    dims: tuple[int, int, int]
    data: np.ndarray

    def __post_init__(self):
        try:
            dims = tuple(int(d) for d in self.dims)
        except (TypeError, ValueError):
            raise ValueError(f"dims must be three positive integers, got {self.dims!r}")
        if len(dims) != 3 or any(d <= 0 for d in dims):
            raise ValueError(f"dims must be three positive integers, got {self.dims!r}")
        data = np.array(self.data, dtype=np.float64).ravel()
        expect = dims[0] * dims[1] * dims[2]
        if data.size != expect:
            raise ValueError(
                f"data has {data.size} values but dims {dims} imply {expect}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume data contains non-finite values")
        data.flags.writeable = False
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @property
    def nx(self) -> int:
        return self.dims[0]

    @property
    def ny(self) -> int:
        return self.dims[1]

    @property
    def nz(self) -> int:
        return self.dims[2]

    @property
    def n_voxels(self) -> int:
        return self.data.size

    @property
    def zyx(self) -> np.ndarray:
        """Read-only view shaped ``(nz, ny, nx)``; its ravel is ``data``."""
        return self.data.reshape(self.nz, self.ny, self.nx)

    @classmethod
    def from_zyx(cls, arr: np.ndarray) -> "Volume":
        """Build a volume from an array shaped ``(nz, ny, nx)``."""
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise ValueError(f"expected a 3-D array, got shape {arr.shape}")
        nz, ny, nx = arr.shape
        return cls((nx, ny, nz), np.ascontiguousarray(arr).ravel())

    def index(self, x: int, y: int, z: int) -> int:
        """Flat index of voxel ``(x, y, z)``."""
        return x + self.nx * (y + self.ny * z)

    def value_at(self, x: int, y: int, z: int) -> float:
        return float(self.data[self.index(x, y, z)])

    def equals(self, other: "Volume") -> bool:
        """Bitwise equality of dims and every voxel."""
        return self.dims == other.dims and np.array_equal(self.data, other.data)

    def __repr__(self):
        return f"Volume(dims={self.dims})"


@dataclass(frozen=True)
class Roi:
    """An axis-aligned box: inclusive ``origin``, positive ``extent``."""

    origin: tuple[int, int, int]
    extent: tuple[int, int, int]

    def __post_init__(self):
        origin = tuple(int(v) for v in self.origin)
        extent = tuple(int(v) for v in self.extent)
        if len(origin) != 3 or any(v < 0 for v in origin):
            raise ValueError(f"origin must be three non-negative integers, got {self.origin!r}")
        if len(extent) != 3 or any(v <= 0 for v in extent):
            raise ValueError(f"extent must be three positive integers, got {self.extent!r}")
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "extent", extent)


def crop(v: Volume, roi: Roi) -> Volume:
    """Extract ``roi`` from ``v`` as a new volume.

    The box must lie fully inside the volume.
    """
    for axis in range(3):
        if roi.origin[axis] + roi.extent[axis] > v.dims[axis]:
            raise ValueError(
                f"roi origin={roi.origin} extent={roi.extent} exceeds dims {v.dims}")
    x0, y0, z0 = roi.origin
    ex, ey, ez = roi.extent
    block = v.zyx[z0:z0 + ez, y0:y0 + ey, x0:x0 + ex]
    return Volume.from_zyx(block.copy())


def _atomic_write_bytes(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via temp file + rename."""
    _atomic_write_bytes(Path(path), text.encode("utf-8"))


def volume_paths(path) -> tuple[Path, Path]:
    """Resolve a volume name (with or without suffix) to (raw, json) paths."""
    p = Path(path)
    if p.suffix in (".raw", ".json"):
        p = p.with_suffix("")
    return p.with_suffix(".raw"), p.with_suffix(".json")


def save_volume(v: Volume, path) -> tuple[Path, Path]:
    """Write ``v`` as ``<path>.raw`` (little-endian float32, x-fastest)
    plus a ``<path>.json`` sidecar with dims and layout.

    Returns the two paths written.  Values outside float32 range are
    refused rather than silently saturated.
    """
    raw_path, json_path = volume_paths(path)
    with np.errstate(over="ignore"):
        payload = v.data.astype("<f4")
    if not np.all(np.isfinite(payload)):
        raise ValueError("volume values exceed 32-bit float range")
    header = {"dims": list(v.dims), **_SIDECAR}
    _atomic_write_bytes(raw_path, payload.tobytes())
    atomic_write_text(json_path, json.dumps(header, indent=2) + "\n")
    return raw_path, json_path


def load_volume(path) -> Volume:
    """Load a volume written by :func:`save_volume`.

    Accepts the bare name or either file's path.  The sidecar is
    validated against the payload length before any data is used.
    """
    raw_path, json_path = volume_paths(path)
    if not json_path.exists():
        raise FileNotFoundError(f"missing volume sidecar {json_path}")
    if not raw_path.exists():
        raise FileNotFoundError(f"missing volume payload {raw_path}")
    try:
        header = json.loads(json_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt volume sidecar {json_path}: {exc}") from exc
    dims = header.get("dims")
    if (not isinstance(dims, list) or len(dims) != 3
            or any(not isinstance(d, int) or d <= 0 for d in dims)):
        raise ValueError(f"corrupt volume sidecar {json_path}: bad dims {dims!r}")
    for key, want in _SIDECAR.items():
        if header.get(key) != want:
            raise ValueError(
                f"unsupported volume layout in {json_path}: {key}={header.get(key)!r}")
    payload = np.fromfile(raw_path, dtype="<f4")
    expect = dims[0] * dims[1] * dims[2]
    if payload.size != expect:
        raise ValueError(
            f"{raw_path} holds {payload.size} values but sidecar dims {dims} imply {expect}")
    if not np.all(np.isfinite(payload)):
        raise ValueError(f"{raw_path} contains non-finite values")
    return Volume(tuple(dims), payload.astype(np.float64))


def save_slice_pgm(v: Volume, z: int, path, window: tuple[float, float]) -> Path:
    """Export slice ``z`` as a 16-bit binary PGM using a linear intensity
    window ``(lo, hi)``; values outside the window clip to black/white.
    """
    if not 0 <= z < v.nz:
        raise ValueError(f"slice {z} out of range for nz={v.nz}")
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise ValueError(f"window must satisfy lo < hi, got {window!r}")
    sl = v.zyx[z]
    scaled = np.clip((sl - lo) / (hi - lo), 0.0, 1.0)
    pixels = np.round(scaled * 65535.0).astype(">u2")
    out = Path(path)
    header = f"P5\n{v.nx} {v.ny}\n65535\n".encode("ascii")
    _atomic_write_bytes(out, header + pixels.tobytes())
    return out


def make_phantom(dims, seed: int, noise_sigma: float) -> tuple[Volume, Volume]:
    """Build a piecewise-constant ellipsoid phantom and a noisy copy.

    A seeded generator places 4-8 overlapping ellipsoids (later ones
    paint over earlier ones) with intensities spanning [-150, 500] on a
    -100 background, then adds Gaussian noise of standard deviation
    ``noise_sigma``.  The same arguments always reproduce the same pair
    bitwise, and the clean volume does not depend on ``noise_sigma``.

    Returns ``(clean, noisy)``.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise ValueError(f"dims must be three positive integers, got {dims!r}")
    if not noise_sigma >= 0.0:
        raise ValueError(f"noise_sigma must be >= 0, got {noise_sigma!r}")
    nx, ny, nz = dims
    rng = np.random.default_rng(int(seed))

    clean = np.full((nz, ny, nx), -100.0)
    zz = np.arange(nz, dtype=np.float64)[:, None, None]
    yy = np.arange(ny, dtype=np.float64)[None, :, None]
    xx = np.arange(nx, dtype=np.float64)[None, None, :]

    n_ellipsoids = int(rng.integers(4, 9))
    levels = rng.permutation(np.linspace(-150.0, 500.0, 14))[:n_ellipsoids]
    lo_c = np.array([0.15 * nx, 0.15 * ny, 0.15 * nz])
    hi_c = np.array([0.85 * nx, 0.85 * ny, 0.85 * nz])
    lo_s = np.array([0.10 * nx, 0.10 * ny, 0.10 * nz])
    hi_s = np.array([0.35 * nx, 0.35 * ny, 0.35 * nz])
    for level in levels:
        cx, cy, cz = rng.uniform(lo_c, hi_c)
        ax, ay, az = np.maximum(rng.uniform(lo_s, hi_s), 1.0)
        inside = (((xx - cx) / ax) ** 2
                  + ((yy - cy) / ay) ** 2
                  + ((zz - cz) / az) ** 2) <= 1.0
        clean[inside] = level

    noise = rng.normal(0.0, noise_sigma, size=clean.shape)
    return Volume.from_zyx(clean), Volume.from_zyx(clean + noise)
