"""Core tensor container, deterministic RNG, bit-exact file I/O and synthetic scenes.

Tensors are plain numpy float32 arrays (row-major). Files use the "ICT"
container: magic ``ICT1``, one dtype byte (0x01 = binary32), one ndim byte,
ndim little-endian uint32 dims, then the row-major little-endian payload.

All golden-path randomness (masks, channel noise, scene content) goes through
:class:`Rng`, a splitmix64 stream with a fixed Box-Muller transform, so that
sequences are reproducible bit-for-bit across platforms and languages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ICT_MAGIC = b"ICT1"
ICT_DTYPE_F32 = 0x01

# splitmix64 constants
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1

MAX_TENSOR_ELEMS = 1 << 31  # dim-overflow guard for file I/O


class TensorFormatError(ValueError):
    """Base class for ICT container violations."""


class MalformedMagicError(TensorFormatError):
    pass


class DimOverflowError(TensorFormatError):
    pass


class TruncatedPayloadError(TensorFormatError):
    pass


class DatasetError(ValueError):
    """Base class for dataset-loading failures."""


class EmptyDatasetError(DatasetError):
    pass


class HeterogeneousDimsError(DatasetError):
    pass


def _mix64(z: int) -> int:
    z = (z ^ (z >> 30)) * _MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _MIX2 & _MASK64
    return z ^ (z >> 31)


def gaussian_from_uniform_pair(u1: float, u2: float) -> float:
    """Fixed Box-Muller transform: sqrt(-2 ln(1-u1)) * cos(2 pi u2).

    ``1-u1`` maps the [0,1) uniform onto (0,1] so the log never sees zero.
    The sine branch is discarded: every Gaussian consumes exactly two
    uniforms, which keeps the stream alignment identical in scalar and
    vectorized paths. Evaluated with numpy so both paths agree to the bit.
    """
    return float(np.sqrt(-2.0 * np.log1p(-np.float64(u1))) * np.cos(2.0 * np.pi * np.float64(u2)))


class Rng:
    """splitmix64 stream; value-identical scalar and vectorized draws."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + _GAMMA) & _MASK64
        return _mix64(self.state)

    def next_uniform(self) -> float:
        return self.next_u64() / 2.0**64

    def next_gaussian(self) -> float:
        u1 = self.next_uniform()
        u2 = self.next_uniform()
        return gaussian_from_uniform_pair(u1, u2)

    def uniforms(self, n: int) -> np.ndarray:
        """n uniforms in [0,1), advancing the stream exactly n steps."""
        if n == 0:
            return np.empty(0, dtype=np.float64)
        steps = np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GAMMA)
        z = np.uint64(self.state) + steps
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self.state = (self.state + n * _GAMMA) & _MASK64
        return z.astype(np.float64) * 2.0**-64

    def gaussians(self, n: int) -> np.ndarray:
        """n standard normals; consumes 2n uniforms (pairs in draw order)."""
        u = self.uniforms(2 * n)
        u1, u2 = u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(2.0 * np.pi * u2)

    def shuffled_indices(self, n: int) -> np.ndarray:
        """Fisher-Yates permutation of range(n) driven by this stream."""
        idx = np.arange(n)
        for i in range(n - 1, 0, -1):
            j = self.next_u64() % (i + 1)
            idx[i], idx[j] = idx[j], idx[i]
        return idx


def write_tensor(t: np.ndarray, path) -> None:
    """Write a float32 tensor in the ICT container (bit-exact round trip)."""
    arr = np.ascontiguousarray(t, dtype=np.float32)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor payload contains non-finite values")
    if any(d <= 0 for d in arr.shape) or arr.size > MAX_TENSOR_ELEMS:
        raise DimOverflowError(f"bad dims {arr.shape}")
    header = ICT_MAGIC + struct.pack("<BB", ICT_DTYPE_F32, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    Path(path).write_bytes(header + arr.astype("<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    """Read an ICT tensor; raises a distinct error per malformation."""
    raw = Path(path).read_bytes()
    if len(raw) < 6 or raw[:4] != ICT_MAGIC or raw[4] != ICT_DTYPE_F32:
        raise MalformedMagicError(f"{path}: not an ICT1/f32 file")
    ndim = raw[5]
    if ndim == 0 or len(raw) < 6 + 4 * ndim:
        raise TruncatedPayloadError(f"{path}: header cut short")
    dims = struct.unpack(f"<{ndim}I", raw[6 : 6 + 4 * ndim])
    n = 1
    for d in dims:
        if d == 0:
            raise DimOverflowError(f"{path}: zero dim in {dims}")
        n *= d
    if n > MAX_TENSOR_ELEMS:
        raise DimOverflowError(f"{path}: {n} elements exceeds guard")
    payload = raw[6 + 4 * ndim :]
    if len(payload) != 4 * n:
        raise TruncatedPayloadError(
            f"{path}: expected {4 * n} payload bytes, got {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def load_dataset(path, layout: str = "spectral") -> list[np.ndarray]:
    """Load all ICT cubes in a directory; homogeneous dims, clipped to [0,1]."""
    if layout not in ("spectral", "video"):
        raise ValueError(f"unknown layout {layout!r}")
    files = sorted(Path(path).glob("*.ict"))
    if not files:
        raise EmptyDatasetError(f"no .ict files under {path}")
    cubes = []
    for f in files:
        cube = read_tensor(f)
        if cube.ndim != 3:
            raise HeterogeneousDimsError(f"{f}: expected 3-D cube, got {cube.shape}")
        if cubes and cube.shape != cubes[0].shape:
            raise HeterogeneousDimsError(
                f"{f}: dims {cube.shape} != {cubes[0].shape} of first file"
            )
        cubes.append(np.clip(cube, 0.0, 1.0))
    return cubes


@dataclass
class SceneSpec:
    """Synthetic scene description for desk-scale experiments.

    ``palette`` optionally pins per-blob band signatures (spectral-blobs) or
    per-shape motion vectors (moving-shapes); geometry still comes from the
    seed either way.
    """

    kind: str  # "spectral-blobs" | "moving-shapes"
    height: int
    width: int
    bands_or_frames: int
    seed: int = 0
    palette: list | None = field(default=None)


def generate_scene(spec: SceneSpec) -> np.ndarray:
    """Deterministic cube in [0,1] of shape (H, W, bands_or_frames)."""
    if spec.height < 8 or spec.width < 8 or spec.bands_or_frames < 1:
        raise ValueError(f"scene dims too small: {spec.height}x{spec.width}x{spec.bands_or_frames}")
    if spec.kind == "spectral-blobs":
        return _spectral_blobs(spec)
    if spec.kind == "moving-shapes":
        return _moving_shapes(spec)
    raise ValueError(f"unknown scene kind {spec.kind!r}")


def _spectral_blobs(spec: SceneSpec) -> np.ndarray:
    h, w, c = spec.height, spec.width, spec.bands_or_frames
    rng = Rng(spec.seed)
    n_blobs = len(spec.palette) if spec.palette else 2 + int(rng.next_u64() % 4)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    band = np.arange(c, dtype=np.float64)
    cube = np.zeros((h, w, c), dtype=np.float64)
    for i in range(n_blobs):
        cy = (0.15 + 0.7 * rng.next_uniform()) * h
        cx = (0.15 + 0.7 * rng.next_uniform()) * w
        sig = (0.10 + 0.15 * rng.next_uniform()) * min(h, w)
        amp = 0.5 + 0.5 * rng.next_uniform()
        if spec.palette:
            signature = np.asarray(spec.palette[i], dtype=np.float64)
            if signature.shape != (c,) or np.any(signature < 0):
                raise ValueError("palette signatures must be nonnegative, one per band")
        else:
            c0 = rng.next_uniform() * (c - 1) if c > 1 else 0.0
            cw = (0.15 + 0.35 * rng.next_uniform()) * max(c, 2)
            signature = np.exp(-0.5 * ((band - c0) / cw) ** 2)
        spot = amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * sig**2))
        cube += spot[:, :, None] * signature[None, None, :]
    return np.clip(cube, 0.0, 1.0).astype(np.float32)


def _moving_shapes(spec: SceneSpec) -> np.ndarray:
    h, w, b = spec.height, spec.width, spec.bands_or_frames
    rng = Rng(spec.seed)
    n_shapes = len(spec.palette) if spec.palette else 2 + int(rng.next_u64() % 3)
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    cube = np.zeros((h, w, b), dtype=np.float64)
    for i in range(n_shapes):
        cy = (0.2 + 0.6 * rng.next_uniform()) * h
        cx = (0.2 + 0.6 * rng.next_uniform()) * w
        radius = (0.08 + 0.10 * rng.next_uniform()) * min(h, w)
        amp = 0.5 + 0.5 * rng.next_uniform()
        if spec.palette:
            vy, vx = spec.palette[i]
        else:
            vy = -3.0 + 6.0 * rng.next_uniform()
            vx = -3.0 + 6.0 * rng.next_uniform()
        vy = float(np.clip(vy, -3.0, 3.0))
        vx = float(np.clip(vx, -3.0, 3.0))
        for t in range(b):
            dist = np.sqrt((yy - (cy + vy * t)) ** 2 + (xx - (cx + vx * t)) ** 2)
            # 1 px anti-aliased rim so recon targets are not knife-edged
            cube[:, :, t] += amp * np.clip(radius + 0.5 - dist, 0.0, 1.0)
    return np.clip(cube, 0.0, 1.0).astype(np.float32)
