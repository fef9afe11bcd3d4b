"""Discretized optical encoding: coded masks, CASSI and CACTI forward models,
their adjoints, and the explicit sparse sensing matrix for y = Hx + g.

Vectorization convention used throughout: ``vec(cube)`` is the row-major
flattening of an (H, W, C) array and ``vec(measurement)`` of an (H, W_m)
array, with W_m = W + (C-1)*dispersion_step for CASSI and W_m = W for CACTI.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml
from scipy import sparse

from .tensors_io import Rng, read_tensor, write_tensor

MATRIX_NNZ_GUARD = 1 << 22


class DimMismatchError(ValueError):
    pass


class SizeGuardError(ValueError):
    pass


@dataclass
class Mask:
    pattern: np.ndarray  # (H, W) spectral base mask or (H, W, B) per-frame masks
    kind: str = "binary"  # "binary" | "gray"

    def __post_init__(self):
        self.pattern = np.asarray(self.pattern, dtype=np.float32)
        if self.pattern.ndim not in (2, 3):
            raise ValueError(f"mask must be 2-D or 3-D, got {self.pattern.shape}")
        if self.kind == "binary":
            if not np.all((self.pattern == 0.0) | (self.pattern == 1.0)):
                raise ValueError("binary mask entries must be in {0, 1}")
        elif self.kind == "gray":
            if self.pattern.min() < 0.0 or self.pattern.max() > 1.0:
                raise ValueError("gray mask entries must lie in [0, 1]")
        else:
            raise ValueError(f"unknown mask kind {self.kind!r}")


@dataclass
class SensingModel:
    kind: str  # "cassi" | "cacti"
    mask: Mask
    dispersion_step: int = 1  # pixels per band, cassi only
    noise_std: float = 0.0  # sigma of the additive sensor noise g

    def __post_init__(self):
        if self.kind not in ("cassi", "cacti"):
            raise ValueError(f"unknown sensing kind {self.kind!r}")
        if self.dispersion_step < 0:
            raise ValueError("dispersion_step must be >= 0")
        if self.noise_std < 0.0:
            raise ValueError("noise_std must be >= 0")
        if self.kind == "cassi" and self.mask.pattern.ndim != 2:
            raise ValueError("cassi takes a 2-D base mask")
        if self.kind == "cacti" and self.mask.pattern.ndim != 3:
            raise ValueError("cacti takes one mask slice per frame")

    def measurement_width(self, cube_shape) -> int:
        h, w, c = cube_shape
        if self.kind == "cassi":
            return w + (c - 1) * self.dispersion_step
        return w


@dataclass
class Measurement:
    data: np.ndarray  # (H, W_m)
    model: SensingModel


def generate_mask(height: int, width: int, slices: int | None, p: float, seed: int,
                  kind: str = "binary") -> Mask:
    """Bernoulli(p) mask via the mandated rng; draw < p maps to 1.

    ``kind`` also accepts "ones"/"zeros" for debugging and "gray" for a
    uniform [0,1) graylevel pattern. ``slices=None`` gives a 2-D base mask.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    shape = (height, width) if slices is None else (height, width, slices)
    n = int(np.prod(shape))
    if kind == "ones":
        return Mask(np.ones(shape, dtype=np.float32))
    if kind == "zeros":
        return Mask(np.zeros(shape, dtype=np.float32))
    draws = Rng(seed).uniforms(n).reshape(shape)
    if kind == "gray":
        return Mask(draws.astype(np.float32), kind="gray")
    if kind != "binary":
        raise ValueError(f"unknown mask kind {kind!r}")
    return Mask((draws < p).astype(np.float32))


def _check_cube(cube: np.ndarray, model: SensingModel) -> np.ndarray:
    cube = np.asarray(cube, dtype=np.float64)
    if cube.ndim != 3:
        raise DimMismatchError(f"expected 3-D cube, got {cube.shape}")
    h, w, c = cube.shape
    pat = model.mask.pattern
    if model.kind == "cassi" and pat.shape != (h, w):
        raise DimMismatchError(f"mask {pat.shape} does not match cube {cube.shape}")
    if model.kind == "cacti" and pat.shape != (h, w, c):
        raise DimMismatchError(f"per-frame masks {pat.shape} do not match video {cube.shape}")
    return cube


def _sensor_noise(shape, sigma: float, rng: Rng | None) -> np.ndarray:
    if sigma == 0.0 or rng is None:
        return np.zeros(shape)
    return rng.gaussians(int(np.prod(shape))).reshape(shape) * sigma


def cassi_forward(cube: np.ndarray, model: SensingModel, rng: Rng | None = None) -> Measurement:
    """Mask-modulate each band, shift it by band*dispersion_step, accumulate."""
    if model.kind != "cassi":
        raise ValueError("model kind is not cassi")
    cube = _check_cube(cube, model)
    h, w, c = cube.shape
    d = model.dispersion_step
    canvas = np.zeros((h, w + (c - 1) * d))
    pat = model.mask.pattern.astype(np.float64)
    for band in range(c):
        canvas[:, band * d : band * d + w] += cube[:, :, band] * pat
    canvas += _sensor_noise(canvas.shape, model.noise_std, rng)
    return Measurement(canvas.astype(np.float32), model)


def cacti_forward(video: np.ndarray, model: SensingModel, rng: Rng | None = None) -> Measurement:
    """Sum of per-frame mask-modulated frames."""
    if model.kind != "cacti":
        raise ValueError("model kind is not cacti")
    video = _check_cube(video, model)
    canvas = np.sum(video * model.mask.pattern.astype(np.float64), axis=2)
    canvas += _sensor_noise(canvas.shape, model.noise_std, rng)
    return Measurement(canvas.astype(np.float32), model)


def forward(cube: np.ndarray, model: SensingModel, rng: Rng | None = None) -> Measurement:
    if model.kind == "cassi":
        return cassi_forward(cube, model, rng)
    return cacti_forward(cube, model, rng)


def adjoint(meas_data: np.ndarray, model: SensingModel, cube_shape) -> np.ndarray:
    """H^T y as an (H, W, C) cube."""
    h, w, c = cube_shape
    y = np.asarray(meas_data, dtype=np.float64)
    pat = model.mask.pattern.astype(np.float64)
    if model.kind == "cacti":
        return (y[:, :, None] * pat).astype(np.float32)
    d = model.dispersion_step
    out = np.empty((h, w, c))
    for band in range(c):
        out[:, :, band] = y[:, band * d : band * d + w] * pat
    return out.astype(np.float32)


def build_sensing_matrix(model: SensingModel, cube_shape) -> sparse.csr_matrix:
    """Explicit H with vec(forward(x)) = H @ vec(x); one nonzero per column."""
    h, w, c = cube_shape
    if h * w * c > MATRIX_NNZ_GUARD:
        raise SizeGuardError(f"{h * w * c} potential nonzeros exceeds {MATRIX_NNZ_GUARD}")
    w_m = model.measurement_width(cube_shape)
    pat = model.mask.pattern.astype(np.float64)
    yy, xx, cc = np.meshgrid(np.arange(h), np.arange(w), np.arange(c), indexing="ij")
    cols = (yy * w + xx) * c + cc
    if model.kind == "cassi":
        rows = yy * w_m + xx + cc * model.dispersion_step
        vals = np.broadcast_to(pat[:, :, None], (h, w, c))
    else:
        rows = yy * w_m + xx
        vals = pat
    mat = sparse.csr_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(h * w_m, h * w * c)
    )
    mat.eliminate_zeros()
    return mat


def mask_power_map(model: SensingModel, cube_shape) -> np.ndarray:
    """diag(H H^T) as an (H, W_m) map: per-pixel sum of squared mask entries."""
    squared = SensingModel(model.kind, Mask(model.mask.pattern**2, kind="gray"),
                           model.dispersion_step, 0.0)
    ones = np.ones(cube_shape)
    return forward(ones, squared).data.astype(np.float64)


def save_sensing_model(model: SensingModel, path, mask_path=None, seed: int | None = None) -> None:
    """Spec + mask tensor; mask lands next to the spec unless told otherwise."""
    path = Path(path)
    if mask_path is None:
        mask_path = path.with_suffix(".mask.ict")
    mask_path = Path(mask_path)
    write_tensor(model.mask.pattern, mask_path)
    stored = mask_path.name if mask_path.parent == path.parent else str(mask_path)
    doc = {
        "kind": model.kind,
        "dispersion_step": model.dispersion_step,
        "noise_std": float(model.noise_std),
        "mask_path": stored,
        "mask_kind": model.mask.kind,
        "seed": seed,
    }
    path.write_text(yaml.safe_dump(doc, sort_keys=False))


def load_sensing_model(path) -> SensingModel:
    doc = yaml.safe_load(Path(path).read_text())
    mask_path = Path(doc["mask_path"])
    if not mask_path.is_absolute():
        mask_path = Path(path).parent / mask_path
    pattern = read_tensor(mask_path)
    return SensingModel(
        kind=doc["kind"],
        mask=Mask(pattern, kind=doc.get("mask_kind", "binary")),
        dispersion_step=int(doc.get("dispersion_step", 1)),
        noise_std=float(doc.get("noise_std", 0.0)),
    )
