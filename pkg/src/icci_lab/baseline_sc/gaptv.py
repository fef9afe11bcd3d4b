"""Classical snapshot reconstruction: generalized alternating projection with
anisotropic total-variation denoising.

The projection step x + H^T (H H^T)^-1 (y - Hx) is exact because every cube
voxel lands on exactly one measurement pixel, which makes H H^T diagonal with
entries given by the per-pixel sum of squared mask values.
"""

from __future__ import annotations

import numpy as np

from ..sensing import SensingModel, adjoint, forward, mask_power_map


class SingularProjectionError(ValueError):
    pass


def tv_denoise_aniso(img: np.ndarray, weight: float, iters: int = 20) -> np.ndarray:
    """Proximal anisotropic TV step on a 2-D image (dual gradient projection)."""
    if weight <= 0.0:
        return img.copy()
    p1 = np.zeros_like(img)
    p2 = np.zeros_like(img)
    tau = 0.25
    out = img
    for _ in range(iters):
        # gradient of the current primal estimate
        g1 = np.diff(out, axis=0, append=out[-1:, :])
        g2 = np.diff(out, axis=1, append=out[:, -1:])
        p1 = np.clip(p1 + (tau / weight) * g1, -1.0, 1.0)
        p2 = np.clip(p2 + (tau / weight) * g2, -1.0, 1.0)
        div = np.zeros_like(img)
        div[0, :] += p1[0, :]
        div[1:, :] += p1[1:, :] - p1[:-1, :]
        div[:, 0] += p2[:, 0]
        div[:, 1:] += p2[:, 1:] - p2[:, :-1]
        out = img + weight * div
    return out


def _denoise_cube(cube: np.ndarray, weight: float, iters: int) -> np.ndarray:
    out = np.empty_like(cube)
    for c in range(cube.shape[2]):
        out[:, :, c] = tv_denoise_aniso(cube[:, :, c], weight, iters)
    return out


def adjoint_baseline(meas_data: np.ndarray, model: SensingModel, cube_shape) -> np.ndarray:
    """Least-norm estimate H^T (H H^T)^-1 y, clipped to [0,1]."""
    msum = mask_power_map(model, cube_shape)
    if not np.any(msum > 0.0):
        raise SingularProjectionError("all-zero mask gives a singular projection")
    safe = np.where(msum > 0.0, msum, 1.0)
    est = adjoint(np.asarray(meas_data, dtype=np.float64) / safe, model, cube_shape)
    return np.clip(est, 0.0, 1.0).astype(np.float32)


def gaptv_reconstruct(meas_data: np.ndarray, model: SensingModel, cube_shape,
                      iters: int = 100, tv_weight: float = 0.08,
                      tv_iters: int = 20, return_history: bool = False):
    """GAP-TV cube estimate; optionally also the data-fidelity residual history.

    The TV weight decays geometrically and each iterate is safeguarded: if a
    denoising step would raise the residual ||y - Hx||, the weight is halved
    for that iterate (down to plain projection), so the residual sequence is
    non-increasing by construction.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    y = np.asarray(meas_data, dtype=np.float64)
    msum = mask_power_map(model, cube_shape)
    if not np.any(msum > 0.0):
        raise SingularProjectionError("all-zero mask gives a singular projection")
    safe = np.where(msum > 0.0, msum, 1.0)

    def residual(x):
        return float(np.linalg.norm(y - forward(x, model).data.astype(np.float64)))

    def project(x):
        r = y - forward(x, model).data.astype(np.float64)
        return x + adjoint(r / safe, model, cube_shape).astype(np.float64)

    x = adjoint(y / safe, model, cube_shape).astype(np.float64)
    residuals = []
    prev = np.inf
    weight = tv_weight
    for _ in range(iters):
        v = project(x)
        cand, new_res = v, residual(v)
        w = weight
        for _ in range(8):
            trial = _denoise_cube(v, w, tv_iters)
            trial_res = residual(trial)
            if trial_res <= prev:
                cand, new_res = trial, trial_res
                break
            w *= 0.5
        x, prev = cand, new_res
        residuals.append(new_res)
        weight *= 0.97
    out = np.clip(x, 0.0, 1.0).astype(np.float32)
    if return_history:
        return out, residuals
    return out
