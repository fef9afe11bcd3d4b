"""Quality and rate metrics: PSNR, windowed SSIM, spectral error, DCR, BER."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import convolve2d

PSNR_CAP_DB = 100.0  # sentinel for zero MSE
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricsRecord:
    """One evaluation row for a (scheme, SNR) probe point."""

    scheme_id: str
    snr_db: float | None
    dcr: float
    psnr_db: float
    ssim: float
    se_per_probe: dict = field(default_factory=dict)
    ber: float | None = None
    timings_ms: dict = field(default_factory=dict)

    def __post_init__(self):
        if not -1.0 <= self.ssim <= 1.0:
            raise ValueError(f"ssim {self.ssim} outside [-1, 1]")
        if self.dcr <= 0.0:
            raise ValueError("dcr must be positive")
        if self.ber is not None and not 0.0 <= self.ber <= 1.0:
            raise ValueError("ber outside [0, 1]")


def _check_same_dims(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape} vs {b.shape}")


def mse(estimate: np.ndarray, target: np.ndarray) -> float:
    _check_same_dims(np.asarray(estimate), np.asarray(target))
    d = np.asarray(estimate, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.mean(d * d))


def psnr_from_mse(err: float, peak: float = 1.0) -> float:
    if err == 0.0:
        return PSNR_CAP_DB
    # difference of logs keeps round decades exact (mse 0.01 -> 20 dB)
    return float(10.0 * np.log10(peak * peak) - 10.0 * np.log10(err))


def psnr(estimate: np.ndarray, target: np.ndarray, peak: float = 1.0) -> float:
    return psnr_from_mse(mse(estimate, target), peak)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-0.5 * (ax / sigma) ** 2)
    w = np.outer(g, g)
    return w / w.sum()


def _ssim_slice(x: np.ndarray, y: np.ndarray, peak: float) -> float:
    win = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    var_x = convolve2d(x * x, win, mode="valid") - mu_x * mu_x
    var_y = convolve2d(y * y, win, mode="valid") - mu_y * mu_y
    cov = convolve2d(x * y, win, mode="valid") - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(estimate: np.ndarray, target: np.ndarray, peak: float = 1.0) -> float:
    """Windowed SSIM (11x11 Gaussian, sigma 1.5), averaged over windows and slices."""
    estimate = np.asarray(estimate, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_same_dims(estimate, target)
    if estimate.ndim == 2:
        estimate = estimate[:, :, None]
        target = target[:, :, None]
    if estimate.ndim != 3:
        raise ValueError(f"ssim expects 2-D or 3-D input, got {estimate.shape}")
    h, w, _ = estimate.shape
    if h < SSIM_WINDOW or w < SSIM_WINDOW:
        raise ValueError(f"dims {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    vals = [_ssim_slice(estimate[:, :, i], target[:, :, i], peak)
            for i in range(estimate.shape[2])]
    return float(np.mean(vals))


def spectral_error(recovered: np.ndarray, reference: np.ndarray) -> float:
    """Sum (not mean) of squared differences between two spectra."""
    recovered = np.asarray(recovered, dtype=np.float64).ravel()
    reference = np.asarray(reference, dtype=np.float64).ravel()
    if recovered.shape != reference.shape:
        raise ValueError(f"length mismatch: {recovered.size} vs {reference.size}")
    d = recovered - reference
    return float(np.sum(d * d))


def probe_spectrum(cube: np.ndarray, region) -> np.ndarray:
    """Mean spectrum over a rectangular region (y0, x0, y1, x1), end-exclusive."""
    y0, x0, y1, x1 = region
    if not (0 <= y0 < y1 <= cube.shape[0] and 0 <= x0 < x1 <= cube.shape[1]):
        raise ValueError(f"probe region {region} outside cube {cube.shape}")
    return np.asarray(cube[y0:y1, x0:x1, :], dtype=np.float64).mean(axis=(0, 1))


def dcr(n_symbols: int, cube_shape) -> float:
    """Symbols per voxel: L / (H*W*C)."""
    if n_symbols < 1:
        raise ValueError("symbol count must be >= 1")
    h, w, c = cube_shape
    return n_symbols / float(h * w * c)


def ber(sent_bits: np.ndarray, received_bits: np.ndarray) -> float:
    sent_bits = np.asarray(sent_bits).ravel()
    received_bits = np.asarray(received_bits).ravel()
    if sent_bits.size != received_bits.size:
        raise ValueError(f"length mismatch: {sent_bits.size} vs {received_bits.size}")
    return float(np.mean(sent_bits != received_bits))
