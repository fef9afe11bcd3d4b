"""Communication channel simulation: power normalization, AWGN, slow fading,
and a dispersive/nonlinear ISI surrogate.

Conventions, fixed for every consumer of this module:
  * streams are unit-average-power after :func:`normalize_power`;
  * ``snr_db`` is signal power over *total* noise power per symbol, so the
    per-component noise variance is ``10**(-snr/10)`` for real streams and
    half of that per quadrature for complex streams;
  * ``snr_db=None`` is the noiseless sentinel;
  * all randomness comes from the caller's :class:`~icci_lab.tensors_io.Rng`,
    gains drawn before noise, noise drawn real-then-imaginary per symbol.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .tensors_io import Rng

FADING_GAIN_FLOOR = 0.05  # |h| clip keeping h*s+n identifiable


@dataclass
class SymbolStream:
    """1-D discrete-time analog symbol sequence (the wire format)."""

    symbols: np.ndarray
    domain: str = "real"  # "real" | "complex"
    norm_scale: float | None = None  # factor divided out by normalize_power

    def __post_init__(self):
        self.symbols = np.asarray(self.symbols)
        if self.symbols.ndim != 1 or self.symbols.size == 0:
            raise ValueError("symbol stream must be 1-D and nonempty")
        if self.domain == "complex":
            self.symbols = self.symbols.astype(np.complex128)
        elif self.domain == "real":
            if np.iscomplexobj(self.symbols):
                raise ValueError("real stream with complex payload")
            self.symbols = self.symbols.astype(np.float64)
        else:
            raise ValueError(f"unknown domain {self.domain!r}")

    def __len__(self):
        return self.symbols.size

    def power(self) -> float:
        return float(np.mean(np.abs(self.symbols) ** 2))


@dataclass
class ChannelSpec:
    family: str = "awgn"  # awgn | slow-fading | isi
    snr_db: float | None = 20.0  # None = noiseless
    fading_mu: float = 1.0
    fading_sigma: float = 0.3
    block_len: int = 64
    isi_taps: tuple = (1.0,)
    isi_gamma: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.family not in ("awgn", "slow-fading", "isi"):
            raise ValueError(f"unknown channel family {self.family!r}")
        if self.snr_db is not None and not np.isfinite(self.snr_db):
            raise ValueError("snr_db must be finite or None")
        if self.block_len < 1:
            raise ValueError("block_len must be >= 1")
        self.isi_taps = tuple(float(t) for t in self.isi_taps)
        if self.family == "isi" and not self.isi_taps:
            raise ValueError("isi channel needs a nonempty tap list")


def save_channel_spec(spec: ChannelSpec, path) -> None:
    doc = {
        "family": spec.family,
        "snr_db": "noiseless" if spec.snr_db is None else float(spec.snr_db),
        "fading_mu": spec.fading_mu,
        "fading_sigma": spec.fading_sigma,
        "block_len": spec.block_len,
        "isi_taps": list(spec.isi_taps),
        "isi_gamma": spec.isi_gamma,
        "seed": spec.seed,
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_channel_spec(path) -> ChannelSpec:
    doc = yaml.safe_load(Path(path).read_text())
    snr = doc.get("snr_db", 20.0)
    if isinstance(snr, str):
        if snr != "noiseless":
            raise ValueError(f"bad snr_db value {snr!r}")
        snr = None
    return ChannelSpec(
        family=doc.get("family", "awgn"),
        snr_db=snr,
        fading_mu=float(doc.get("fading_mu", 1.0)),
        fading_sigma=float(doc.get("fading_sigma", 0.3)),
        block_len=int(doc.get("block_len", 64)),
        isi_taps=tuple(doc.get("isi_taps", [1.0])),
        isi_gamma=float(doc.get("isi_gamma", 0.0)),
        seed=int(doc.get("seed", 0)),
    )


def noise_sigma(snr_db: float | None) -> float:
    """Total per-symbol noise std for a unit-power stream."""
    if snr_db is None:
        return 0.0
    return float(10.0 ** (-snr_db / 20.0))


def normalize_power(s: SymbolStream) -> SymbolStream:
    """Scale to mean(|s|^2) = 1, recording the factor for exact inversion."""
    scale = np.sqrt(s.power())
    if scale == 0.0:
        raise ValueError("cannot power-normalize an all-zero stream")
    return SymbolStream(s.symbols / scale, domain=s.domain, norm_scale=float(scale))


def denormalize_power(s: SymbolStream) -> SymbolStream:
    """Invert normalize_power using the recorded factor."""
    if s.norm_scale is None:
        raise ValueError("stream carries no recorded normalization factor")
    return SymbolStream(s.symbols * s.norm_scale, domain=s.domain)


def gaussian_noise(n: int, sigma: float, domain: str, rng: Rng) -> np.ndarray:
    """Noise vector with total power sigma^2 per symbol (split over quadratures)."""
    if sigma == 0.0:
        return np.zeros(n, dtype=np.complex128 if domain == "complex" else np.float64)
    if domain == "complex":
        g = rng.gaussians(2 * n)
        return (g[0::2] + 1j * g[1::2]) * (sigma / np.sqrt(2.0))
    return rng.gaussians(n) * sigma


def apply_awgn(s: SymbolStream, snr_db: float | None, rng: Rng) -> SymbolStream:
    sigma = noise_sigma(snr_db)
    if sigma == 0.0:
        return SymbolStream(s.symbols.copy(), domain=s.domain, norm_scale=s.norm_scale)
    n = gaussian_noise(len(s), sigma, s.domain, rng)
    return SymbolStream(s.symbols + n, domain=s.domain, norm_scale=s.norm_scale)


def draw_fading_gains(n_blocks: int, spec: ChannelSpec, rng: Rng) -> np.ndarray:
    h = spec.fading_mu + spec.fading_sigma * rng.gaussians(n_blocks)
    small = np.abs(h) < FADING_GAIN_FLOOR
    h[small] = np.where(h[small] >= 0.0, FADING_GAIN_FLOOR, -FADING_GAIN_FLOOR)
    return h


def apply_slow_fading(s: SymbolStream, spec: ChannelSpec, rng: Rng):
    """Block-constant gain h ~ N(mu, sigma^2) times s, plus AWGN.

    Returns (received, gains); gains are one per block so a receiver granted
    channel-state information can undo them.
    """
    n_blocks = -(-len(s) // spec.block_len)
    gains = draw_fading_gains(n_blocks, spec, rng)
    per_symbol = np.repeat(gains, spec.block_len)[: len(s)]
    faded = SymbolStream(s.symbols * per_symbol, domain=s.domain, norm_scale=s.norm_scale)
    return apply_awgn(faded, spec.snr_db, rng), gains


def apply_isi(s: SymbolStream, spec: ChannelSpec, rng: Rng) -> SymbolStream:
    """Causal FIR taps, memoryless cubic y = u + gamma*u^3, then AWGN."""
    if s.domain != "real":
        raise ValueError("ISI surrogate is defined for real streams only")
    u = np.convolve(s.symbols, np.asarray(spec.isi_taps, dtype=np.float64))[: len(s)]
    y = u + spec.isi_gamma * u**3
    return apply_awgn(SymbolStream(y, domain="real", norm_scale=s.norm_scale), spec.snr_db, rng)


def transmit(s: SymbolStream, spec: ChannelSpec, rng: Rng | None = None):
    """Dispatch on the channel family. Returns (received, gains-or-None)."""
    if rng is None:
        rng = Rng(spec.seed)
    if spec.family == "awgn":
        return apply_awgn(s, spec.snr_db, rng), None
    if spec.family == "slow-fading":
        return apply_slow_fading(s, spec, rng)
    return apply_isi(s, spec, rng), None


def empirical_snr_db(sent: np.ndarray, received: np.ndarray) -> float:
    """Measured signal-to-noise power ratio in dB."""
    p_sig = np.mean(np.abs(sent) ** 2)
    p_noise = np.mean(np.abs(received - sent) ** 2)
    return float(10.0 * np.log10(p_sig / p_noise))
