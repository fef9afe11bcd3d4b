"""Digital modulation with fixed Gray mappings and exact max-log LLRs.

Bit groups are MSB-first. The mapping tables (before unit-power scaling):

  pam2/bpsk  0 -> -1, 1 -> +1                      (bpsk on the complex rail)
  pam4       00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3             scale 1/sqrt(5)
  pam8       000,001,011,010,110,111,101,100 -> -7..+7 (Gray)   scale 1/sqrt(21)
  qpsk       bit0 -> I, bit1 -> Q, 0 -> -1, 1 -> +1             scale 1/sqrt(2)
  qam16      (b0 b1) -> I, (b2 b3) -> Q, per-axis PAM4 table    scale 1/sqrt(10)

LLR sign convention: positive LLR favours bit 0 (matches the FEC decoder).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channel import SymbolStream

_PAM4_GRAY = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}
_PAM8_GRAY = {
    (0, 0, 0): -7.0, (0, 0, 1): -5.0, (0, 1, 1): -3.0, (0, 1, 0): -1.0,
    (1, 1, 0): 1.0, (1, 1, 1): 3.0, (1, 0, 1): 5.0, (1, 0, 0): 7.0,
}

_DEMOD_CHUNK = 1 << 16


def _bits_to_index(table: dict) -> np.ndarray:
    """Constellation point per integer value of the MSB-first bit group."""
    n_bits = len(next(iter(table)))
    out = np.zeros(2**n_bits, dtype=np.complex128)
    for bits, level in table.items():
        idx = 0
        for b in bits:
            idx = (idx << 1) | b
        out[idx] = level
    return out


def _build_format(fmt: str):
    """Returns (points-by-index, bits_per_symbol, domain)."""
    if fmt in ("pam2", "bpsk"):
        pts = np.array([-1.0, 1.0], dtype=np.complex128)
        return pts, 1, ("real" if fmt == "pam2" else "complex")
    if fmt == "pam4":
        return _bits_to_index(_PAM4_GRAY) / np.sqrt(5.0), 2, "real"
    if fmt == "pam8":
        return _bits_to_index(_PAM8_GRAY) / np.sqrt(21.0), 3, "real"
    if fmt == "qpsk":
        axis = np.array([-1.0, 1.0])
        pts = (axis[:, None] + 1j * axis[None, :]).ravel() / np.sqrt(2.0)
        return pts, 2, "complex"
    if fmt == "qam16":
        axis = _bits_to_index(_PAM4_GRAY).real
        pts = (axis[:, None] + 1j * axis[None, :]).ravel() / np.sqrt(10.0)
        return pts, 4, "complex"
    raise ValueError(f"unknown modulation format {fmt!r}")


@dataclass
class ModConfig:
    format: str = "pam4"

    def __post_init__(self):
        self.points, self.bits_per_symbol, self.domain = _build_format(self.format)
        assert abs(np.mean(np.abs(self.points) ** 2) - 1.0) < 1e-12

    def bit_groups(self) -> np.ndarray:
        """(M, bps) table of the bit pattern for each constellation index."""
        m = self.points.size
        bps = self.bits_per_symbol
        return ((np.arange(m)[:, None] >> np.arange(bps - 1, -1, -1)) & 1).astype(np.uint8)


def modulate(bits: np.ndarray, cfg: ModConfig) -> SymbolStream:
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    bps = cfg.bits_per_symbol
    if bits.size % bps != 0:
        raise ValueError(f"{bits.size} bits is not a multiple of {bps} bits/symbol")
    groups = bits.reshape(-1, bps)
    idx = np.zeros(groups.shape[0], dtype=np.int64)
    for i in range(bps):
        idx = (idx << 1) | groups[:, i]
    pts = cfg.points[idx]
    if cfg.domain == "real":
        return SymbolStream(pts.real, domain="real")
    return SymbolStream(pts, domain="complex")


def demodulate(s: SymbolStream, cfg: ModConfig, noise_var) -> tuple[np.ndarray, np.ndarray]:
    """Exact max-log LLRs and hard decisions.

    ``noise_var`` is the total per-symbol noise power (scalar or per-symbol
    array); per-dimension variance is halved for complex formats.
    """
    y = s.symbols.astype(np.complex128)
    noise_var = np.broadcast_to(np.asarray(noise_var, dtype=np.float64), y.shape).copy()
    noise_var = np.maximum(noise_var, 1e-30)
    per_dim = noise_var / 2.0 if cfg.domain == "complex" else noise_var
    bps = cfg.bits_per_symbol
    bit_is_one = cfg.bit_groups().astype(bool)  # (M, bps)
    llrs = np.empty((y.size, bps), dtype=np.float64)
    hard = np.empty((y.size, bps), dtype=np.uint8)
    for start in range(0, y.size, _DEMOD_CHUNK):
        sl = slice(start, min(start + _DEMOD_CHUNK, y.size))
        d2 = np.abs(y[sl, None] - cfg.points[None, :]) ** 2  # (chunk, M)
        nearest = np.argmin(d2, axis=1)
        hard[sl] = cfg.bit_groups()[nearest]
        for b in range(bps):
            d_one = np.min(d2[:, bit_is_one[:, b]], axis=1)
            d_zero = np.min(d2[:, ~bit_is_one[:, b]], axis=1)
            llrs[sl, b] = (d_one - d_zero) / (2.0 * per_dim[sl])
    return llrs.ravel(), hard.ravel()


def dump_constellations() -> str:
    """Human-readable mapping tables for cross-checking."""
    lines = []
    for fmt in ("pam2", "pam4", "pam8", "bpsk", "qpsk", "qam16"):
        cfg = ModConfig(fmt)
        lines.append(f"{fmt} ({cfg.bits_per_symbol} bits/symbol, {cfg.domain})")
        for bits, point in zip(cfg.bit_groups(), cfg.points):
            label = "".join(str(b) for b in bits)
            if cfg.domain == "real":
                lines.append(f"  {label} -> {point.real:+.6f}")
            else:
                lines.append(f"  {label} -> {point.real:+.6f}{point.imag:+.6f}j")
    return "\n".join(lines)
