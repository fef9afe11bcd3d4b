"""Lossy transform codec for 2-D measurements: 8x8 blockwise orthonormal DCT,
uniform dead-zone quantization, zig-zag scan, run-length + Exp-Golomb packing.

The header stores the measurement dims and value range; a decoder facing a
corrupted stream raises :class:`CodecError` instead of fabricating data, so
callers can fall back explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dctn, idctn

from .bits import BitReader, BitReaderError, BitStream, BitWriter

MAX_CODED_DIM = 1 << 14


class CodecError(ValueError):
    pass


@dataclass
class CodecConfig:
    quality: float = 0.05  # quantization step q, raw coefficient scale
    block_size: int = 8

    def __post_init__(self):
        if self.quality <= 0.0:
            raise ValueError("quantization step must be positive")
        if self.block_size != 8:
            raise ValueError("only the 8x8 block size is supported")


def _zigzag_order(n: int = 8) -> np.ndarray:
    idx = sorted(
        ((i, j) for i in range(n) for j in range(n)),
        key=lambda t: (t[0] + t[1], t[1] if (t[0] + t[1]) % 2 else t[0]),
    )
    return np.array([i * n + j for i, j in idx])

_ZIGZAG = _zigzag_order()


def _float_bits(x: float) -> int:
    return int(np.frombuffer(np.float32(x).tobytes(), dtype=np.uint32)[0])


def _bits_float(u: int) -> float:
    return float(np.frombuffer(np.uint32(u).tobytes(), dtype=np.float32)[0])


def codec_encode(measurement: np.ndarray, cfg: CodecConfig) -> BitStream:
    m = np.asarray(measurement, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"codec takes a 2-D measurement, got {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("measurement contains non-finite values")
    h, w = m.shape
    if h > MAX_CODED_DIM or w > MAX_CODED_DIM:
        raise ValueError(f"measurement {m.shape} too large for the codec header")
    bs = cfg.block_size
    ph, pw = -h % bs, -w % bs
    padded = np.pad(m, ((0, ph), (0, pw)), mode="edge")
    q = cfg.quality

    writer = BitWriter()
    writer.write_uint(h, 16)
    writer.write_uint(w, 16)
    writer.write_uint(_float_bits(m.min()), 32)
    writer.write_uint(_float_bits(m.max()), 32)
    for by in range(0, padded.shape[0], bs):
        for bx in range(0, padded.shape[1], bs):
            coef = dctn(padded[by : by + bs, bx : bx + bs], norm="ortho")
            levels = np.sign(coef) * np.floor(np.abs(coef) / q)
            scan = levels.ravel()[_ZIGZAG].astype(np.int64)
            nz = np.flatnonzero(scan)
            writer.write_ue(nz.size)
            prev = -1
            for pos in nz:
                writer.write_ue(int(pos - prev - 1))  # run of zeros before this coef
                writer.write_se(int(scan[pos]))
                prev = pos
    return BitStream(writer.getvalue())


def codec_decode(b: BitStream, cfg: CodecConfig) -> np.ndarray:
    """Invert codec_encode; raises CodecError on any malformed content."""
    reader = BitReader(b.bits)
    bs = cfg.block_size
    q = cfg.quality
    try:
        h = reader.read_uint(16)
        w = reader.read_uint(16)
        lo = _bits_float(reader.read_uint(32))
        hi = _bits_float(reader.read_uint(32))
        if h == 0 or w == 0:
            raise CodecError("zero measurement dims in header")
        if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
            raise CodecError("corrupt value range in header")
        ph, pw = h + (-h % bs), w + (-w % bs)
        out = np.empty((ph, pw))
        for by in range(0, ph, bs):
            for bx in range(0, pw, bs):
                scan = np.zeros(bs * bs)
                count = reader.read_ue()
                if count > bs * bs:
                    raise CodecError(f"coefficient count {count} exceeds block")
                pos = -1
                for _ in range(count):
                    pos += reader.read_ue() + 1
                    if pos >= bs * bs:
                        raise CodecError("zig-zag run past end of block")
                    level = reader.read_se()
                    if level == 0:
                        raise CodecError("zero level in run-length data")
                    scan[pos] = np.sign(level) * (abs(level) + 0.5) * q
                coef = np.zeros(bs * bs)
                coef[_ZIGZAG] = scan
                out[by : by + bs, bx : bx + bs] = idctn(coef.reshape(bs, bs), norm="ortho")
    except BitReaderError as exc:
        raise CodecError(str(exc)) from exc
    return np.clip(out[:h, :w], lo, hi).astype(np.float32)
