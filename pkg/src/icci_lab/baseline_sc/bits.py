"""Bit sequences, MSB-first packing, and Exp-Golomb primitives."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

BITSTREAM_MAGIC = b"ICB1"


@dataclass
class BitStream:
    """1-D {0,1} sequence; pad_bits records tail bits added by the producer."""

    bits: np.ndarray
    pad_bits: int = 0

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if self.bits.size == 0:
            raise ValueError("empty bit stream")
        if not np.all(self.bits <= 1):
            raise ValueError("bit stream must contain only 0/1")

    def __len__(self):
        return self.bits.size


def save_bitstream(b: BitStream, path) -> None:
    """16-byte header (magic, u64 bit length, u8 pad_bits) + packed bytes."""
    header = BITSTREAM_MAGIC
    header += len(b).to_bytes(8, "little")
    header += bytes([b.pad_bits & 0xFF]) + b"\x00\x00\x00"
    Path(path).write_bytes(header + np.packbits(b.bits).tobytes())


def load_bitstream(path) -> BitStream:
    raw = Path(path).read_bytes()
    if len(raw) < 16 or raw[:4] != BITSTREAM_MAGIC:
        raise ValueError(f"{path}: not a bitstream file")
    n = int.from_bytes(raw[4:12], "little")
    pad = raw[12]
    payload = np.frombuffer(raw[16:], dtype=np.uint8)
    bits = np.unpackbits(payload)[:n]
    if bits.size != n:
        raise ValueError(f"{path}: payload shorter than declared length")
    return BitStream(bits, pad_bits=pad)


class BitWriter:
    def __init__(self):
        self._chunks: list[np.ndarray] = []

    def write_bits(self, bits) -> None:
        self._chunks.append(np.asarray(bits, dtype=np.uint8))

    def write_uint(self, value: int, width: int) -> None:
        self._chunks.append(
            np.array([(value >> (width - 1 - i)) & 1 for i in range(width)], dtype=np.uint8)
        )

    def write_ue(self, value: int) -> None:
        """Order-0 Exp-Golomb for unsigned ints."""
        if value < 0:
            raise ValueError("ue takes nonnegative values")
        code = value + 1
        n_bits = code.bit_length()
        self.write_bits(np.zeros(n_bits - 1, dtype=np.uint8))
        self.write_uint(code, n_bits)

    def write_se(self, value: int) -> None:
        """Signed Exp-Golomb: v>0 -> 2v-1, v<=0 -> -2v."""
        self.write_ue(2 * value - 1 if value > 0 else -2 * value)

    def getvalue(self) -> np.ndarray:
        if not self._chunks:
            return np.zeros(0, dtype=np.uint8)
        return np.concatenate(self._chunks)


class BitReaderError(ValueError):
    pass


class BitReader:
    def __init__(self, bits: np.ndarray):
        self._bits = np.asarray(bits, dtype=np.uint8)
        self._pos = 0

    def read_uint(self, width: int) -> int:
        if self._pos + width > self._bits.size:
            raise BitReaderError("read past end of stream")
        out = 0
        for b in self._bits[self._pos : self._pos + width]:
            out = (out << 1) | int(b)
        self._pos += width
        return out

    def read_ue(self, max_leading: int = 48) -> int:
        zeros = 0
        while self._pos < self._bits.size and self._bits[self._pos] == 0:
            zeros += 1
            self._pos += 1
            if zeros > max_leading:
                raise BitReaderError("oversized Exp-Golomb prefix")
        if self._pos >= self._bits.size:
            raise BitReaderError("read past end of stream")
        return self.read_uint(zeros + 1) - 1

    def read_se(self) -> int:
        u = self.read_ue()
        return (u + 1) // 2 if u % 2 else -(u // 2)
