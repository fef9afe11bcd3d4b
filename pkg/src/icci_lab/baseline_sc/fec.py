"""Forward error correction: Hamming(7,4) and a seeded Gallager LDPC family.

The LDPC parity-check matrix is a (3,6)-regular Gallager construction
(three stacked permuted bands) with 4-cycle removal; rates 2/3 and 3/4 are
obtained by XOR-merging row pairs of the rate-1/2 matrix. Encoding is
systematic (info bits first), decoding is normalized min-sum belief
propagation over LLRs with the convention that positive LLR means bit 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensors_io import Rng
from .bits import BitStream

MIN_SUM_ALPHA = 0.75
_DECODE_BATCH = 512  # codewords per vectorized decode slab

_HAMMING_P = np.array([[1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]], dtype=np.uint8)
_HAMMING_H = np.hstack([_HAMMING_P.T, np.eye(3, dtype=np.uint8)])


@dataclass(frozen=True)
class FecConfig:
    scheme: str = "ldpc"  # "hamming74" | "ldpc"
    n: int = 648
    rate_num: int = 1
    rate_den: int = 2
    seed: int = 0
    max_iterations: int = 50

    def __post_init__(self):
        if self.scheme not in ("hamming74", "ldpc"):
            raise ValueError(f"unknown FEC scheme {self.scheme!r}")
        if self.scheme == "ldpc":
            if (self.rate_num, self.rate_den) not in ((1, 2), (2, 3), (3, 4)):
                raise ValueError("supported LDPC rates: 1/2, 2/3, 3/4")
            if self.n * self.rate_num % self.rate_den != 0 or self.n % 6 != 0:
                raise ValueError(f"n={self.n} incompatible with rate/construction")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @property
    def k(self) -> int:
        if self.scheme == "hamming74":
            return 4
        return self.n * self.rate_num // self.rate_den

    @property
    def block_n(self) -> int:
        return 7 if self.scheme == "hamming74" else self.n


def _gf2_row_reduce(mat: np.ndarray):
    """Row-reduce in place; returns the pivot column list."""
    m, n = mat.shape
    pivots = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        hit = np.flatnonzero(mat[row:, col])
        if hit.size == 0:
            continue
        swap = row + hit[0]
        if swap != row:
            mat[[row, swap]] = mat[[swap, row]]
        others = np.flatnonzero(mat[:, col])
        others = others[others != row]
        mat[others] ^= mat[row]
        pivots.append(col)
        row += 1
    return pivots


def _gallager_bands(n: int, rng: Rng) -> np.ndarray:
    """(3,6)-regular H: one structured band plus two column-permuted copies."""
    rows_per_band = n // 6
    h = np.zeros((3 * rows_per_band, n), dtype=np.uint8)
    base_rows = np.repeat(np.arange(rows_per_band), 6)
    h[base_rows, np.arange(n)] = 1
    for s in (1, 2):
        perm = rng.shuffled_indices(n)
        h[s * rows_per_band + base_rows, perm] = 1
    return h


def _remove_4cycles(h: np.ndarray, rng: Rng, max_passes: int = 60) -> np.ndarray:
    """Break column pairs sharing two rows by re-permuting within a band."""
    rows_per_band = h.shape[1] // 6
    for _ in range(max_passes):
        gram = (h.T.astype(np.int32) @ h.astype(np.int32))
        np.fill_diagonal(gram, 0)
        bad = np.argwhere(np.triu(gram) >= 2)
        if bad.size == 0:
            return h
        for c1, c2 in bad:
            shared = np.flatnonzero(h[:, c1] & h[:, c2])
            if shared.size < 2:
                continue  # already fixed by an earlier swap this pass
            # move c2's entry in the band of the last shared row
            r = shared[-1]
            band = min(int(r) // rows_per_band, 2)
            lo, hi = band * rows_per_band, (band + 1) * rows_per_band
            c3 = int(rng.next_u64() % h.shape[1])
            r2_rel = np.flatnonzero(h[lo:hi, c2])
            r3_rel = np.flatnonzero(h[lo:hi, c3])
            if r2_rel.size != 1 or r3_rel.size != 1 or c3 == c2:
                continue
            h[lo + r2_rel[0], c2], h[lo + r3_rel[0], c2] = 0, 1
            h[lo + r3_rel[0], c3], h[lo + r2_rel[0], c3] = 0, 1
    return h


def _merge_rows(h: np.ndarray, target_rows: int) -> np.ndarray:
    merge_count = h.shape[0] - target_rows
    if merge_count == 0:
        return h
    head = h[: 2 * merge_count]
    merged = head[0::2] ^ head[1::2]
    return np.vstack([merged, h[2 * merge_count :]])


def _ensure_full_rank(h: np.ndarray, rng: Rng) -> np.ndarray:
    """Replace dependent rows with fresh weight-6 rows until full rank.

    Candidate rows are rejected if any existing row already covers two of
    their columns, so the repair cannot reintroduce 4-cycles.
    """
    m, n = h.shape
    for _ in range(200):
        work = h.copy()
        pivots = _gf2_row_reduce(work)
        if len(pivots) == m:
            return h
        victim = int(rng.next_u64() % m)
        for _ in range(100):
            support = rng.shuffled_indices(n)[:6]
            others = np.delete(h[:, support], victim, axis=0)
            if np.any(others.sum(axis=1) >= 2):
                continue
            h[victim] = 0
            h[victim, support] = 1
            break
    raise RuntimeError("could not reach a full-rank parity matrix")


class _LdpcCode:
    """Systematized code plus the edge structures used by the decoder."""

    def __init__(self, cfg: FecConfig):
        rng = Rng(cfg.seed)
        h = _gallager_bands(cfg.n, rng)
        h = _remove_4cycles(h, rng)
        h = _merge_rows(h, cfg.n - cfg.k)
        h = _ensure_full_rank(h, rng)
        m, n = h.shape

        work = h.copy()
        pivots = _gf2_row_reduce(work)
        free = [c for c in range(n) if c not in set(pivots)]
        perm = np.array(free + pivots)  # info positions first, parity last
        self.h = h[:, perm]
        a_part = self.h[:, : cfg.k]
        b_part = self.h[:, cfg.k :]
        # B^-1 A via elimination on [B | A]
        aug = np.hstack([b_part.copy(), a_part.copy()])
        piv = _gf2_row_reduce(aug)
        if piv != list(range(m)):
            raise RuntimeError("parity block not invertible after systematization")
        self.enc = aug[:, m:]  # (m, k): parity = enc @ u mod 2

        rows, cols = np.nonzero(self.h)
        order = np.argsort(rows, kind="stable")
        self.edge_row = rows[order]
        self.edge_col = cols[order]
        self.row_starts = np.searchsorted(self.edge_row, np.arange(m))
        col_sorted = np.argsort(self.edge_col, kind="stable")
        self.col_order = col_sorted
        self.col_starts = np.searchsorted(self.edge_col[col_sorted], np.arange(n))
        self.n, self.k, self.m = n, cfg.k, m


_code_cache: dict[FecConfig, _LdpcCode] = {}


def get_ldpc_code(cfg: FecConfig) -> _LdpcCode:
    if cfg not in _code_cache:
        _code_cache[cfg] = _LdpcCode(cfg)
    return _code_cache[cfg]


def _ldpc_encode_blocks(info: np.ndarray, code: _LdpcCode) -> np.ndarray:
    parity = (info @ code.enc.T) % 2
    return np.hstack([info, parity]).astype(np.uint8)


def _min_sum_decode(llr: np.ndarray, code: _LdpcCode, max_iter: int):
    """Batched normalized min-sum. llr shape (B, n); positive means bit 0."""
    batch = llr.shape[0]
    v2c = llr[:, code.edge_col].copy()
    out_bits = (llr < 0).astype(np.uint8)
    done = np.zeros(batch, dtype=bool)
    er, rs = code.edge_row, code.row_starts
    for _ in range(max_iter):
        absv = np.abs(v2c)
        sign = np.where(v2c < 0, -1.0, 1.0)
        neg_count = np.add.reduceat((v2c < 0).astype(np.int32), rs, axis=1)
        seg_sign = np.where(neg_count % 2 == 1, -1.0, 1.0)
        min1 = np.minimum.reduceat(absv, rs, axis=1)
        at_min = absv == min1[:, er]
        min_count = np.add.reduceat(at_min.astype(np.int32), rs, axis=1)
        min2 = np.minimum.reduceat(np.where(at_min, np.inf, absv), rs, axis=1)
        excl_min = np.where(
            at_min & (min_count[:, er] == 1), min2[:, er], min1[:, er]
        )
        c2v = MIN_SUM_ALPHA * seg_sign[:, er] * sign * excl_min
        col_sum = np.add.reduceat(c2v[:, code.col_order], code.col_starts, axis=1)
        total = llr + col_sum
        v2c = total[:, code.edge_col] - c2v
        bits = (total < 0).astype(np.uint8)
        syndrome_ok = ~np.any(
            np.add.reduceat(bits[:, code.edge_col], rs, axis=1) % 2, axis=1
        )
        newly = syndrome_ok & ~done
        out_bits[newly] = bits[newly]
        done |= syndrome_ok
        if done.all():
            break
    out_bits[~done] = bits[~done]
    return out_bits[:, : code.k], done


def fec_encode(bits, cfg: FecConfig) -> BitStream:
    """Systematic encoding; input zero-padded to a multiple of k (recorded)."""
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    k = cfg.k
    pad = (-bits.size) % k
    padded = np.concatenate([bits, np.zeros(pad, dtype=np.uint8)])
    blocks = padded.reshape(-1, k)
    if cfg.scheme == "hamming74":
        parity = (blocks @ _HAMMING_P) % 2
        coded = np.hstack([blocks, parity]).astype(np.uint8)
    else:
        coded = _ldpc_encode_blocks(blocks, get_ldpc_code(cfg))
    return BitStream(coded.ravel(), pad_bits=pad)


def fec_decode(llrs: np.ndarray, cfg: FecConfig) -> tuple[BitStream, bool]:
    """Decode channel LLRs back to information bits.

    Non-convergence is not an error: best-effort bits come back with
    ``converged=False``.
    """
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    block = cfg.block_n
    if llrs.size % block != 0:
        raise ValueError(f"{llrs.size} LLRs is not a multiple of block length {block}")
    if cfg.scheme == "hamming74":
        hard = (llrs < 0).astype(np.uint8).reshape(-1, 7)
        syndrome = (hard @ _HAMMING_H.T) % 2
        syn_val = syndrome @ np.array([4, 2, 1])
        col_val = (_HAMMING_H.T @ np.array([4, 2, 1]))  # syndrome of each flip position
        lookup = np.zeros(8, dtype=np.int64)
        lookup[col_val] = np.arange(7)
        flip_pos = lookup[syn_val]
        rows = np.flatnonzero(syn_val)
        hard[rows, flip_pos[rows]] ^= 1
        return BitStream(hard[:, :4].ravel()), True
    code = get_ldpc_code(cfg)
    words = llrs.reshape(-1, code.n)
    chunks, all_done = [], True
    for start in range(0, words.shape[0], _DECODE_BATCH):
        info, done = _min_sum_decode(
            words[start : start + _DECODE_BATCH], code, cfg.max_iterations
        )
        chunks.append(info)
        all_done = all_done and bool(done.all())
    return BitStream(np.concatenate(chunks).ravel()), all_done
