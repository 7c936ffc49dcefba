"""GF(2) linear algebra on bit-packed matrices with row-operation accounting.

Rows are packed little-endian into 64-bit words: column c lives in word c // 64
at bit c % 64. A row operation is one row XOR together with the XOR of the
symbol buffer attached to that row, and every solver counts them on the
matrix's ``op_counter``.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from bandfec.errors import InconsistentSystemError

logger = logging.getLogger(__name__)

WORD = np.dtype("<u8")
_ONE = np.uint64(1)


def _words_for(cols: int) -> int:
    return max(1, (cols + 63) // 64)


def _lowest_bit(words: np.ndarray) -> np.ndarray:
    """Index of the lowest set bit of each (nonzero) word"""
    low = words & (~words + _ONE)
    return np.bitwise_count(low - _ONE).astype(np.int64)


def _highest_bit(word: int) -> int:
    return int(word).bit_length() - 1


class BitMatrix:
    """Dense binary matrix, bit-packed row-major, with a row-operation counter"""

    def __init__(self, rows: int, cols: int, data: Optional[np.ndarray] = None):
        if rows < 0 or cols < 0:
            raise ValueError("Matrix dimensions must be non-negative")
        self.rows = rows
        self.cols = cols
        self.words = _words_for(cols)
        if data is None:
            data = np.zeros((rows, self.words), dtype=WORD)
        elif data.shape != (rows, self.words) or data.dtype != WORD:
            raise ValueError(f"Packed data must have shape {(rows, self.words)} and dtype uint64")
        self.data = data
        self.op_counter = 0
        # 64-bit words touched by matrix row XORs
        self.word_ops = 0

    # ==================== Construction ====================

    @classmethod
    def from_dense(cls, dense) -> "BitMatrix":
        """Pack a 2-D array of 0/1 values"""
        dense = np.asarray(dense, dtype=np.uint8) & 1
        if dense.ndim != 2:
            raise ValueError("Expected a 2-D array")
        rows, cols = dense.shape
        words = _words_for(cols)
        padded = np.zeros((rows, words * 64), dtype=np.uint8)
        padded[:, :cols] = dense
        packed = np.packbits(padded, axis=1, bitorder="little")
        return cls(rows, cols, np.ascontiguousarray(packed).view(WORD).reshape(rows, words))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int) -> "BitMatrix":
        """Build from per-row lists of set column indices"""
        m = cls(len(rows), cols)
        lengths = [len(columns) for columns in rows]
        total = sum(lengths)
        if total == 0:
            return m
        r_idx = np.repeat(np.arange(len(rows)), lengths)
        c_idx = np.fromiter((c for columns in rows for c in columns), dtype=np.int64, count=total)
        if c_idx.min() < 0 or c_idx.max() >= cols:
            raise IndexError(f"Column index outside matrix with {cols} columns")
        np.bitwise_or.at(m.data, (r_idx, c_idx >> 6), _ONE << (c_idx & 63).astype(np.uint64))
        return m

    @classmethod
    def from_dump(cls, text: str) -> "BitMatrix":
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines:
            return cls(0, 0)
        widths = {len(line) for line in lines}
        if len(widths) != 1 or any(ch not in "01" for line in lines for ch in line):
            raise ValueError("Dump must be equal-length lines of '0'/'1'")
        return cls.from_dense([[int(ch) for ch in line] for line in lines])

    def copy(self) -> "BitMatrix":
        twin = BitMatrix(self.rows, self.cols, self.data.copy())
        twin.op_counter = self.op_counter
        twin.word_ops = self.word_ops
        return twin

    # ==================== Access ====================

    def get(self, r: int, c: int) -> int:
        self._check_cell(r, c)
        return int((self.data[r, c >> 6] >> np.uint64(c & 63)) & _ONE)

    def set(self, r: int, c: int, value: int = 1) -> None:
        self._check_cell(r, c)
        bit = _ONE << np.uint64(c & 63)
        if value:
            self.data[r, c >> 6] |= bit
        else:
            self.data[r, c >> 6] &= ~bit

    def to_dense(self) -> np.ndarray:
        bits = np.unpackbits(self.data.view(np.uint8), axis=1, bitorder="little")
        return bits[:, : self.cols]

    def row_columns(self, r: int) -> List[int]:
        return [int(c) for c in np.flatnonzero(self.to_dense_row(r))]

    def to_dense_row(self, r: int) -> np.ndarray:
        bits = np.unpackbits(self.data[r].view(np.uint8), bitorder="little")
        return bits[: self.cols]

    def dump(self) -> str:
        """Debug dump: one row per line of '0'/'1' characters"""
        dense = self.to_dense()
        return "".join("".join("1" if b else "0" for b in row) + "\n" for row in dense)

    def _check_cell(self, r: int, c: int) -> None:
        if not (0 <= r < self.rows and 0 <= c < self.cols):
            raise IndexError(f"Cell ({r}, {c}) outside {self.rows}x{self.cols} matrix")

    # ==================== Row operations ====================

    def row_xor(self, dst: int, src: int, symbols: Optional[np.ndarray] = None) -> None:
        """Replace row dst by dst XOR src (and the attached symbols likewise)"""
        if dst == src:
            raise ValueError("Cannot XOR a row into itself")
        for r in (dst, src):
            if not 0 <= r < self.rows:
                raise IndexError(f"Row {r} outside matrix with {self.rows} rows")
        self.data[dst] ^= self.data[src]
        self.word_ops += self.words
        if symbols is not None:
            symbols[dst] ^= symbols[src]
        self.op_counter += 1

    def xor_into(
        self,
        dsts: np.ndarray,
        src: int,
        symbols: Optional[np.ndarray] = None,
        word_range: Optional[Tuple[int, int]] = None,
    ) -> None:
        """Bulk form of row_xor: XOR row src into every row of dsts.

        word_range restricts the matrix XOR to the words where src can be
        nonzero; the caller guarantees src is zero outside it.
        """
        if len(dsts) == 0:
            return
        lo, hi = word_range if word_range is not None else (0, self.words)
        self.data[dsts, lo:hi] ^= self.data[src, lo:hi]
        if symbols is not None:
            symbols[dsts] ^= symbols[src]
        self.op_counter += len(dsts)
        self.word_ops += len(dsts) * (hi - lo)

    def swap_rows(self, a: int, b: int, symbols: Optional[np.ndarray] = None) -> None:
        if a == b:
            return
        self.data[[a, b]] = self.data[[b, a]]
        if symbols is not None:
            symbols[[a, b]] = symbols[[b, a]]

    def column_bits(self, c: int, start: int = 0) -> np.ndarray:
        """Bit c of rows start.. as a 0/1 array"""
        return ((self.data[start:, c >> 6] >> np.uint64(c & 63)) & _ONE).astype(np.uint8)


# ==================== Band profile ====================

@dataclass(frozen=True)
class BandProfile:
    """First and last nonzero column per row (-1 for zero rows)"""

    first: np.ndarray
    last: np.ndarray

    @classmethod
    def from_matrix(cls, m: BitMatrix) -> "BandProfile":
        first = np.full(m.rows, -1, dtype=np.int64)
        last = np.full(m.rows, -1, dtype=np.int64)
        if m.rows == 0:
            return cls(first, last)
        nonzero = m.data != 0
        has = nonzero.any(axis=1)
        rows = np.flatnonzero(has)
        first_word = nonzero.argmax(axis=1)
        last_word = m.words - 1 - nonzero[:, ::-1].argmax(axis=1)
        if rows.size:
            fw = first_word[rows]
            first[rows] = fw * 64 + _lowest_bit(m.data[rows, fw])
            lw = last_word[rows]
            last[rows] = [w * 64 + _highest_bit(m.data[r, w]) for r, w in zip(rows, lw)]
        return cls(first, last)

    @property
    def bandwidth(self) -> int:
        nonzero = self.first >= 0
        if not nonzero.any():
            return 0
        return int((self.last[nonzero] - self.first[nonzero] + 1).max())

    def validate(self, m: BitMatrix) -> None:
        if len(self.first) != m.rows or len(self.last) != m.rows:
            raise ValueError("Band profile does not match the matrix row count")
        actual = BandProfile.from_matrix(m)
        nonzero = actual.first >= 0
        if np.any(self.first[nonzero] > actual.first[nonzero]) or np.any(self.last[nonzero] < actual.last[nonzero]):
            raise ValueError("Band profile does not cover the matrix support")
        if np.any(self.first[nonzero] > self.last[nonzero]):
            raise ValueError("Band profile has first > last on a nonzero row")


# ==================== Solvers ====================

@dataclass
class SolveResult:
    """Solution of M x = rhs, or the pivot-free columns when rank < cols"""

    solution: Optional[np.ndarray]
    unsolvable: Tuple[int, ...] = ()
    row_ops: int = 0
    bandwidth_growth: int = 0
    alpha: float = 0.0

    @property
    def solved(self) -> bool:
        return self.solution is not None


def _check_rhs(m: BitMatrix, rhs: np.ndarray) -> None:
    if rhs.ndim != 2 or rhs.shape[0] != m.rows:
        raise ValueError(f"Right-hand side needs {m.rows} symbol rows, got shape {rhs.shape}")


def _check_zero_rows(rhs: np.ndarray, rows: Sequence[int]) -> None:
    for r in rows:
        if rhs[r].any():
            raise InconsistentSystemError(int(r))


def dense_solve(m: BitMatrix, rhs: np.ndarray) -> SolveResult:
    """
    Gaussian elimination over GF(2), columns left to right.

    Works in place on m and rhs. Forward elimination then back substitution;
    every row XOR is counted on m.op_counter.
    """
    _check_rhs(m, rhs)
    start_ops = m.op_counter
    pivots: List[int] = []
    free: List[int] = []
    r = 0
    for c in range(m.cols):
        if r == m.rows:
            free.extend(range(c, m.cols))
            break
        hits = np.flatnonzero(m.column_bits(c, r))
        if hits.size == 0:
            free.append(c)
            continue
        m.swap_rows(r, r + int(hits[0]), rhs)
        below = r + 1 + np.flatnonzero(m.column_bits(c, r + 1))
        m.xor_into(below, r, rhs)
        pivots.append(c)
        r += 1

    _check_zero_rows(rhs, range(r, m.rows))
    if free:
        return SolveResult(None, tuple(free), m.op_counter - start_ops)

    for i in range(len(pivots) - 1, 0, -1):
        c = pivots[i]
        above = np.flatnonzero(m.column_bits(c)[:i])
        m.xor_into(above, i, rhs)
    solution = rhs[: len(pivots)].copy()
    return SolveResult(solution, (), m.op_counter - start_ops)


def banded_solve(m: BitMatrix, profile: BandProfile, rhs: np.ndarray) -> SolveResult:
    """
    Band-exploiting elimination over GF(2).

    Rows are bucketed by their leading nonzero column. Column c's active window
    is its bucket: once columns < c are eliminated every row holding bit c
    leads at c, so no pivot is ever missed. The pivot is the bucket row with
    the sparsest active segment (lowest index on ties) and row XORs touch only
    the words between c and the pivot's last nonzero. Fill-in beyond the
    profile is reported as bandwidth_growth.
    """
    _check_rhs(m, rhs)
    profile.validate(m)
    start_ops = m.op_counter
    last = profile.last.copy()
    lead = BandProfile.from_matrix(m).first

    buckets: Dict[int, List[int]] = {}
    zero_rows: List[int] = []
    for r in range(m.rows):
        if lead[r] < 0:
            zero_rows.append(r)
        else:
            buckets.setdefault(int(lead[r]), []).append(r)

    pivot_row: Dict[int, int] = {}
    free: List[int] = []
    for c in range(m.cols):
        bucket = buckets.pop(c, None)
        if not bucket:
            free.append(c)
            continue
        bucket.sort()
        w0 = c >> 6
        if len(bucket) > 1:
            w_end = int(last[bucket].max() >> 6) + 1
            density = np.bitwise_count(m.data[bucket, w0:w_end]).sum(axis=1)
            p = bucket[int(np.argmin(density))]
        else:
            p = bucket[0]
        pivot_row[c] = p
        others = np.array([q for q in bucket if q != p], dtype=np.int64)
        if others.size == 0:
            continue

        m.xor_into(others, p, rhs, (w0, int(last[p] >> 6) + 1))
        last[others] = np.maximum(last[others], last[p])
        w_end = int(last[others].max() >> 6) + 1
        segment = m.data[others, w0:w_end]
        nonzero = segment != 0
        has = nonzero.any(axis=1)
        first_word = nonzero.argmax(axis=1)
        picked = segment[np.arange(len(others)), first_word]
        new_lead = (w0 + first_word) * 64 + _lowest_bit(picked)
        for q, ok, lq in zip(others, has, new_lead):
            if ok:
                buckets.setdefault(int(lq), []).append(int(q))
            else:
                zero_rows.append(int(q))

    _check_zero_rows(rhs, zero_rows)
    growth = 0
    if pivot_row:
        spans = [int(last[p]) - c + 1 for c, p in pivot_row.items()]
        growth = max(0, max(spans) - profile.bandwidth)
    if free:
        return SolveResult(None, tuple(free), m.op_counter - start_ops, growth)

    # Back substitution, highest pivot first: a pivot row only reaches the
    # rows of lower pivot columns whose last nonzero is at or past c.
    order = sorted(pivot_row)
    rows_by_col = np.array([pivot_row[c] for c in order], dtype=np.int64)
    for i in range(len(order) - 1, 0, -1):
        c = order[i]
        p = rows_by_col[i]
        earlier = rows_by_col[:i]
        reach = earlier[last[earlier] >= c]
        if reach.size == 0:
            continue
        bits = (m.data[reach, c >> 6] >> np.uint64(c & 63)) & _ONE
        hit = reach[bits.astype(bool)]
        m.xor_into(hit, int(p), rhs, (c >> 6, int(last[p] >> 6) + 1))

    solution = rhs[rows_by_col].copy()
    ops = m.op_counter - start_ops
    width = max(profile.bandwidth, 1)
    alpha = ops / (max(m.rows, 1) * width)
    return SolveResult(solution, (), ops, growth, alpha)


def rank(m: BitMatrix) -> int:
    """GF(2) rank, computed on a scratch copy (op_counter untouched)"""
    work = m.copy()
    r = 0
    for c in range(work.cols):
        if r == work.rows:
            break
        hits = np.flatnonzero(work.column_bits(c, r))
        if hits.size == 0:
            continue
        work.swap_rows(r, r + int(hits[0]))
        below = r + 1 + np.flatnonzero(work.column_bits(c, r + 1))
        work.xor_into(below, r)
        r += 1
    return r


# ==================== Incremental rank ====================

@dataclass
class EchelonBasis:
    """Incremental GF(2) rank over integer bit-rows.

    Each stored row is keyed by its lowest set bit and no two rows share a key,
    so inserting a vector is a walk down its lowest bits.
    """

    pivots: Dict[int, int] = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def add(self, vector: int) -> bool:
        """Insert a vector; True when it raised the rank"""
        while vector:
            low = (vector & -vector).bit_length() - 1
            row = self.pivots.get(low)
            if row is None:
                self.pivots[low] = vector
                return True
            vector ^= row
        return False
