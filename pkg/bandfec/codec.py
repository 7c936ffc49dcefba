"""Encoding, iterative (peeling) decoding, ML decoding and the hybrid driver"""

import logging
import time
from dataclasses import dataclass, field
from enum import IntEnum
from functools import reduce
from operator import xor
from typing import Iterable, List, Optional, Tuple

import numpy as np

from bandfec.config import get_settings
from bandfec.construct import CodeMatrices, flags_to_mask, iter_bits, mask_to_indices
from bandfec.errors import ConsistencyError
from bandfec.gf2linalg import BandProfile, BitMatrix, banded_solve, dense_solve
from bandfec.schemas import CodeFamily, DecodeOutcome, DecoderKind

logger = logging.getLogger(__name__)

SOLVERS = ("auto", "banded", "dense")


class Recovery(IntEnum):
    UNKNOWN = 0
    RECEIVED = 1
    ITERATIVE = 2
    ML = 3


@dataclass
class SymbolBlock:
    """Symbol buffers of one source block, indexed by decoding slot"""

    symbol_size: int
    data: np.ndarray
    present: np.ndarray
    recovered_by: np.ndarray

    @classmethod
    def empty(cls, code: CodeMatrices, symbol_size: int) -> "SymbolBlock":
        slots = code.slot_count
        return cls(
            symbol_size,
            np.zeros((slots, symbol_size), dtype=np.uint8),
            np.zeros(slots, dtype=bool),
            np.full(slots, Recovery.UNKNOWN, dtype=np.int8),
        )

    @classmethod
    def from_sources(cls, code: CodeMatrices, sources: np.ndarray) -> "SymbolBlock":
        """Block holding exactly the k source symbols (rows of sources)"""
        sources = np.asarray(sources, dtype=np.uint8)
        if sources.ndim != 2 or sources.shape[0] != code.k:
            raise ValueError(f"Expected {code.k} source symbols, got array of shape {sources.shape}")
        block = cls.empty(code, sources.shape[1])
        block.data[: code.k] = sources
        block.present[: code.k] = True
        block.recovered_by[: code.k] = Recovery.RECEIVED
        return block

    def receive(self, slot: int, payload) -> bool:
        """Store a received symbol; False when the slot was already present"""
        payload = np.frombuffer(bytes(payload), dtype=np.uint8) if not isinstance(payload, np.ndarray) else payload
        if payload.shape != (self.symbol_size,):
            raise ValueError(f"Symbol of {payload.size} bytes, expected {self.symbol_size}")
        if self.present[slot]:
            return False
        self.data[slot] = payload
        self.present[slot] = True
        self.recovered_by[slot] = Recovery.RECEIVED
        return True

    def sources_present(self, k: int) -> int:
        return int(self.present[:k].sum())

    def missing_sources(self, k: int) -> np.ndarray:
        return np.flatnonzero(~self.present[:k])

    def copy(self) -> "SymbolBlock":
        return SymbolBlock(self.symbol_size, self.data.copy(), self.present.copy(), self.recovered_by.copy())


def _xor_rows(data: np.ndarray, rows) -> np.ndarray:
    if len(rows) == 0:
        return np.zeros(data.shape[1], dtype=np.uint8)
    return np.bitwise_xor.reduce(data[rows], axis=0)


# ==================== Encoding ====================

def encode(code: CodeMatrices, block: SymbolBlock) -> SymbolBlock:
    """
    Compute all n encoding symbols from the k source symbols.

    - Band: repair j is the XOR of the sources whose row polynomial covers j
    - Staircase: repairs are accumulated, repair j = repair j-1 XOR (A row j)
    - Windowed: every encoding symbol is the XOR of its generator column
    """
    k = code.k
    if not block.present[:k].all() or block.present[k:].any():
        raise ValueError("Encoding needs exactly the k source slots present")
    out = block.copy()
    sources = out.data[:k]

    if code.family == CodeFamily.STAIRCASE:
        previous = np.zeros(block.symbol_size, dtype=np.uint8)
        for j, row in enumerate(code.check_rows):
            previous = previous ^ _xor_rows(sources, [s for s in row if s < k])
            out.data[k + j] = previous
    else:
        for esi in code.repair_esis:
            slot = code.esi_slot(esi)
            out.data[slot] = _xor_rows(sources, mask_to_indices(code.generator[esi], k))

    out.present[:] = True
    out.recovered_by[k:] = Recovery.RECEIVED
    return out


def received_block(code: CodeMatrices, encoded: SymbolBlock, esis: Iterable[int]) -> SymbolBlock:
    """What a receiver holds after getting only the listed encoding symbols"""
    block = SymbolBlock.empty(code, encoded.symbol_size)
    for esi in esis:
        slot = code.esi_slot(int(esi))
        block.receive(slot, encoded.data[slot])
    return block


# ==================== Iterative decoding ====================

@dataclass
class PeelingReport:
    recovered: List[int] = field(default_factory=list)
    row_ops: int = 0
    missing_sources: int = 0
    sources_recovered: int = 0


def iterative_decode(
    code: CodeMatrices,
    block: SymbolBlock,
    rng: Optional[np.random.Generator] = None,
    stop_when_sources_known: bool = True,
) -> PeelingReport:
    """
    Peel on H: a check row with one missing member resolves it as the XOR of
    the others. Works in place on block.

    rng picks ready rows in random order instead of FIFO; the fixpoint is the
    same either way. With stop_when_sources_known the pass ends as soon as all
    k sources are present.
    """
    report = PeelingReport()
    k = code.k
    if code.check_rows is None:
        report.missing_sources = k - block.sources_present(k)
        return report

    rows = code.check_rows
    checks = code.symbol_checks
    missing = [sum(1 for s in row if not block.present[s]) for row in rows]
    ready = [r for r, count in enumerate(missing) if count == 1]
    sources_left = k - block.sources_present(k)

    while ready and not (stop_when_sources_known and sources_left == 0):
        if rng is not None:
            idx = int(rng.integers(len(ready)))
            ready[idx], ready[-1] = ready[-1], ready[idx]
        r = ready.pop()
        if missing[r] != 1:
            continue
        row = rows[r]
        target = next(s for s in row if not block.present[s])
        others = [s for s in row if s != target]
        block.data[target] = _xor_rows(block.data, others)
        block.present[target] = True
        block.recovered_by[target] = Recovery.ITERATIVE
        report.row_ops += max(len(others) - 1, 0)
        report.recovered.append(target)
        if target < k:
            sources_left -= 1
            report.sources_recovered += 1
        for r2 in checks[target]:
            missing[r2] -= 1
            if missing[r2] == 1:
                ready.append(r2)

    report.missing_sources = sources_left
    return report


class PeelingTracker:
    """Structural peeling with one slot arriving at a time.

    Each check row keeps its count of unknown slots and the XOR of their
    indices, so a row down to one unknown names that slot directly.
    """

    def __init__(self, code: CodeMatrices):
        if code.check_rows is None:
            raise ValueError(f"{code.family.value} codes cannot be decoded iteratively")
        self.k = code.k
        self._checks = code.symbol_checks
        self._missing = [len(row) for row in code.check_rows]
        self._pending = [reduce(xor, row, 0) for row in code.check_rows]
        self._known = bytearray(code.slot_count)
        self.sources_known = 0

    @property
    def complete(self) -> bool:
        return self.sources_known == self.k

    def add(self, slot: int) -> None:
        stack = [slot]
        while stack:
            s = stack.pop()
            if self._known[s]:
                continue
            self._known[s] = 1
            if s < self.k:
                self.sources_known += 1
            for r in self._checks[s]:
                self._missing[r] -= 1
                self._pending[r] ^= s
                if self._missing[r] == 1:
                    stack.append(self._pending[r])


# ==================== ML decoding ====================

def reduced_system(code: CodeMatrices, block: SymbolBlock) -> Tuple[BitMatrix, np.ndarray, np.ndarray, int]:
    """
    Equations on the missing sources only.

    Columns are the missing sources in their original order, rows are the
    present non-systematic symbols. Known source contributions are XORed into
    the right-hand side, one row operation each. Building an equation walks
    only the set bits of its generator row.

    Returns (matrix, rhs, missing source indices, row operations spent).
    """
    k = code.k
    missing = block.missing_sources(k)
    present_mask = flags_to_mask(block.present[:k])
    missing_mask = ((1 << k) - 1) ^ present_mask
    column_of = np.full(k, -1, dtype=np.int64)
    column_of[missing] = np.arange(missing.size)
    equations = [esi for esi in code.repair_esis if block.present[code.esi_slot(esi)]]

    rows = []
    rhs = np.empty((len(equations), block.symbol_size), dtype=np.uint8)
    ops = 0
    for e, esi in enumerate(equations):
        mask = code.generator[esi]
        rows.append(column_of[list(iter_bits(mask & missing_mask))])
        rhs[e] = block.data[code.esi_slot(esi)]
        contributors = list(iter_bits(mask & present_mask))
        if contributors:
            rhs[e] ^= _xor_rows(block.data, contributors)
            ops += len(contributors)
    return BitMatrix.from_rows(rows, missing.size), rhs, missing, ops


def ml_decode(code: CodeMatrices, block: SymbolBlock, solver: str = "auto") -> DecodeOutcome:
    """
    Solve for the missing sources by Gaussian elimination on the reduced system.

    solver "auto" uses the band solver for Band codes and dense elimination
    otherwise. On a rank-deficient system the block keeps what it had.
    """
    if solver not in SOLVERS:
        raise ValueError(f"Unknown solver {solver!r}; expected one of {SOLVERS}")
    started = time.perf_counter()
    k = code.k
    if block.sources_present(k) == k:
        return DecodeOutcome(success=True, recovered_count=0, wall_time=time.perf_counter() - started)

    matrix, rhs, missing, ops = reduced_system(code, block)
    use_band = solver == "banded" or (solver == "auto" and code.family == CodeFamily.BAND)
    if use_band:
        result = banded_solve(matrix, BandProfile.from_matrix(matrix), rhs)
    else:
        result = dense_solve(matrix, rhs)
    ops += result.row_ops

    if not result.solved:
        logger.info("ML decoding failed: %d of %d missing sources unsolvable", len(result.unsolvable), len(missing))
        return DecodeOutcome(
            success=False,
            unsolvable=len(result.unsolvable),
            row_ops=ops,
            wall_time=time.perf_counter() - started,
        )

    block.data[missing] = result.solution
    block.present[missing] = True
    block.recovered_by[missing] = Recovery.ML
    return DecodeOutcome(
        success=True,
        recovered_count=len(missing),
        ml_recovered=len(missing),
        row_ops=ops,
        wall_time=time.perf_counter() - started,
    )


# ==================== Drivers ====================

def hybrid_decode(
    code: CodeMatrices,
    block: SymbolBlock,
    solver: str = "auto",
    rng: Optional[np.random.Generator] = None,
) -> DecodeOutcome:
    """Peeling first; ML on whatever peeling leaves behind"""
    started = time.perf_counter()
    k = code.k
    if block.sources_present(k) == k:
        return DecodeOutcome(success=True, wall_time=time.perf_counter() - started)

    peeled = iterative_decode(code, block, rng)
    if peeled.missing_sources == 0:
        outcome = DecodeOutcome(
            success=True,
            recovered_count=peeled.sources_recovered,
            iterative_recovered=peeled.sources_recovered,
            row_ops=peeled.row_ops,
        )
    else:
        ml = ml_decode(code, block, solver)
        outcome = ml.model_copy(update={
            "recovered_count": peeled.sources_recovered + ml.ml_recovered,
            "iterative_recovered": peeled.sources_recovered,
            "row_ops": peeled.row_ops + ml.row_ops,
        })
    outcome.wall_time = time.perf_counter() - started
    return outcome


def decode(
    code: CodeMatrices,
    block: SymbolBlock,
    decoder: DecoderKind = DecoderKind.HYBRID,
    solver: str = "auto",
) -> DecodeOutcome:
    """Run the selected decoder; with settings.verify_decodes, re-check the result"""
    if decoder == DecoderKind.ITERATIVE:
        if code.check_rows is None:
            raise ValueError(f"{code.family.value} codes cannot be decoded iteratively")
        started = time.perf_counter()
        peeled = iterative_decode(code, block)
        outcome = DecodeOutcome(
            success=peeled.missing_sources == 0,
            recovered_count=peeled.sources_recovered,
            iterative_recovered=peeled.sources_recovered,
            unsolvable=peeled.missing_sources,
            row_ops=peeled.row_ops,
            wall_time=time.perf_counter() - started,
        )
    elif decoder == DecoderKind.ML:
        outcome = ml_decode(code, block, solver)
    else:
        outcome = hybrid_decode(code, block, solver)

    if outcome.success and get_settings().verify_decodes and not check_consistency(code, block):
        raise ConsistencyError("Decoded sources do not reproduce the received repair symbols")
    return outcome


def check_consistency(code: CodeMatrices, block: SymbolBlock) -> bool:
    """Every received repair whose sources are all present matches its re-encoding"""
    k = code.k
    present_mask = flags_to_mask(block.present[:k])
    for esi in code.repair_esis:
        slot = code.esi_slot(esi)
        if not block.present[slot] or block.recovered_by[slot] != Recovery.RECEIVED:
            continue
        mask = code.generator[esi]
        if mask & ~present_mask:
            continue
        if not np.array_equal(_xor_rows(block.data, mask_to_indices(mask, k)), block.data[slot]):
            logger.warning("Repair symbol %d disagrees with the recovered sources", esi)
            return False
    return True
