"""Code construction: LDPC-Band, LDPC-Staircase and Windowed Erasure codes.

Orientation: G = (Id | M) is k x n. Row i of the banded part M belongs to
source symbol i and is the polynomial x^start_i * m_i(x) over the n - k repair
columns. H = (A | U) is (n - k) x n with U the Toeplitz matrix of u(x), and
column i of A is (u(x) * x^start_i * m_i(x)) mod x^(n-k), which is what makes
G * H^T vanish.
"""

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property, lru_cache
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from bandfec.config import BandFecSettings, get_settings
from bandfec.errors import ConstructionError, SpecFormatError
from bandfec.gf2linalg import BandProfile
from bandfec.gf2poly import Gf2Poly, degree_window, find_candidates, format_poly, parse_poly, poly_mul
from bandfec.schemas import CodeFamily, CodeParams, Schedule, parse_rate

logger = logging.getLogger(__name__)

SPEC_HEADER = "# bandfec code spec v1"
LOG_BASES = {"e": math.log, "2": math.log2, "10": math.log10}


def iter_bits(mask: int):
    """Indices of the set bits of a non-negative integer, ascending"""
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def mask_to_indices(mask: int, length: int) -> np.ndarray:
    raw = np.frombuffer(mask.to_bytes((length + 7) // 8, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(raw, bitorder="little")[:length])


def flags_to_mask(flags: np.ndarray) -> int:
    """Integer with bit i set where flags[i] is true"""
    packed = np.packbits(np.asarray(flags, dtype=bool), bitorder="little")
    return int.from_bytes(packed.tobytes(), "little")


def _repair_count(k: int, rate: Fraction) -> int:
    repairs = k * (1 / rate - 1)
    if repairs.denominator != 1:
        raise ConstructionError(f"k * (1/rate - 1) must be an integer (k={k}, rate={rate})")
    return int(repairs)


def offset_period(k: int, repairs: int) -> Tuple[int, ...]:
    """One period of integer row offsets whose average is repairs / k"""
    f = Fraction(repairs, k)
    return tuple(
        (i + 1) * f.numerator // f.denominator - i * f.numerator // f.denominator
        for i in range(f.denominator)
    )


# ==================== Code spec ====================

@dataclass(frozen=True)
class CodeSpec:
    """Full description of one code instance"""

    family: CodeFamily
    k: int
    n: int
    rate: Fraction
    B: Optional[int] = None
    u: Optional[Gf2Poly] = None
    candidates: Tuple[Gf2Poly, ...] = ()
    edge_candidates: Tuple[Gf2Poly, ...] = ()
    offsets: Tuple[int, ...] = ()
    schedule: Schedule = Schedule.ROUND_ROBIN
    # Per source row: index into candidates (interior rows) or edge_candidates (edge rows)
    assignment: Tuple[int, ...] = ()
    n1: Optional[int] = None
    seed: int = 0
    log_base: str = "e"

    @property
    def repairs(self) -> int:
        return self.n - self.k

    @property
    def edge_rows(self) -> int:
        """Rows at each end of M that use edge candidates: ceil(B / (2 f))"""
        if self.family != CodeFamily.BAND:
            return 0
        return math.ceil(Fraction(self.B * self.k, 2 * self.repairs))

    def is_edge_row(self, i: int) -> bool:
        e = self.edge_rows
        return i < e or i >= self.k - e

    def cumulative_offset(self, i: int) -> int:
        """F_i: sum of the first i row offsets"""
        period = len(self.offsets)
        return (i // period) * sum(self.offsets) + sum(self.offsets[: i % period])

    def window_start(self, i: int) -> int:
        """Band start of row i: F_i - B/2, negative for head rows"""
        return self.cumulative_offset(i) - self.B // 2

    @cached_property
    def row_polys(self) -> Tuple[Tuple[Gf2Poly, int], ...]:
        """
        (m_i, first repair column) for every source row of M.

        Row i lives in its band window [F_i - B/2, F_i + B/2] clipped to the
        repair columns, so band starts advance by the offsets. Interior rows
        start on the window's left edge. Head edge rows start at F_i and tail
        edge rows end at F_i plus the slack left after F_(k-1).
        """
        if self.family != CodeFamily.BAND:
            return ()
        e = self.edge_rows
        repairs = self.repairs
        tail_shift = repairs - 1 - self.cumulative_offset(self.k - 1)
        rows = []
        for i in range(self.k):
            f = self.cumulative_offset(i)
            if i < e:
                poly = self.edge_candidates[self.assignment[i]]
                start = f
            elif i < self.k - e:
                poly = self.candidates[self.assignment[i]]
                start = min(max(self.window_start(i), 0), repairs - self.B)
            else:
                poly = self.edge_candidates[self.assignment[i]]
                start = max(f + tail_shift - poly.degree, 0)
            rows.append((poly, start))
        return tuple(rows)

    def product(self, i: int) -> Gf2Poly:
        """a_i(x) = u(x) * m_i(x) for source row i"""
        return poly_mul(self.u, self.row_polys[i][0])

    def is_truncated(self, i: int) -> bool:
        """True when column i of A is cut at the bottom of H"""
        poly, start = self.row_polys[i]
        return start + poly.degree + self.u.degree >= self.repairs


# ==================== Matrices ====================

@dataclass(frozen=True, eq=False)
class CodeMatrices:
    """Generator and parity-check structure of a code, immutable once built.

    Encoding symbols are numbered by ESI in [0, n). Decoding works on slots:
    for systematic families slot == ESI; Windowed codes are not systematic, so
    their k source symbols get slots [0, k) and ESI e lives in slot k + e.
    """

    spec: CodeSpec
    generator: Tuple[int, ...]
    check_rows: Optional[Tuple[Tuple[int, ...], ...]] = None
    band_profile: Optional[BandProfile] = None

    @property
    def family(self) -> CodeFamily:
        return self.spec.family

    @property
    def k(self) -> int:
        return self.spec.k

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def systematic(self) -> bool:
        return self.family != CodeFamily.WINDOWED

    @property
    def slot_count(self) -> int:
        return self.n if self.systematic else self.k + self.n

    def esi_slot(self, esi: int) -> int:
        if not 0 <= esi < self.n:
            raise IndexError(f"ESI {esi} outside [0, {self.n})")
        return esi if self.systematic else self.k + esi

    @property
    def repair_esis(self) -> range:
        """ESIs that carry combinations of source symbols"""
        return range(self.k, self.n) if self.systematic else range(self.n)

    @cached_property
    def symbol_checks(self) -> Tuple[Tuple[int, ...], ...]:
        """For each slot, the H rows it takes part in"""
        if self.check_rows is None:
            return ()
        adjacency: List[List[int]] = [[] for _ in range(self.slot_count)]
        for r, row in enumerate(self.check_rows):
            for slot in row:
                adjacency[slot].append(r)
        return tuple(tuple(rows) for rows in adjacency)

    def a_column(self, i: int) -> Tuple[int, ...]:
        """H rows holding source i (column i of A)"""
        return self.symbol_checks[i]

    def dump_generator(self) -> str:
        """G as k rows over the n encoding symbols"""
        lines = []
        for i in range(self.k):
            lines.append("".join("1" if (self.generator[e] >> i) & 1 else "0" for e in range(self.n)))
        return "".join(line + "\n" for line in lines)

    def dump_banded(self) -> str:
        """M as k rows over the n - k repair columns"""
        if self.family != CodeFamily.BAND:
            raise ValueError("Only band codes have a polynomial banded part")
        lines = []
        for poly, start in self.spec.row_polys:
            row = ["0"] * self.spec.repairs
            for e in poly.exponents:
                row[start + e] = "1"
            lines.append("".join(row))
        return "".join(line + "\n" for line in lines)

    def dump_parity_check(self) -> str:
        if self.check_rows is None:
            raise ValueError(f"{self.family.value} codes have no parity-check matrix")
        lines = []
        for row in self.check_rows:
            bits = ["0"] * self.n
            for slot in row:
                bits[slot] = "1"
            lines.append("".join(bits))
        return "".join(line + "\n" for line in lines)


def build_code(spec: CodeSpec) -> CodeMatrices:
    """Materialize the matrices of any family from its spec"""
    if spec.family == CodeFamily.BAND:
        return _band_matrices(spec)
    if spec.family == CodeFamily.STAIRCASE:
        return _staircase_matrices(spec)
    return _windowed_matrices(spec)


# ==================== LDPC-Band ====================

def _band_matrices(spec: CodeSpec) -> CodeMatrices:
    k, repairs = spec.k, spec.repairs
    generator = [1 << i for i in range(k)] + [0] * repairs
    check_sources: List[List[int]] = [[] for _ in range(repairs)]
    first = np.zeros(k, dtype=np.int64)
    last = np.zeros(k, dtype=np.int64)
    for i, (poly, start) in enumerate(spec.row_polys):
        for e in poly.exponents:
            generator[k + start + e] |= 1 << i
        for e in poly_mul(spec.u, poly).exponents:
            if start + e >= repairs:
                break
            check_sources[start + e].append(i)
        first[i] = start + poly.exponents[0]
        last[i] = start + poly.degree

    check_rows = []
    for j in range(repairs):
        accumulator = [k + j - t for t in spec.u.exponents if t <= j]
        check_rows.append(tuple(check_sources[j]) + tuple(sorted(accumulator)))
    return CodeMatrices(spec, tuple(generator), tuple(check_rows), BandProfile(first, last))


def _select_pool(pool: Sequence[Gf2Poly], count: int, schedule: Schedule, rng: np.random.Generator) -> List[int]:
    if schedule == Schedule.RANDOM:
        return [int(x) for x in rng.integers(len(pool), size=count)]
    return [t % len(pool) for t in range(count)]


def build_band(
    k: int,
    rate: Fraction,
    B: int,
    u: Gf2Poly,
    candidates: Sequence[Gf2Poly],
    edge_candidates: Sequence[Gf2Poly],
    schedule: Schedule = Schedule.ROUND_ROBIN,
    seed: int = 0,
    verify_limit: Optional[int] = None,
) -> Tuple[CodeSpec, CodeMatrices]:
    """
    Build an LDPC-Band code by interlacing candidate polynomials.

    The first and last ceil(B / 2f) rows of M use edge candidates (degree at
    most B/2) inside windows clipped at the first and last repair column, so
    the band never spills past n and n = k / rate exactly. See
    CodeSpec.row_polys for where each row starts.
    """
    if B < 2 or B % 2:
        raise ConstructionError(f"Band width must be even and at least 2, got {B}")
    if u.is_zero or not u.has_constant_term:
        raise ConstructionError("u(x) must have constant term 1")
    rate = Fraction(rate)
    repairs = _repair_count(k, rate)
    pool = tuple(m for m in candidates if not m.is_zero and m.degree < B)
    if not pool:
        raise ConstructionError(f"No candidate polynomial of degree < {B}")
    edges = tuple(edge_candidates)
    if not edges or any(m.is_zero for m in edges):
        raise ConstructionError("Edge candidates must be nonzero polynomials")
    if max(m.degree for m in edges) > B // 2:
        raise ConstructionError(f"Edge candidates must have degree <= B/2 = {B // 2}")
    if repairs < B:
        raise ConstructionError(f"Band of width {B} exceeds the {repairs} repair columns")
    spec = CodeSpec(
        family=CodeFamily.BAND,
        k=k,
        n=k + repairs,
        rate=rate,
        B=B,
        u=u,
        candidates=pool,
        edge_candidates=edges,
        offsets=offset_period(k, repairs),
        schedule=schedule,
        seed=seed,
    )
    e = spec.edge_rows
    if k <= 2 * e:
        raise ConstructionError(f"k={k} leaves no interior rows between 2 x {e} edge rows")

    rng = np.random.default_rng(seed)
    head = _select_pool(edges, e, schedule, rng)
    interior = _select_pool(pool, k - 2 * e, schedule, rng)
    tail = _select_pool(edges, e, schedule, rng)
    spec = replace(spec, assignment=tuple(head + interior + tail))

    matrices = _band_matrices(spec)
    limit = get_settings().verify_limit if verify_limit is None else verify_limit
    if k <= limit and not verify_orthogonality(matrices):
        raise ConstructionError("G * H^T != 0; construction is inconsistent")
    logger.info(
        "Built LDPC-Band code k=%d n=%d B=%d with %d candidates, %d edge rows per side",
        k, spec.n, B, len(pool), e,
    )
    return spec, matrices


@lru_cache(maxsize=64)
def _cached_search(u: Gf2Poly, lo: int, hi: int, w_min: int, w_max: int, count: int) -> Tuple[Gf2Poly, ...]:
    return tuple(find_candidates(u, hi, w_max, count, min_degree=lo, min_product_weight=w_min))


def search_pools(u: Gf2Poly, B: int, settings: Optional[BandFecSettings] = None) -> Tuple[Tuple[Gf2Poly, ...], Tuple[Gf2Poly, ...]]:
    """Default full-band and edge candidate pools for (u, B)"""
    settings = settings or get_settings()
    lo, hi = degree_window(B - 1, divisor=settings.degree_tolerance_divisor)
    pool = _cached_search(u, lo, hi, settings.candidate_min_weight, settings.candidate_max_weight, settings.candidate_count)
    e_lo, e_hi = degree_window(B // 2, divisor=settings.degree_tolerance_divisor)
    edges = _cached_search(
        u, e_lo, e_hi, settings.candidate_min_weight, settings.candidate_max_weight, settings.edge_candidate_count
    )
    if not pool or not edges:
        raise ConstructionError(
            f"Candidate search found {len(pool)} band and {len(edges)} edge polynomials for u={format_poly(u)}, B={B}"
        )
    return pool, edges


def default_band_spec(
    k: int,
    rate: Fraction,
    B: int,
    u: Optional[Gf2Poly] = None,
    schedule: Schedule = Schedule.ROUND_ROBIN,
    seed: int = 0,
    settings: Optional[BandFecSettings] = None,
) -> Tuple[CodeSpec, CodeMatrices]:
    settings = settings or get_settings()
    u = u if u is not None else parse_poly(settings.default_u)
    pool, edges = search_pools(u, B, settings)
    return build_band(k, rate, B, u, pool, edges, schedule, seed, settings.verify_limit)


# ==================== LDPC-Staircase ====================

def _staircase_matrices(spec: CodeSpec) -> CodeMatrices:
    k, repairs, n1 = spec.k, spec.repairs, spec.n1
    rng = np.random.default_rng(spec.seed)
    per_row = math.ceil(k * n1 / repairs)
    pool: List[int] = [r for r in range(repairs) for _ in range(per_row)]
    rows: List[List[int]] = [[] for _ in range(repairs)]
    for i in range(k):
        chosen: set = set()
        misses = 0
        while len(chosen) < n1:
            if not pool:
                pool = [r for r in range(repairs) for _ in range(per_row)]
            idx = int(rng.integers(len(pool)))
            r = pool[idx]
            if r in chosen:
                misses += 1
                if misses < 64:
                    continue
                # Pool is stuck on rows this column already uses
                r = int(rng.choice([x for x in range(repairs) if x not in chosen]))
            else:
                pool[idx] = pool[-1]
                pool.pop()
            chosen.add(r)
        for r in sorted(chosen):
            rows[r].append(i)

    generator = [1 << i for i in range(k)]
    accumulated = 0
    check_rows = []
    for j in range(repairs):
        row_mask = 0
        for i in rows[j]:
            row_mask |= 1 << i
        accumulated ^= row_mask
        generator.append(accumulated)
        staircase = (k + j - 1, k + j) if j else (k,)
        check_rows.append(tuple(rows[j]) + staircase)
    return CodeMatrices(spec, tuple(generator), tuple(check_rows))


def build_staircase(k: int, rate: Fraction, n1: int = 5, seed: int = 0) -> Tuple[CodeSpec, CodeMatrices]:
    """Regular repeat-accumulate code: A of column weight n1, U double-diagonal"""
    if n1 < 3:
        raise ConstructionError(f"Source degree n1 must be at least 3, got {n1}")
    rate = Fraction(rate)
    repairs = _repair_count(k, rate)
    if repairs < n1:
        raise ConstructionError(f"{repairs} repair rows cannot hold source degree {n1}")
    spec = CodeSpec(family=CodeFamily.STAIRCASE, k=k, n=k + repairs, rate=rate, n1=n1, seed=seed)
    matrices = _staircase_matrices(spec)
    logger.info("Built LDPC-Staircase code k=%d n=%d N1=%d", k, spec.n, n1)
    return spec, matrices


# ==================== Windowed Erasure ====================

def windowed_geometry(k: int, log_base: str = "e") -> Tuple[int, int]:
    """(window width ceil(2 sqrt k), ones per column ceil(2 log k))"""
    width = math.ceil(2 * math.sqrt(k))
    ones = math.ceil(2 * LOG_BASES[log_base](k))
    return width, min(ones, width)


def _windowed_matrices(spec: CodeSpec) -> CodeMatrices:
    """
    Every encoding symbol draws a window start uniformly from the k sources.
    The start source is always included and the other ones - 1 sources sit at
    distinct offsets inside the window, wrapping past source k - 1 to source 0.
    """
    k, n = spec.k, spec.n
    width, ones = windowed_geometry(k, spec.log_base)
    width = min(width, k)
    ones = min(ones, width)
    rng = np.random.default_rng(spec.seed)
    starts = rng.integers(0, k, size=n)
    generator = []
    for esi in range(n):
        offsets = 1 + rng.choice(width - 1, size=ones - 1, replace=False)
        mask = 1 << int(starts[esi])
        for offset in offsets:
            mask |= 1 << ((int(starts[esi]) + int(offset)) % k)
        generator.append(mask)
    return CodeMatrices(spec, tuple(generator))


def build_windowed(k: int, rate: Fraction, seed: int = 0, log_base: str = "e") -> Tuple[CodeSpec, CodeMatrices]:
    """Non-systematic windowed code; decodable by ML only"""
    if k < 16:
        raise ConstructionError(f"Windowed codes need k >= 16, got {k}")
    if log_base not in LOG_BASES:
        raise ConstructionError(f"Unknown log base {log_base!r}")
    rate = Fraction(rate)
    n = k + _repair_count(k, rate)
    spec = CodeSpec(family=CodeFamily.WINDOWED, k=k, n=n, rate=rate, seed=seed, log_base=log_base)
    matrices = _windowed_matrices(spec)
    logger.info("Built Windowed code k=%d n=%d window=%d ones=%d", k, n, *windowed_geometry(k, log_base))
    return spec, matrices


def build_from_params(params: CodeParams, settings: Optional[BandFecSettings] = None) -> Tuple[CodeSpec, CodeMatrices]:
    rate = params.fraction
    if params.family == CodeFamily.BAND:
        u = parse_poly(params.u) if params.u else None
        return default_band_spec(params.k, rate, params.B, u, params.schedule, params.seed, settings)
    if params.family == CodeFamily.STAIRCASE:
        return build_staircase(params.k, rate, params.n1, params.seed)
    return build_windowed(params.k, rate, params.seed, params.log_base)


# ==================== Checks ====================

def verify_orthogonality(code: CodeMatrices) -> bool:
    """G * H^T == 0 over GF(2), checked row of G by row of G"""
    if code.check_rows is None:
        raise ValueError("Code has no parity-check matrix")
    k = code.k
    repairs_of: List[List[int]] = [[] for _ in range(k)]
    for esi in code.repair_esis:
        for i in iter_bits(code.generator[esi]):
            repairs_of[i].append(esi)
    for i in range(k):
        parity: Counter = Counter()
        for slot in [i] + repairs_of[i]:
            for r in code.symbol_checks[slot]:
                parity[r] ^= 1
        if any(parity.values()):
            logger.warning("Row %d of G is not orthogonal to H", i)
            return False
    return True


# ==================== Row reweighting ====================

@dataclass
class ReweightReport:
    spec: CodeSpec
    deviation: int
    swaps: int = 0
    column_weights: Tuple[int, ...] = field(default=())


def _row_contributions(spec: CodeSpec, i: int, poly: Gf2Poly) -> List[int]:
    start = spec.row_polys[i][1]
    return [start + e for e in poly_mul(spec.u, poly).exponents if start + e < spec.repairs]


def check_row_weights(spec: CodeSpec) -> np.ndarray:
    """Weight of every row of H = (A | U)"""
    weights = np.zeros(spec.repairs, dtype=np.int64)
    for i, (poly, _) in enumerate(spec.row_polys):
        weights[_row_contributions(spec, i, poly)] += 1
    for j in range(spec.repairs):
        weights[j] += sum(1 for t in spec.u.exponents if t <= j)
    return weights


def histogram_deviation(hist: Mapping[int, int], target: Mapping[int, int]) -> int:
    keys = set(hist) | set(target)
    return sum(abs(hist.get(w, 0) - target.get(w, 0)) for w in keys) // 2


def regular_target(spec: CodeSpec) -> Dict[int, int]:
    """Most regular row-weight histogram with the same total weight"""
    total = int(check_row_weights(spec).sum())
    low, extra = divmod(total, spec.repairs)
    target = {low: spec.repairs - extra}
    if extra:
        target[low + 1] = extra
    return target


def reweight_rows(
    spec: CodeSpec,
    target: Mapping[int, int],
    iterations: int = 2000,
    seed: int = 0,
) -> ReweightReport:
    """
    Move the row-weight histogram of H toward target by greedy swaps.

    Two kinds of move keep every column weight of A: exchanging the
    polynomials of two interior rows whose products u*m have the same
    weight, and replacing a row's polynomial by another candidate of the
    same product weight. Only untruncated interior rows move.
    """
    if spec.family != CodeFamily.BAND:
        raise ValueError("Row reweighting applies to band codes only")
    weights = check_row_weights(spec)
    hist = Counter(int(w) for w in weights)
    best = histogram_deviation(hist, target)
    assignment = list(spec.assignment)
    product_weight = [poly_mul(spec.u, m).weight for m in spec.candidates]
    movable = [i for i in range(spec.k) if not spec.is_edge_row(i) and not spec.is_truncated(i)]
    by_weight: Dict[int, List[int]] = {}
    for idx, w in enumerate(product_weight):
        by_weight.setdefault(w, []).append(idx)
    rng = np.random.default_rng(seed)
    swaps = 0

    def apply(rows: List[int], delta: int) -> None:
        for j in rows:
            hist[int(weights[j])] -= 1
            weights[j] += delta
            hist[int(weights[j])] += 1

    for _ in range(iterations):
        if best == 0 or len(movable) < 2:
            break
        i = movable[int(rng.integers(len(movable)))]
        if rng.random() < 0.5:
            j = movable[int(rng.integers(len(movable)))]
            old = {i: assignment[i], j: assignment[j]}
            if i == j or product_weight[old[i]] != product_weight[old[j]] or old[i] == old[j]:
                continue
            new = {i: old[j], j: old[i]}
        else:
            peers = by_weight[product_weight[assignment[i]]]
            choice = peers[int(rng.integers(len(peers)))]
            if choice == assignment[i]:
                continue
            old = {i: assignment[i]}
            new = {i: choice}
        for row, idx in old.items():
            apply(_row_contributions(spec, row, spec.candidates[idx]), -1)
        for row, idx in new.items():
            apply(_row_contributions(spec, row, spec.candidates[idx]), +1)
        deviation = histogram_deviation(hist, target)
        if deviation < best:
            best = deviation
            swaps += 1
            for row, idx in new.items():
                assignment[row] = idx
        else:
            for row, idx in new.items():
                apply(_row_contributions(spec, row, spec.candidates[idx]), -1)
            for row, idx in old.items():
                apply(_row_contributions(spec, row, spec.candidates[idx]), +1)

    updated = replace(spec, assignment=tuple(assignment))
    column_weights = tuple(poly_mul(updated.u, m).weight for m, _ in updated.row_polys)
    logger.info("Row reweighting: %d accepted moves, residual deviation %d", swaps, best)
    return ReweightReport(updated, best, swaps, column_weights)


# ==================== Spec text format ====================

def format_spec(spec: CodeSpec) -> str:
    lines = [
        SPEC_HEADER,
        f"family: {spec.family.value}",
        f"k: {spec.k}",
        f"n: {spec.n}",
        f"rate: {spec.rate}",
        f"seed: {spec.seed}",
    ]
    if spec.family == CodeFamily.BAND:
        lines += [
            f"B: {spec.B}",
            f"u: {format_poly(spec.u)}",
            f"offsets: {','.join(str(f) for f in spec.offsets)}",
            f"schedule: {spec.schedule.value}",
        ]
        lines += [f"candidate: {format_poly(m)}" for m in spec.candidates]
        lines += [f"edge: {format_poly(m)}" for m in spec.edge_candidates]
        lines.append(f"assignment: {','.join(str(a) for a in spec.assignment)}")
    elif spec.family == CodeFamily.STAIRCASE:
        lines.append(f"n1: {spec.n1}")
    else:
        lines.append(f"log_base: {spec.log_base}")
    return "\n".join(lines) + "\n"


def _int_list(value: str) -> Tuple[int, ...]:
    return tuple(int(x) for x in value.split(",")) if value.strip() else ()


def parse_spec(text: str) -> CodeSpec:
    fields: Dict[str, str] = {}
    candidates: List[Gf2Poly] = []
    edges: List[Gf2Poly] = []
    for number, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise SpecFormatError(f"Line {number}: expected 'key: value', got {line!r}")
        key, value = key.strip(), value.strip()
        if key == "candidate":
            candidates.append(parse_poly(value))
        elif key == "edge":
            edges.append(parse_poly(value))
        elif key in fields:
            raise SpecFormatError(f"Line {number}: duplicate key {key!r}")
        else:
            fields[key] = value

    try:
        family = CodeFamily(fields["family"])
        k, n = int(fields["k"]), int(fields["n"])
        rate = parse_rate(fields["rate"])
        seed = int(fields.get("seed", "0"))
        if family == CodeFamily.BAND:
            spec = CodeSpec(
                family=family,
                k=k,
                n=n,
                rate=rate,
                B=int(fields["B"]),
                u=parse_poly(fields["u"]),
                candidates=tuple(candidates),
                edge_candidates=tuple(edges),
                offsets=_int_list(fields["offsets"]),
                schedule=Schedule(fields["schedule"]),
                assignment=_int_list(fields["assignment"]),
                seed=seed,
            )
        elif family == CodeFamily.STAIRCASE:
            spec = CodeSpec(family=family, k=k, n=n, rate=rate, n1=int(fields["n1"]), seed=seed)
        else:
            spec = CodeSpec(family=family, k=k, n=n, rate=rate, seed=seed, log_base=fields.get("log_base", "e"))
    except KeyError as e:
        raise SpecFormatError(f"Missing field {e.args[0]!r}")
    except ValueError as e:
        raise SpecFormatError(str(e))

    if n != k + _repair_count(k, rate):
        raise SpecFormatError(f"n={n} does not match k={k} at rate {rate}")
    if family == CodeFamily.BAND:
        if len(spec.assignment) != k:
            raise SpecFormatError(f"assignment lists {len(spec.assignment)} rows, expected {k}")
        for i, idx in enumerate(spec.assignment):
            pool = spec.edge_candidates if spec.is_edge_row(i) else spec.candidates
            if not 0 <= idx < len(pool):
                raise SpecFormatError(f"assignment of row {i} points outside its candidate pool")
        if not spec.offsets or any(f < 0 for f in spec.offsets):
            raise SpecFormatError("offsets must be a non-empty list of non-negative integers")
        for i, (poly, start) in enumerate(spec.row_polys):
            if start < 0 or start + poly.degree >= spec.repairs:
                raise SpecFormatError(f"Row {i} does not fit in the {spec.repairs} repair columns")
    return spec


def spec_hash(spec: CodeSpec) -> bytes:
    """Stable 64-bit hash of the canonical spec text"""
    return hashlib.blake2b(format_spec(spec).encode(), digest_size=8).digest()
