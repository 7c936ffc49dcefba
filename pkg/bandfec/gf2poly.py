"""Polynomials over GF(2) and the candidate-polynomial search.

A polynomial is stored as the sorted tuple of exponents whose coefficient is 1.
Arithmetic goes through the integer form, where bit i holds the coefficient
of x^i, so addition is XOR and multiplication is a carry-less product.
"""

import logging
from bisect import bisect_left
from dataclasses import dataclass
from functools import reduce
from itertools import combinations
from operator import xor
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

from bandfec.errors import SpecFormatError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Gf2Poly:
    exponents: Tuple[int, ...] = ()

    def __post_init__(self):
        previous = -1
        for e in self.exponents:
            if e <= previous:
                raise ValueError(f"Exponents must be strictly increasing and non-negative: {self.exponents}")
            previous = e

    @classmethod
    def of(cls, *exponents: int) -> "Gf2Poly":
        return cls(tuple(sorted(set(exponents))))

    @classmethod
    def from_int(cls, value: int) -> "Gf2Poly":
        if value < 0:
            raise ValueError("Polynomial integers are non-negative")
        return cls(tuple(i for i in range(value.bit_length()) if (value >> i) & 1))

    def to_int(self) -> int:
        value = 0
        for e in self.exponents:
            value |= 1 << e
        return value

    @property
    def weight(self) -> int:
        return len(self.exponents)

    @property
    def degree(self) -> int:
        """Degree of the polynomial; -1 for the zero polynomial"""
        return self.exponents[-1] if self.exponents else -1

    @property
    def is_zero(self) -> bool:
        return not self.exponents

    @property
    def has_constant_term(self) -> bool:
        return bool(self.exponents) and self.exponents[0] == 0

    def __add__(self, other: "Gf2Poly") -> "Gf2Poly":
        return poly_add(self, other)

    def __mul__(self, other: "Gf2Poly") -> "Gf2Poly":
        return poly_mul(self, other)

    def __divmod__(self, other: "Gf2Poly") -> Tuple["Gf2Poly", "Gf2Poly"]:
        q, r = _cldivmod(self.to_int(), other.to_int())
        return Gf2Poly.from_int(q), Gf2Poly.from_int(r)

    def __str__(self) -> str:
        return format_poly(self)


ZERO = Gf2Poly()
ONE = Gf2Poly((0,))


def _clmul(a: int, b: int) -> int:
    if a < b:
        a, b = b, a
    c = 0
    while b:
        if b & 1:
            c ^= a
        a <<= 1
        b >>= 1
    return c


def _cldivmod(a: int, b: int) -> Tuple[int, int]:
    if b == 0:
        raise ZeroDivisionError("division by zero polynomial")
    db = b.bit_length() - 1
    q = 0
    while a and a.bit_length() - 1 >= db:
        shift = a.bit_length() - 1 - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def poly_add(a: Gf2Poly, b: Gf2Poly) -> Gf2Poly:
    """Sum over GF(2): the symmetric difference of the exponent sets"""
    return Gf2Poly(tuple(sorted(set(a.exponents) ^ set(b.exponents))))


def poly_mul(a: Gf2Poly, b: Gf2Poly) -> Gf2Poly:
    """Product over GF(2) (carry-less multiplication)"""
    return Gf2Poly.from_int(_clmul(a.to_int(), b.to_int()))


# ==================== Text format ====================

def format_poly(p: Gf2Poly) -> str:
    """Canonical form: comma-separated increasing exponents ('' for zero)"""
    return ",".join(str(e) for e in p.exponents)


def parse_poly(text: str) -> Gf2Poly:
    text = text.strip()
    if not text:
        return ZERO
    try:
        exponents = [int(part) for part in text.split(",")]
    except ValueError:
        raise SpecFormatError(f"Invalid polynomial exponent list: {text!r}")
    if any(e < 0 for e in exponents):
        raise SpecFormatError(f"Negative exponent in polynomial: {text!r}")
    if sorted(set(exponents)) != exponents:
        raise SpecFormatError(f"Exponents must be strictly increasing: {text!r}")
    return Gf2Poly(tuple(exponents))


def format_poly_list(polys: Iterable[Gf2Poly]) -> str:
    return "".join(format_poly(p) + "\n" for p in polys)


def parse_poly_list(text: str) -> List[Gf2Poly]:
    """One polynomial per line; blank lines and '#' comments are skipped"""
    polys = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            polys.append(parse_poly(line))
    return polys


# ==================== Candidate search ====================

def _residues(u_int: int, count: int) -> List[int]:
    """x^e mod u for e in [0, count)"""
    du = u_int.bit_length() - 1
    if du == 0:
        return [0] * count
    residues = []
    r = 1
    for _ in range(count):
        residues.append(r)
        r <<= 1
        if (r >> du) & 1:
            r ^= u_int
    return residues


def _products(
    weight: int,
    degree: int,
    residues: Sequence[int],
    by_residue: Dict[int, List[int]],
) -> Iterator[int]:
    """Multiples a of u with W(a) = weight, deg(a) = degree and constant term 1"""
    if weight == 1:
        if degree == 0 and residues[0] == 0:
            yield 1
        return
    if degree < weight - 1:
        return
    base = residues[0] ^ residues[degree]
    if weight == 2:
        if base == 0:
            yield 1 | (1 << degree)
        return
    head = 1 | (1 << degree)
    for middle in combinations(range(1, degree), weight - 3):
        target = reduce(xor, (residues[e] for e in middle), base)
        exponents = by_residue.get(target)
        if not exponents:
            continue
        lo = middle[-1] + 1 if middle else 1
        prefix = head
        for e in middle:
            prefix |= 1 << e
        for i in range(bisect_left(exponents, lo), len(exponents)):
            last = exponents[i]
            if last >= degree:
                break
            yield prefix | (1 << last)


def find_candidates(
    u: Gf2Poly,
    max_degree: int,
    max_product_weight: int,
    max_count: int,
    min_degree: int = 0,
    min_product_weight: int = 1,
) -> List[Gf2Poly]:
    """
    Find polynomials m with a low-weight product u(x)m(x).

    Every result has constant term 1, min_degree <= deg(m) <= max_degree and
    min_product_weight <= W(u*m) <= max_product_weight. Results are ordered by
    (product weight, degree, exponents) and truncated to max_count.

    The products a = u*m are enumerated instead of m itself: a is a multiple
    of u exactly when the residues x^e mod u of its exponents XOR to zero, so
    each weight class is walked by fixing all but one middle exponent and
    looking the last one up by residue.
    """
    if u.is_zero or not u.has_constant_term:
        raise ValueError("u(x) must be nonzero with constant term 1")
    if max_degree < 0:
        raise ValueError("max_degree must be non-negative")
    if max_count <= 0:
        return []

    u_int = u.to_int()
    du = u.degree
    residues = _residues(u_int, max_degree + du + 1)
    by_residue: Dict[int, List[int]] = {}
    for e, r in enumerate(residues):
        by_residue.setdefault(r, []).append(e)

    found: List[Gf2Poly] = []
    for weight in range(max(1, min_product_weight), max_product_weight + 1):
        for d_m in range(max(0, min_degree), max_degree + 1):
            batch = []
            for a in _products(weight, d_m + du, residues, by_residue):
                q, r = _cldivmod(a, u_int)
                assert r == 0
                batch.append(Gf2Poly.from_int(q))
            batch.sort(key=lambda p: p.exponents)
            found.extend(batch)
            if len(found) >= max_count:
                logger.debug("Candidate search filled %d results in weight class %d", max_count, weight)
                return found[:max_count]
        logger.debug("Weight class %d done, %d candidates so far", weight, len(found))
    return found


def degree_window(max_degree: int, delta: Optional[int] = None, divisor: int = 8) -> Tuple[int, int]:
    """Degree range [max_degree - delta, max_degree] for full-band rows"""
    if delta is None:
        delta = max_degree // divisor
    return max(0, max_degree - delta), max_degree
