"""Shared fixtures: small codes of every family and seeded generators"""

from fractions import Fraction

import numpy as np
import pytest

from bandfec.codec import SymbolBlock, encode
from bandfec.construct import build_band, build_staircase, build_windowed
from bandfec.gf2poly import Gf2Poly, find_candidates

HALF = Fraction(1, 2)
U_SMALL = Gf2Poly.of(0, 1, 3)


def small_pools(u=U_SMALL, B=16):
    pool = find_candidates(u, B - 1, 5, 12, min_degree=B - 4, min_product_weight=3)
    edges = find_candidates(u, B // 2, 5, 6, min_degree=B // 2 - 1, min_product_weight=3)
    return pool, edges


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def band_code():
    pool, edges = small_pools()
    _, code = build_band(64, HALF, 16, U_SMALL, pool, edges, seed=3)
    return code


@pytest.fixture(scope="session")
def tiny_band_code():
    """k=6, n=12: small enough to enumerate every erasure pattern"""
    candidates = [Gf2Poly.of(0, 1, 2, 3), Gf2Poly.of(0, 2)]
    edges = [Gf2Poly.of(0, 1), Gf2Poly.of(0)]
    _, code = build_band(6, HALF, 4, Gf2Poly.of(0, 1), candidates, edges)
    return code


@pytest.fixture(scope="session")
def staircase_code():
    _, code = build_staircase(64, HALF, n1=3, seed=5)
    return code


@pytest.fixture(scope="session")
def windowed_code():
    _, code = build_windowed(64, HALF, seed=7)
    return code


def encoded_block(code, symbol_size=16, seed=99):
    gen = np.random.default_rng(seed)
    sources = gen.integers(0, 256, size=(code.k, symbol_size), dtype=np.uint8)
    return encode(code, SymbolBlock.from_sources(code, sources))


def multiply(dense, x):
    """dense (0/1) times symbol rows x over GF(2)"""
    out = np.zeros((dense.shape[0], x.shape[1]), dtype=np.uint8)
    for r, row in enumerate(dense):
        cols = np.flatnonzero(row)
        if cols.size:
            out[r] = np.bitwise_xor.reduce(x[cols], axis=0)
    return out
