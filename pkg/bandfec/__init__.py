"""LDPC-Band packet-erasure codes with iterative, ML and hybrid decoding"""

from bandfec.codec import SymbolBlock, decode, encode, hybrid_decode, iterative_decode, ml_decode
from bandfec.construct import (
    CodeMatrices,
    CodeSpec,
    build_band,
    build_code,
    build_staircase,
    build_windowed,
    default_band_spec,
)
from bandfec.gf2poly import Gf2Poly, find_candidates

__version__ = "0.1.0"
