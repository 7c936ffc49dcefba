from collections import Counter
from itertools import product

import numpy as np
import pytest

from bandfec.codec import (
    PeelingTracker,
    Recovery,
    SymbolBlock,
    check_consistency,
    decode,
    encode,
    hybrid_decode,
    iterative_decode,
    ml_decode,
    received_block,
    reduced_system,
)
from bandfec.construct import CodeMatrices, CodeSpec, default_band_spec, mask_to_indices
from bandfec.gf2linalg import BandProfile, banded_solve, dense_solve, rank
from bandfec.schemas import CodeFamily, DecoderKind
from conftest import HALF, encoded_block, multiply


def stopping_set_code():
    """k=3: every check row holds at least two sources, yet the repairs determine them"""
    spec = CodeSpec(CodeFamily.BAND, k=3, n=6, rate=HALF)
    generator = (0b001, 0b010, 0b100, 0b011, 0b110, 0b111)
    check_rows = ((0, 1, 3), (1, 2, 4), (0, 1, 2, 5))
    return CodeMatrices(spec, generator, check_rows)


def test_trivial_band_repairs(tiny_band_code):
    encoded = encoded_block(tiny_band_code)
    data = encoded.data
    k = tiny_band_code.k
    # repair 0 covers sources 0, 1 and 2
    assert np.array_equal(data[k], data[0] ^ data[1] ^ data[2])
    assert np.array_equal(data[k + 2], data[2])
    assert encoded.present.all()
    assert check_consistency(tiny_band_code, encoded)


@pytest.mark.parametrize("fixture", ["band_code", "staircase_code", "tiny_band_code"])
def test_zero_sources_give_zero_repairs(fixture, request):
    code = request.getfixturevalue(fixture)
    block = SymbolBlock.from_sources(code, np.zeros((code.k, 8), dtype=np.uint8))
    encoded = encode(code, block)
    assert not encoded.data.any()


@pytest.mark.parametrize("fixture", ["band_code", "staircase_code"])
def test_encoding_satisfies_every_check(fixture, request):
    code = request.getfixturevalue(fixture)
    encoded = encoded_block(code)
    for row in code.check_rows:
        assert not np.bitwise_xor.reduce(encoded.data[list(row)], axis=0).any()
    assert check_consistency(code, encoded)


def test_encode_needs_exactly_the_sources(band_code):
    encoded = encoded_block(band_code)
    with pytest.raises(ValueError):
        encode(band_code, encoded)
    with pytest.raises(ValueError):
        SymbolBlock.from_sources(band_code, np.zeros((3, 4), dtype=np.uint8))


def test_receive_rejects_duplicates_and_wrong_size(band_code):
    block = SymbolBlock.empty(band_code, 4)
    assert block.receive(5, b"abcd")
    assert not block.receive(5, b"wxyz")
    assert bytes(block.data[5]) == b"abcd"
    with pytest.raises(ValueError):
        block.receive(6, b"abc")


@pytest.mark.parametrize("decoder", list(DecoderKind))
def test_nothing_lost_decodes_trivially(band_code, decoder):
    encoded = encoded_block(band_code)
    block = received_block(band_code, encoded, range(band_code.n))
    outcome = decode(band_code, block, decoder)
    assert outcome.success
    assert outcome.recovered_count == 0


def test_single_erasure_is_peeled(band_code):
    encoded = encoded_block(band_code)
    esis = [e for e in range(band_code.n) if e != 10]
    block = received_block(band_code, encoded, esis)
    outcome = decode(band_code, block, DecoderKind.ITERATIVE)
    assert outcome.success
    assert outcome.iterative_recovered == 1
    assert block.recovered_by[10] == Recovery.ITERATIVE
    assert np.array_equal(block.data[10], encoded.data[10])


def test_stopping_set_needs_ml():
    code = stopping_set_code()
    encoded = encoded_block(code, symbol_size=8)
    assert check_consistency(code, encoded)
    repairs_only = [3, 4, 5]

    block = received_block(code, encoded, repairs_only)
    peeled = iterative_decode(code, block)
    assert peeled.missing_sources == 3
    assert peeled.recovered == []
    outcome = decode(code, received_block(code, encoded, repairs_only), DecoderKind.ITERATIVE)
    assert not outcome.success
    assert outcome.unsolvable == 3

    block = received_block(code, encoded, repairs_only)
    outcome = hybrid_decode(code, block)
    assert outcome.success
    assert outcome.iterative_recovered == 0
    assert outcome.ml_recovered == 3
    assert np.array_equal(block.data[:3], encoded.data[:3])
    assert (block.recovered_by[:3] == Recovery.ML).all()


def test_all_sources_lost_at_rate_half(band_code):
    encoded = encoded_block(band_code)
    block = received_block(band_code, encoded, band_code.repair_esis)
    matrix, rhs, missing, ops = reduced_system(band_code, block)
    assert (matrix.rows, matrix.cols) == (band_code.n - band_code.k, band_code.k)
    assert ops == 0
    assert list(missing) == list(range(band_code.k))

    full_rank = rank(matrix) == band_code.k
    outcome = ml_decode(band_code, block)
    assert outcome.success == full_rank
    if full_rank:
        assert np.array_equal(block.data[: band_code.k], encoded.data[: band_code.k])


def test_banded_and_dense_solvers_agree(band_code):
    encoded = encoded_block(band_code)
    gen = np.random.default_rng(5)
    for _ in range(10):
        keep = np.flatnonzero(gen.random(band_code.n) >= 0.35)
        a = received_block(band_code, encoded, keep)
        b = received_block(band_code, encoded, keep)
        ra = ml_decode(band_code, a, solver="banded")
        rb = ml_decode(band_code, b, solver="dense")
        assert ra.success == rb.success
        if ra.success:
            assert np.array_equal(a.data[: band_code.k], b.data[: band_code.k])


def test_unknown_solver_is_rejected(band_code):
    block = received_block(band_code, encoded_block(band_code), range(band_code.k, band_code.n))
    with pytest.raises(ValueError):
        ml_decode(band_code, block, solver="magic")


def test_hybrid_matches_ml_on_every_pattern(tiny_band_code):
    code = tiny_band_code
    encoded = encoded_block(code, symbol_size=4)
    for pattern in product((False, True), repeat=code.n):
        esis = [e for e, kept in enumerate(pattern) if kept]
        peel = decode(code, received_block(code, encoded, esis), DecoderKind.ITERATIVE)
        ml_block = received_block(code, encoded, esis)
        ml = decode(code, ml_block, DecoderKind.ML)
        hybrid_block = received_block(code, encoded, esis)
        hybrid = decode(code, hybrid_block, DecoderKind.HYBRID)

        assert hybrid.success == ml.success
        if peel.success:
            assert ml.success
        if ml.success:
            assert np.array_equal(ml_block.data[: code.k], encoded.data[: code.k])
            assert np.array_equal(hybrid_block.data[: code.k], encoded.data[: code.k])


@pytest.mark.parametrize("fixture", ["band_code", "staircase_code"])
def test_hybrid_matches_ml_on_random_losses(fixture, request):
    code = request.getfixturevalue(fixture)
    encoded = encoded_block(code)
    gen = np.random.default_rng(21)
    for _ in range(25):
        keep = np.flatnonzero(gen.random(code.n) >= 0.4)
        peel = decode(code, received_block(code, encoded, keep), DecoderKind.ITERATIVE)
        ml = decode(code, received_block(code, encoded, keep), DecoderKind.ML)
        block = received_block(code, encoded, keep)
        hybrid = decode(code, block, DecoderKind.HYBRID)
        assert hybrid.success == ml.success
        assert ml.success or not peel.success
        if hybrid.success:
            assert np.array_equal(block.data[: code.k], encoded.data[: code.k])
            assert hybrid.iterative_recovered + hybrid.ml_recovered == hybrid.recovered_count


def test_peeling_result_does_not_depend_on_order(band_code):
    encoded = encoded_block(band_code)
    keep = np.flatnonzero(np.random.default_rng(8).random(band_code.n) >= 0.3)
    outcomes = []
    for seed in (None, 1, 2, 3):
        block = received_block(band_code, encoded, keep)
        rng = None if seed is None else np.random.default_rng(seed)
        iterative_decode(band_code, block, rng, stop_when_sources_known=False)
        outcomes.append(block.present.copy())
    for present in outcomes[1:]:
        assert np.array_equal(present, outcomes[0])


@pytest.mark.parametrize("fixture", ["band_code", "staircase_code"])
def test_tracker_threshold_matches_real_peeling(fixture, request):
    code = request.getfixturevalue(fixture)
    encoded = encoded_block(code)
    order = np.random.default_rng(17).permutation(code.n)
    tracker = PeelingTracker(code)
    threshold = None
    for count, esi in enumerate(order, 1):
        tracker.add(code.esi_slot(int(esi)))
        if tracker.complete:
            threshold = count
            break
    assert threshold is not None
    block = received_block(code, encoded, order[:threshold])
    assert iterative_decode(code, block).missing_sources == 0
    block = received_block(code, encoded, order[: threshold - 1])
    assert iterative_decode(code, block).missing_sources > 0


def test_more_symbols_never_hurt(band_code):
    encoded = encoded_block(band_code)
    order = np.random.default_rng(31).permutation(band_code.n)
    decodable = False
    for count in range(band_code.k, band_code.n + 1, 4):
        outcome = ml_decode(band_code, received_block(band_code, encoded, order[:count]))
        assert outcome.success or not decodable
        decodable = outcome.success
    assert decodable


def test_windowed_decodes_by_ml_only(windowed_code):
    code = windowed_code
    encoded = encoded_block(code)
    assert encoded.present.all()
    with pytest.raises(ValueError):
        PeelingTracker(code)
    with pytest.raises(ValueError):
        decode(code, received_block(code, encoded, range(code.n)), DecoderKind.ITERATIVE)

    esis = np.random.default_rng(4).choice(code.n, size=80, replace=False)
    block = received_block(code, encoded, esis)
    matrix, _, _, _ = reduced_system(code, block)
    assert (matrix.rows, matrix.cols) == (80, code.k)
    full_rank = rank(matrix) == code.k
    outcome = decode(code, block, DecoderKind.HYBRID)
    assert outcome.success == full_rank
    if full_rank:
        assert np.array_equal(block.data[: code.k], encoded.data[: code.k])


def test_windowed_encoding_matches_generator(windowed_code):
    encoded = encoded_block(windowed_code)
    k = windowed_code.k
    for esi in (0, 17, windowed_code.n - 1):
        sources = [i for i in range(k) if (windowed_code.generator[esi] >> i) & 1]
        expected = np.bitwise_xor.reduce(encoded.data[sources], axis=0)
        assert np.array_equal(encoded.data[windowed_code.esi_slot(esi)], expected)


def test_consistency_check_catches_corruption(band_code):
    encoded = encoded_block(band_code)
    block = received_block(band_code, encoded, range(band_code.n))
    block.data[band_code.k + 3, 0] ^= 0xFF
    if any(band_code.generator[band_code.k + 3] >> i & 1 for i in range(band_code.k)):
        assert not check_consistency(band_code, block)


@pytest.mark.parametrize("fixture", ["band_code", "staircase_code", "windowed_code"])
def test_reduced_system_matches_the_generator(fixture, request):
    code = request.getfixturevalue(fixture)
    encoded = encoded_block(code, symbol_size=8)
    keep = np.flatnonzero(np.random.default_rng(12).random(code.n) >= 0.4)
    block = received_block(code, encoded, keep)
    matrix, rhs, missing, ops = reduced_system(code, block)

    k = code.k
    known = np.flatnonzero(block.present[:k])
    equations = [esi for esi in code.repair_esis if block.present[code.esi_slot(esi)]]
    dense = np.zeros((len(equations), k), dtype=np.uint8)
    for e, esi in enumerate(equations):
        dense[e, mask_to_indices(code.generator[esi], k)] = 1
    assert np.array_equal(missing, np.flatnonzero(~block.present[:k]))
    assert np.array_equal(matrix.to_dense(), dense[:, missing])
    assert ops == int(dense[:, known].sum())
    # rhs holds exactly the missing sources' share of each equation
    assert np.array_equal(rhs, multiply(dense[:, missing], encoded.data[missing]))


def band_systems(k, trials, seed, loss=0.45):
    """Reduced ML systems of a B=200 Band code under independent symbol loss"""
    _, code = default_band_spec(k, HALF, 200)
    encoded = encoded_block(code, symbol_size=4)
    gen = np.random.default_rng(seed)
    for _ in range(trials):
        keep = np.flatnonzero(gen.random(code.n) >= loss)
        yield reduced_system(code, received_block(code, encoded, keep))


@pytest.mark.bench
def test_band_and_dense_solvers_agree_at_k2000():
    for matrix, rhs, missing, _ in band_systems(2000, 100, seed=0):
        work = matrix.copy()
        banded = banded_solve(work, BandProfile.from_matrix(work), rhs.copy())
        dense = dense_solve(matrix.copy(), rhs.copy())
        assert banded.solved == dense.solved
        if banded.solved:
            assert np.array_equal(banded.solution, dense.solution)
        else:
            assert banded.unsolvable == dense.unsolvable


@pytest.mark.bench
def test_band_elimination_grows_linearly_with_k():
    banded_ops = {}
    dense_words = {}
    for k in (2000, 4000):
        ops, words = [], []
        for matrix, rhs, _, _ in band_systems(k, 10, seed=1):
            work = matrix.copy()
            result = banded_solve(work, BandProfile.from_matrix(work), rhs.copy())
            assert result.alpha <= 4
            ops.append(result.row_ops)
            work = matrix.copy()
            dense_solve(work, rhs.copy())
            words.append(work.word_ops)
        banded_ops[k] = np.mean(ops)
        dense_words[k] = np.mean(words)
    assert banded_ops[4000] <= 2.5 * banded_ops[2000]
    assert dense_words[4000] >= 3.5 * dense_words[2000]


@pytest.mark.bench
def test_hybrid_matches_ml_on_ten_thousand_patterns_at_k1000():
    _, code = default_band_spec(1000, HALF, 200)
    encoded = encoded_block(code, symbol_size=2)
    gen = np.random.default_rng(8)
    outcomes = Counter()
    for _ in range(10_000):
        keep = np.flatnonzero(gen.random(code.n) >= gen.uniform(0.44, 0.52))
        ml_block = received_block(code, encoded, keep)
        ml = decode(code, ml_block, DecoderKind.ML)
        hybrid_block = received_block(code, encoded, keep)
        hybrid = decode(code, hybrid_block, DecoderKind.HYBRID)
        assert hybrid.success == ml.success
        outcomes[ml.success] += 1
        for block, outcome in ((ml_block, ml), (hybrid_block, hybrid)):
            assert check_consistency(code, block)
            if outcome.success:
                assert np.array_equal(block.data[: code.k], encoded.data[: code.k])
    assert outcomes[True] and outcomes[False]
