import io

import numpy as np
import pytest

from bandfec.schemas import CodeFamily, CodeParams, DecoderKind, ExperimentConfig, TrialRecord
from bandfec.sim import (
    CSV_HEADER,
    decoding_threshold,
    full_rank_experiment,
    overhead_experiment,
    overhead_trial,
    summarize,
    throughput_experiment,
    trial_seed,
    write_overhead_summary,
    write_records,
    write_throughput_summary,
)
from conftest import HALF

STAIRCASE_PARAMS = CodeParams(family=CodeFamily.STAIRCASE, k=64, n1=3, seed=5)


def staircase_config(**overrides):
    values = dict(code=STAIRCASE_PARAMS, trials=6, symbol_size=8, seed=42)
    values.update(overrides)
    return ExperimentConfig(**values)


def test_trial_seeds_are_stable_and_distinct():
    assert trial_seed(1, 0) == trial_seed(1, 0)
    seeds = {trial_seed(1, t) for t in range(100)}
    assert len(seeds) == 100
    assert trial_seed(1, 0) != trial_seed(2, 0)


@pytest.mark.parametrize("decoder", [DecoderKind.ITERATIVE, DecoderKind.ML, DecoderKind.HYBRID])
def test_sources_first_means_no_overhead(band_code, decoder):
    record = overhead_trial(band_code, decoder, seed=0, order=list(range(band_code.n)))
    assert record.success
    assert record.symbols_needed == band_code.k
    assert record.overhead == 0


def test_ml_never_needs_more_than_iterative(band_code, staircase_code):
    for code in (band_code, staircase_code):
        for t in range(10):
            seed = trial_seed(3, t)
            ml = overhead_trial(code, DecoderKind.ML, seed, t)
            it = overhead_trial(code, DecoderKind.ITERATIVE, seed, t)
            assert ml.success and it.success
            assert code.k <= ml.symbols_needed <= it.symbols_needed <= code.n


def test_threshold_is_where_decoding_starts_to_work(band_code):
    order = np.random.default_rng(2).permutation(band_code.n)
    needed = decoding_threshold(band_code, DecoderKind.ML, order)
    assert needed is not None
    assert needed >= band_code.k
    assert decoding_threshold(band_code, DecoderKind.ML, order[: needed - 1]) is None


def test_windowed_has_no_iterative_threshold(windowed_code):
    with pytest.raises(ValueError):
        overhead_trial(windowed_code, DecoderKind.ITERATIVE, seed=1)
    record = overhead_trial(windowed_code, DecoderKind.ML, seed=1)
    assert record.code_family == CodeFamily.WINDOWED
    assert record.B is None


def test_cost_is_measured_at_the_threshold(band_code):
    cfg = ExperimentConfig(code=CodeParams(k=64, B=16), trials=4, symbol_size=8, seed=9)
    records, summary = overhead_experiment(cfg, code=band_code)
    assert len(records) == 4
    assert all(r.success for r in records)
    assert all(r.decode_ns == 0 for r in records)
    assert summary.failures == 0
    assert summary.mean_row_ops == pytest.approx(np.mean([r.row_ops for r in records]))


def test_overhead_csv_is_reproducible():
    outputs = []
    for _ in range(2):
        records, summary = overhead_experiment(staircase_config())
        out = io.StringIO()
        write_records(out, records)
        outputs.append(out.getvalue())
    assert outputs[0] == outputs[1]
    lines = outputs[0].splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 7
    assert lines[1].startswith("staircase,64,128,,hybrid,0,")


def test_summary_rows(staircase_code):
    records, summary = overhead_experiment(staircase_config(trials=3), code=staircase_code)
    out = io.StringIO()
    write_overhead_summary(out, staircase_code, DecoderKind.HYBRID, summary)
    line = out.getvalue().strip()
    assert line.startswith("#summary,staircase,64,128,,hybrid,trials=3,mean=")
    assert "failures=0" in line
    assert summary.p50 <= summary.p90 <= summary.p99


def test_progress_is_reported(staircase_code):
    calls = []
    overhead_experiment(staircase_config(trials=5), code=staircase_code, progress=lambda d, t: calls.append((d, t)))
    assert calls == [(d, 5) for d in range(1, 6)]


def test_throughput_without_loss_always_decodes(staircase_code):
    cfg = staircase_config(trials=3, loss_grid=[0.0, 0.2])
    records, points = throughput_experiment(cfg, code=staircase_code)
    assert len(records) == 6
    assert [p.loss_prob for p in points] == [0.0, 0.2]
    lossless = points[0]
    assert lossless.decoded == 3 and lossless.failures == 0
    assert lossless.mean_bitrate_mbps > 0
    assert all(r.symbols_needed == staircase_code.n for r in records if r.loss_prob == 0.0)

    out = io.StringIO()
    write_throughput_summary(out, staircase_code, cfg.decoder, points)
    rows = out.getvalue().splitlines()
    assert len(rows) == 2
    assert rows[0].startswith("#summary,staircase,64,128,,hybrid,loss_prob=0.0,decoded=3,failures=0,")


def test_throughput_records_count_symbols_from_k(staircase_code):
    cfg = staircase_config(trials=4, loss_grid=[0.3, 0.7])
    records, points = throughput_experiment(cfg, code=staircase_code)
    k, n = staircase_code.k, staircase_code.n
    heavy = [r for r in records if r.loss_prob == 0.7]
    assert points[1].failures == 4
    for r in records:
        assert k <= r.symbols_needed <= n
        assert r.overhead >= 0
        if r.success:
            assert r.symbols_needed == r.symbols_received
    assert all(r.symbols_needed == n and r.symbols_received < k for r in heavy)


def test_trial_record_rejects_fewer_than_k_symbols():
    with pytest.raises(ValueError):
        TrialRecord(
            code_family=CodeFamily.BAND, k=64, n=128, decoder=DecoderKind.ML,
            trial=0, seed=0, symbols_needed=40, overhead=0.0,
        )


def test_summary_of_only_failures_has_no_mean(staircase_code):
    failed = [
        TrialRecord(
            code_family=CodeFamily.STAIRCASE, k=64, n=128, decoder=DecoderKind.ML,
            trial=t, seed=t, symbols_needed=128, overhead=1.0, success=False,
        )
        for t in range(3)
    ]
    summary = summarize(failed)
    assert summary.failures == 3
    assert summary.mean is None and summary.p99 is None

    out = io.StringIO()
    write_overhead_summary(out, staircase_code, DecoderKind.ML, summary)
    assert ",mean=,std=,p50=,p90=,p99=,failures=3," in out.getvalue()


def test_throughput_needs_a_loss_grid(staircase_code):
    with pytest.raises(ValueError):
        throughput_experiment(staircase_config(), code=staircase_code)


def test_loss_grid_is_validated():
    with pytest.raises(ValueError):
        staircase_config(loss_grid=[1.0])


def test_full_rank_experiment():
    result = full_rank_experiment(64, HALF, trials=20, seed=1)
    assert result.k == 64 and result.trials == 20
    assert 0 <= result.windowed_full_rank <= 20
    assert 0 <= result.random_full_rank <= 20
    assert 0.0 <= result.windowed_fraction <= 1.0
    again = full_rank_experiment(64, HALF, trials=20, seed=1)
    assert again == result


# ==================== Long-running reproductions ====================

def mean_overhead(params, decoder, trials, seed=1):
    cfg = ExperimentConfig(code=params, trials=trials, decoder=decoder, measure_cost=False, seed=seed)
    _, summary = overhead_experiment(cfg)
    assert summary.failures == 0
    return summary.mean


def mean_bitrate(params, decoder, loss, trials=10):
    cfg = ExperimentConfig(code=params, trials=trials, decoder=decoder, loss_grid=[loss], symbol_size=1024, seed=5)
    _, points = throughput_experiment(cfg)
    assert points[0].decoded > 0
    return points[0].mean_bitrate_mbps


@pytest.mark.bench
def test_band_ml_overhead_at_k1000():
    band_100 = mean_overhead(CodeParams(k=1000, B=100), DecoderKind.ML, trials=1000)
    band_200 = mean_overhead(CodeParams(k=1000, B=200), DecoderKind.ML, trials=1000)
    assert band_200 <= 0.020
    assert band_100 <= 0.045
    assert band_200 < band_100


@pytest.mark.bench
def test_ml_overhead_at_k2000():
    band = mean_overhead(CodeParams(k=2000, B=200), DecoderKind.ML, trials=1000)
    staircase = mean_overhead(CodeParams(family=CodeFamily.STAIRCASE, k=2000, n1=5), DecoderKind.ML, trials=1000)
    assert band <= 0.020
    assert abs(staircase - 0.0115) <= 0.005


@pytest.mark.bench
@pytest.mark.parametrize("k, staircase_reference", [(1000, 0.1424), (2000, 0.1395)])
def test_iterative_overhead(k, staircase_reference):
    band = mean_overhead(CodeParams(k=k, B=200), DecoderKind.ITERATIVE, trials=200)
    staircase = mean_overhead(CodeParams(family=CodeFamily.STAIRCASE, k=k, n1=5), DecoderKind.ITERATIVE, trials=200)
    assert 0.12 <= band <= 0.22
    assert abs(staircase - staircase_reference) <= 0.02


@pytest.mark.bench
def test_windowed_full_rank_tracks_random_matrices():
    result = full_rank_experiment(1024, HALF, trials=500, seed=3)
    assert abs(result.windowed_fraction - result.random_fraction) <= 0.1


@pytest.mark.bench
def test_band_ml_decoding_is_fastest_at_k2000():
    band = mean_bitrate(CodeParams(k=2000, B=200), DecoderKind.ML, loss=0.4)
    windowed = mean_bitrate(CodeParams(family=CodeFamily.WINDOWED, k=2000), DecoderKind.ML, loss=0.4)
    staircase = mean_bitrate(CodeParams(family=CodeFamily.STAIRCASE, k=2000, n1=5), DecoderKind.ML, loss=0.4)
    assert band > 1.3 * windowed
    assert band > 2 * staircase


@pytest.mark.bench
def test_band_iterative_decoding_keeps_up_with_staircase():
    band = mean_bitrate(CodeParams(k=2000, B=200), DecoderKind.ITERATIVE, loss=0.35)
    staircase = mean_bitrate(CodeParams(family=CodeFamily.STAIRCASE, k=2000, n1=5), DecoderKind.ITERATIVE, loss=0.35)
    assert band * 2 >= staircase
