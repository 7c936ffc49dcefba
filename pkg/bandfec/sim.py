"""Monte-Carlo experiments: decoding overhead, decoding throughput, full-rank rate.

Trial t of an experiment with master seed s draws from
default_rng(SeedSequence([s, t])), so any trial can be replayed alone and
results do not depend on how trials are scheduled.
"""

import csv
import logging
import time
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, TextIO, Tuple

import numpy as np

from bandfec.codec import PeelingTracker, SymbolBlock, decode, encode, received_block
from bandfec.construct import CodeMatrices, build_from_params, build_windowed
from bandfec.gf2linalg import EchelonBasis
from bandfec.schemas import (
    DecoderKind,
    ExperimentConfig,
    FullRankResult,
    OverheadSummary,
    ThroughputPoint,
    TrialRecord,
)

logger = logging.getLogger(__name__)

CSV_HEADER = [
    "code_family", "k", "n", "B", "decoder", "trial", "seed",
    "symbols_needed", "overhead", "row_ops", "decode_ns", "loss_prob", "success",
]

ProgressCallback = Callable[[int, int], None]


def trial_seed(master: int, trial: int) -> int:
    """64-bit seed of one trial, derived from (master seed, trial index)"""
    return int(np.random.SeedSequence([master, trial]).generate_state(1, dtype=np.uint64)[0])


def _report_progress(done: int, total: int, progress: Optional[ProgressCallback], label: str) -> None:
    if progress is not None:
        progress(done, total)
    step = max(total // 10, 1)
    if done % step == 0 or done == total:
        logger.info("%s: %d/%d trials", label, done, total)


def random_sources(code: CodeMatrices, symbol_size: int, rng: np.random.Generator) -> SymbolBlock:
    return SymbolBlock.from_sources(code, rng.integers(0, 256, size=(code.k, symbol_size), dtype=np.uint8))


# ==================== Overhead ====================

def decoding_threshold(code: CodeMatrices, decoder: DecoderKind, order: Sequence[int]) -> Optional[int]:
    """
    Number of symbols of order after which decoding first succeeds.

    ML and hybrid succeed on the same received sets, so both use the rank of
    the received generator columns; iterative decoding tracks structural
    peeling. None when even the full order does not decode.
    """
    if decoder == DecoderKind.ITERATIVE:
        tracker = PeelingTracker(code)
        for count, esi in enumerate(order, 1):
            tracker.add(code.esi_slot(int(esi)))
            if tracker.complete:
                return count
        return None

    basis = EchelonBasis()
    for count, esi in enumerate(order, 1):
        basis.add(code.generator[int(esi)])
        if basis.rank == code.k:
            return count
    return None


def overhead_trial(
    code: CodeMatrices,
    decoder: DecoderKind,
    seed: int,
    trial: int = 0,
    encoded: Optional[SymbolBlock] = None,
    timing: bool = False,
    order: Optional[Sequence[int]] = None,
) -> TrialRecord:
    """
    Feed a random permutation of the n symbols until decoding succeeds.

    With encoded symbols given, the block at the threshold is decoded once for
    real to count row operations (and time it when timing is set).
    """
    if order is None:
        order = np.random.default_rng(seed).permutation(code.n)
    needed = decoding_threshold(code, decoder, order)
    success = needed is not None
    symbols = needed if success else code.n

    row_ops = 0
    decode_ns = 0
    if success and encoded is not None:
        block = received_block(code, encoded, order[:symbols])
        started = time.perf_counter_ns()
        outcome = decode(code, block, decoder)
        elapsed = time.perf_counter_ns() - started
        if not outcome.success:
            logger.warning("Trial %d: decoder failed at its own threshold of %d symbols", trial, symbols)
        row_ops = outcome.row_ops
        decode_ns = elapsed if timing else 0

    return TrialRecord(
        code_family=code.family,
        k=code.k,
        n=code.n,
        B=code.spec.B,
        decoder=decoder,
        trial=trial,
        seed=seed,
        symbols_needed=symbols,
        overhead=(symbols - code.k) / code.k,
        row_ops=row_ops,
        decode_ns=decode_ns,
        success=success,
    )


def summarize(records: Sequence[TrialRecord]) -> OverheadSummary:
    """Overhead statistics over successful trials; all None when every trial failed"""
    overheads = np.array([r.overhead for r in records if r.success], dtype=float)
    failures = sum(1 for r in records if not r.success)
    mean_row_ops = float(np.mean([r.row_ops for r in records])) if records else 0.0
    if overheads.size == 0:
        return OverheadSummary(trials=len(records), failures=failures, mean_row_ops=mean_row_ops)
    p50, p90, p99 = np.percentile(overheads, [50, 90, 99])
    return OverheadSummary(
        trials=len(records),
        mean=float(overheads.mean()),
        std=float(overheads.std()),
        p50=float(p50),
        p90=float(p90),
        p99=float(p99),
        failures=failures,
        mean_row_ops=mean_row_ops,
    )


def overhead_experiment(
    cfg: ExperimentConfig,
    code: Optional[CodeMatrices] = None,
    progress: Optional[ProgressCallback] = None,
) -> Tuple[List[TrialRecord], OverheadSummary]:
    if code is None:
        _, code = build_from_params(cfg.code)
    encoded = None
    if cfg.measure_cost or cfg.timing:
        rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
        encoded = encode(code, random_sources(code, cfg.symbol_size, rng))

    records = []
    for t in range(cfg.trials):
        records.append(overhead_trial(code, cfg.decoder, trial_seed(cfg.seed, t), t, encoded, cfg.timing))
        _report_progress(t + 1, cfg.trials, progress, "Overhead")
    summary = summarize(records)
    mean = "n/a" if summary.mean is None else f"{100 * summary.mean:.4f}%"
    logger.info(
        "Overhead %s k=%d %s: mean %s over %d trials, %d failures",
        code.family.value, code.k, cfg.decoder.value, mean, summary.trials, summary.failures,
    )
    return records, summary


# ==================== Throughput ====================

def throughput_experiment(
    cfg: ExperimentConfig,
    code: Optional[CodeMatrices] = None,
    progress: Optional[ProgressCallback] = None,
) -> Tuple[List[TrialRecord], List[ThroughputPoint]]:
    """
    Decode once per trial at a fixed received set and time it.

    Each symbol is erased independently with probability p for every p in the
    loss grid. bitrate = k * symbol_size * 8 / decode time; failed decodes are
    counted but left out of the averages.
    """
    if not cfg.loss_grid:
        raise ValueError("Throughput experiments need a non-empty loss grid")
    if code is None:
        _, code = build_from_params(cfg.code)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed]))
    encoded = encode(code, random_sources(code, cfg.symbol_size, rng))
    bits = code.k * cfg.symbol_size * 8

    records: List[TrialRecord] = []
    points: List[ThroughputPoint] = []
    total = cfg.trials * len(cfg.loss_grid)
    done = 0
    for g, p in enumerate(cfg.loss_grid):
        times = []
        failures = 0
        for t in range(cfg.trials):
            seed = trial_seed(cfg.seed, g * cfg.trials + t)
            keep = np.flatnonzero(np.random.default_rng(seed).random(code.n) >= p)
            block = received_block(code, encoded, keep)
            started = time.perf_counter_ns()
            outcome = decode(code, block, cfg.decoder)
            elapsed = max(time.perf_counter_ns() - started, 1)
            # a successful decode always holds at least k symbols
            symbols = len(keep) if outcome.success else code.n
            if outcome.success:
                times.append(elapsed)
            else:
                failures += 1
            records.append(TrialRecord(
                code_family=code.family,
                k=code.k,
                n=code.n,
                B=code.spec.B,
                decoder=cfg.decoder,
                trial=t,
                seed=seed,
                symbols_needed=symbols,
                overhead=(symbols - code.k) / code.k,
                row_ops=outcome.row_ops,
                decode_ns=elapsed,
                loss_prob=p,
                symbols_received=len(keep),
                success=outcome.success,
            ))
            done += 1
            _report_progress(done, total, progress, "Throughput")

        point = ThroughputPoint(loss_prob=p, trials=cfg.trials, decoded=len(times), failures=failures)
        if times:
            point.mean_decode_ns = float(np.mean(times))
            point.mean_bitrate_mbps = float(np.mean([bits * 1e3 / ns for ns in times]))
        points.append(point)
    return records, points


# ==================== Full-rank rate ====================

def _random_row(rng: np.random.Generator, k: int) -> int:
    return int.from_bytes(rng.bytes((k + 7) // 8), "little") & ((1 << k) - 1)


def full_rank_experiment(k: int, rate: Fraction, trials: int, seed: int = 0, log_base: str = "e") -> FullRankResult:
    """
    How often k random encoding symbols of a Windowed code are decodable,
    next to k x k matrices with independent uniform bits.
    """
    _, code = build_windowed(k, rate, seed, log_base)
    windowed = 0
    baseline = 0
    for t in range(trials):
        rng = np.random.default_rng(trial_seed(seed, t))
        basis = EchelonBasis()
        for esi in rng.choice(code.n, size=k, replace=False):
            basis.add(code.generator[int(esi)])
        windowed += basis.rank == k
        basis = EchelonBasis()
        for _ in range(k):
            basis.add(_random_row(rng, k))
        baseline += basis.rank == k
    logger.info("Full-rank rate k=%d: windowed %d/%d, random %d/%d", k, windowed, trials, baseline, trials)
    return FullRankResult(k=k, trials=trials, windowed_full_rank=windowed, random_full_rank=baseline)


# ==================== CSV ====================

def write_records(out: TextIO, records: Sequence[TrialRecord], header: bool = True) -> None:
    writer = csv.writer(out, lineterminator="\n")
    if header:
        writer.writerow(CSV_HEADER)
    for r in records:
        writer.writerow([
            r.code_family.value, r.k, r.n, "" if r.B is None else r.B, r.decoder.value, r.trial, r.seed,
            r.symbols_needed, f"{r.overhead:.6f}", r.row_ops, r.decode_ns,
            "" if r.loss_prob is None else r.loss_prob, int(r.success),
        ])


def _stat(value: Optional[float]) -> str:
    return "" if value is None else f"{value:.6f}"


def write_overhead_summary(out: TextIO, code: CodeMatrices, decoder: DecoderKind, summary: OverheadSummary) -> None:
    csv.writer(out, lineterminator="\n").writerow([
        "#summary", code.family.value, code.k, code.n, "" if code.spec.B is None else code.spec.B, decoder.value,
        f"trials={summary.trials}", f"mean={_stat(summary.mean)}", f"std={_stat(summary.std)}",
        f"p50={_stat(summary.p50)}", f"p90={_stat(summary.p90)}", f"p99={_stat(summary.p99)}",
        f"failures={summary.failures}", f"mean_row_ops={summary.mean_row_ops:.1f}",
    ])


def write_throughput_summary(out: TextIO, code: CodeMatrices, decoder: DecoderKind, points: Sequence[ThroughputPoint]) -> None:
    writer = csv.writer(out, lineterminator="\n")
    for point in points:
        mbps = "" if point.mean_bitrate_mbps is None else f"{point.mean_bitrate_mbps:.3f}"
        writer.writerow([
            "#summary", code.family.value, code.k, code.n, "" if code.spec.B is None else code.spec.B, decoder.value,
            f"loss_prob={point.loss_prob}", f"decoded={point.decoded}", f"failures={point.failures}",
            f"mean_bitrate_mbps={mbps}",
        ])
