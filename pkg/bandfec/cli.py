"""Command-line front end: bandfec build | findpoly | encode | decode | dump-matrix | bench"""

import argparse
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from bandfec.codec import SymbolBlock, decode, encode
from bandfec.config import get_settings
from bandfec.construct import (
    CodeMatrices,
    CodeSpec,
    build_band,
    build_code,
    build_from_params,
    format_spec,
    parse_spec,
    search_pools,
    spec_hash,
)
from bandfec.errors import BandFecError, ConstructionError, PacketError, SpecFormatError
from bandfec.gf2poly import degree_window, find_candidates, format_poly_list, parse_poly, parse_poly_list
from bandfec.packets import SymbolPacket, iter_packets, trailer
from bandfec.schemas import CodeFamily, CodeParams, DecoderKind, ExperimentConfig, Schedule
from bandfec.sim import (
    overhead_experiment,
    throughput_experiment,
    write_overhead_summary,
    write_records,
    write_throughput_summary,
)

logger = logging.getLogger("bandfec.cli")

EXIT_OK = 0
EXIT_DECODE_FAILURE = 1
EXIT_CONSTRUCTION = 2
EXIT_USAGE = 64


class UsageError(Exception):
    """Invalid flag values or combinations"""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_code(path: str) -> Tuple[CodeSpec, CodeMatrices]:
    spec = parse_spec(Path(path).read_text())
    return spec, build_code(spec)


def _code_params(args) -> CodeParams:
    try:
        return CodeParams(
            family=CodeFamily(args.family),
            k=args.k,
            rate=args.rate,
            B=args.B,
            u=args.u,
            n1=args.n1,
            schedule=Schedule(args.schedule),
            seed=args.seed,
            log_base=args.log_base,
        )
    except ValueError as e:
        raise UsageError(str(e))


def _build(params: CodeParams, candidates_file: Optional[str] = None):
    if candidates_file is None:
        return build_from_params(params)
    if params.family != CodeFamily.BAND:
        raise UsageError("--candidates only applies to --family band")
    settings = get_settings()
    u = parse_poly(params.u or settings.default_u)
    pool = parse_poly_list(Path(candidates_file).read_text())
    _, edges = search_pools(u, params.B, settings)
    return build_band(params.k, params.fraction, params.B, u, pool, edges, params.schedule, params.seed)


# ==================== Commands ====================

def cmd_build(args) -> int:
    spec, code = _build(_code_params(args), args.candidates)
    text = format_spec(spec)
    if args.output:
        Path(args.output).write_text(text)
        print(f"{spec.family.value} k={spec.k} n={spec.n} hash={spec_hash(spec).hex()} -> {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_findpoly(args) -> int:
    u = parse_poly(args.u)
    target = args.B // 2 if args.edge else args.B - 1
    lo, hi = degree_window(target, args.delta, get_settings().degree_tolerance_divisor)
    polys = find_candidates(u, hi, args.max_weight, args.count, min_degree=lo, min_product_weight=args.min_weight)
    if not polys:
        logger.error("No polynomial m with deg in [%d, %d] and W(u*m) <= %d", lo, hi, args.max_weight)
        return EXIT_CONSTRUCTION
    text = format_poly_list(polys)
    if args.output:
        Path(args.output).write_text(text)
        logger.info("Wrote %d candidates to %s", len(polys), args.output)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_encode(args) -> int:
    spec, code = _load_code(args.spec)
    data = Path(args.input).read_bytes()
    symbol_size = args.symbol_size or max(1, math.ceil(len(data) / code.k))
    capacity = code.k * symbol_size
    if len(data) > capacity:
        raise UsageError(
            f"Input of {len(data)} bytes exceeds one block of k * symbol_size = {capacity} bytes; "
            f"use --symbol-size {math.ceil(len(data) / code.k)} or larger"
        )
    padding = capacity - len(data)
    sources = np.frombuffer(data + bytes(padding), dtype=np.uint8).reshape(code.k, symbol_size)
    encoded = encode(code, SymbolBlock.from_sources(code, sources))

    digest = spec_hash(spec)
    with open(args.output, "wb") as out:
        for esi in range(code.n):
            payload = encoded.data[code.esi_slot(esi)].tobytes()
            out.write(SymbolPacket(spec.family, code.k, code.n, symbol_size, esi, digest, payload).pack())
        out.write(trailer(spec.family, code.k, code.n, symbol_size, digest, padding).pack())
    logger.info("Encoded %d bytes into %d packets of %d bytes (%d padding)", len(data), code.n, symbol_size, padding)
    return EXIT_OK


def cmd_decode(args) -> int:
    spec, code = _load_code(args.spec)
    digest = spec_hash(spec)
    block: Optional[SymbolBlock] = None
    padding = 0
    duplicates = 0
    with open(args.input, "rb") as stream:
        for packet in iter_packets(stream):
            if packet.spec_hash != digest or packet.k != code.k or packet.n != code.n:
                logger.warning("Packet for another code (hash %s), skipped", packet.spec_hash.hex())
                continue
            if block is None:
                block = SymbolBlock.empty(code, packet.symbol_size)
            elif packet.symbol_size != block.symbol_size:
                logger.warning("Packet with symbol size %d in a block of %d, skipped", packet.symbol_size, block.symbol_size)
                continue
            if packet.is_trailer:
                padding = packet.padding
            elif not block.receive(code.esi_slot(packet.esi), packet.payload):
                duplicates += 1
    if block is None:
        raise PacketError("No packet for this code in the input")
    if padding > code.k * block.symbol_size:
        raise PacketError(f"Trailer padding {padding} exceeds the {code.k * block.symbol_size}-byte block")
    if duplicates:
        logger.info("Ignored %d duplicate packets", duplicates)

    outcome = decode(code, block, DecoderKind.parse(args.decoder))
    print(outcome.model_dump_json())
    if outcome.success or args.partial:
        payload = block.data[: code.k].tobytes()
        Path(args.output).write_bytes(payload[: len(payload) - padding])
    return EXIT_OK if outcome.success else EXIT_DECODE_FAILURE


def cmd_dump_matrix(args) -> int:
    _, code = _load_code(args.spec)
    if args.which == "G":
        sys.stdout.write(code.dump_generator())
    elif args.which == "H":
        sys.stdout.write(code.dump_parity_check())
    else:
        sys.stdout.write(code.dump_banded())
    return EXIT_OK


def _loss_grid(text: Optional[str]) -> List[float]:
    if not text:
        return []
    try:
        return [float(p) for p in text.split(",")]
    except ValueError:
        raise UsageError(f"--loss-grid expects comma-separated probabilities, got {text!r}")


def cmd_bench(args) -> int:
    params = _code_params(args)
    decoder = DecoderKind.parse(args.decoder)
    if params.family == CodeFamily.WINDOWED and decoder == DecoderKind.ITERATIVE:
        raise UsageError("Windowed codes decode by ML only; use --decoder ml or hybrid")
    grid = _loss_grid(args.loss_grid)
    if args.mode == "speed" and not grid:
        raise UsageError("bench speed needs --loss-grid, e.g. --loss-grid 0.1,0.2,0.3")
    try:
        cfg = ExperimentConfig(
            code=params,
            trials=args.trials,
            symbol_size=args.symbol_size or get_settings().default_symbol_size,
            seed=args.seed,
            decoder=decoder,
            loss_grid=grid,
            timing=args.timing or args.mode == "speed",
        )
    except ValueError as e:
        raise UsageError(str(e))
    _, code = _build(params, args.candidates)

    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        if args.mode == "overhead":
            records, summary = overhead_experiment(cfg, code)
            write_records(out, records)
            write_overhead_summary(out, code, decoder, summary)
        else:
            records, points = throughput_experiment(cfg, code)
            write_records(out, records)
            write_throughput_summary(out, code, decoder, points)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


# ==================== Parser ====================

def _add_code_flags(parser: argparse.ArgumentParser) -> None:
    settings = get_settings()
    parser.add_argument("--family", choices=[f.value for f in CodeFamily], default="band")
    parser.add_argument("--k", type=int, required=True, help="Source symbols per block")
    parser.add_argument("--rate", default="1/2", help="Code rate k/n, e.g. 1/2 or 2/3")
    parser.add_argument("--B", type=int, default=None, help="Band width (band family)")
    parser.add_argument("--u", default=settings.default_u, help="u(x) exponents, e.g. 0,3,10")
    parser.add_argument("--n1", type=int, default=5, help="Source degree (staircase family)")
    parser.add_argument("--schedule", choices=[s.value for s in Schedule], default="round-robin")
    parser.add_argument("--log-base", choices=["e", "2", "10"], default="e", help="Windowed code log base")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--candidates", default=None, help="File with one candidate polynomial per line")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bandfec", description="LDPC-Band erasure codes: construction, coding and benchmarks")
    parser.add_argument("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("build", help="Build a code and write its spec file")
    _add_code_flags(p)
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("findpoly", help="Search candidate polynomials m with low-weight u*m")
    p.add_argument("--u", default=get_settings().default_u)
    p.add_argument("--B", type=int, required=True)
    p.add_argument("--max-weight", type=int, default=5)
    p.add_argument("--min-weight", type=int, default=1)
    p.add_argument("--count", type=int, default=24)
    p.add_argument("--delta", type=int, default=None, help="Degree tolerance below the target degree")
    p.add_argument("--edge", action="store_true", help="Search edge candidates of degree <= B/2")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_findpoly)

    p = sub.add_parser("encode", help="Encode a file into a symbol packet stream")
    p.add_argument("--spec", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--symbol-size", type=int, default=None)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="Decode a symbol packet stream back into a file")
    p.add_argument("--spec", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--decoder", choices=["it", "iterative", "ml", "hybrid"], default="hybrid")
    p.add_argument("--partial", action="store_true", help="Write the output even when decoding fails")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("dump-matrix", help="Print G, H or the banded part M as 0/1 rows")
    p.add_argument("--spec", required=True)
    p.add_argument("--which", choices=["G", "H", "M"], default="H")
    p.set_defaults(func=cmd_dump_matrix)

    p = sub.add_parser("bench", help="Run an overhead or decoding-speed experiment")
    p.add_argument("mode", choices=["overhead", "speed"])
    _add_code_flags(p)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--symbol-size", type=int, default=None)
    p.add_argument("--loss-grid", default=None, help="Comma-separated loss probabilities (speed mode)")
    p.add_argument("--decoder", choices=["it", "iterative", "ml", "hybrid"], default="hybrid")
    p.add_argument("--timing", action="store_true", help="Record decode times in overhead mode")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or get_settings().log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ValueError) as e:
        print(f"bandfec: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConstructionError, SpecFormatError) as e:
        print(f"bandfec: {e}", file=sys.stderr)
        return EXIT_CONSTRUCTION
    except BandFecError as e:
        print(f"bandfec: {e}", file=sys.stderr)
        return EXIT_DECODE_FAILURE
    except OSError as e:
        print(f"bandfec: {e}", file=sys.stderr)
        return EXIT_USAGE
