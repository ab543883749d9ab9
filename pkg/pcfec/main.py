#!/usr/bin/env python3

"""pcfec/main.py - Command-line front end.

    python3 -m pcfec.main simulate --config configs/default.json --output ber.csv
    python3 -m pcfec.main validate-constellation my4d.json
    python3 -m pcfec.main bdd-selftest
    python3 -m pcfec.main sweep-delta --config configs/default.json --snr 11.3 --deltas 3:12:1

Exit status is 0 on success, 1 for unusable input (config files and
arguments) and 2 when a constellation file or a self-check fails
validation.
"""

from __future__ import annotations
# mypy: disallow-untyped-defs, disallow-incomplete-defs

import argparse
import itertools
import logging
import sys
import typing

import logzero
import numpy as np
from logzero import logger

from . import gf_bch
from .decoders import DECODERS
from .modem import ConstellationError, load_constellation
from .sim import ConfigError, SweepConfig, SweepResult, emit_csv, run_sweep, sweep_delta
from .utils import frange


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2


def parse_snr_range(text: str) -> typing.List[float]:
    """'a:b:step' (inclusive) or a single number."""
    parts = text.split(':')
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) == 3:
            start, stop, step = (float(p) for p in parts)
            return frange(start, stop, step)
    except ValueError as exc:
        raise ConfigError("bad range {!r}: {}".format(text, exc)) from exc
    raise ConfigError("bad range {!r}; expected a:b:step or a number".format(text))


def _load_config(options: argparse.Namespace) -> SweepConfig:
    cfg = SweepConfig.from_json(options.config)
    changes: typing.Dict[str, typing.Any] = {}
    if getattr(options, 'snr', None) is not None and options.command == 'simulate':
        changes['snr_points'] = tuple(parse_snr_range(options.snr))
    if getattr(options, 'decoder', None):
        changes['decoders'] = tuple(options.decoder)
    if getattr(options, 'workers', None) is not None:
        changes['workers'] = options.workers
    if getattr(options, 'max_frames', None) is not None:
        changes['max_frames'] = options.max_frames
    return cfg.replace(**changes) if changes else cfg


def cmd_simulate(options: argparse.Namespace) -> int:
    cfg = _load_config(options)
    logger.info("sweeping %d SNR points with %s", len(cfg.snr_points), ", ".join(cfg.decoders))
    result = run_sweep(cfg, progress=options.progress)
    emit_csv(result, options.output)
    logger.info("wrote %d rows to %s", len(result.rows), options.output)
    return EXIT_OK


def cmd_validate_constellation(options: argparse.Namespace) -> int:
    try:
        c = load_constellation(options.file)
    except OSError as exc:
        logger.error("cannot read %s: %s", options.file, exc)
        return EXIT_CONFIG
    except ConstellationError as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION
    print("{}: {} points, {}D, {} bits/symbol, constant modulus: {}".format(
        c.name, c.size, c.dims, c.bits_per_sym, c.constant_modulus))
    return EXIT_OK


def cmd_bdd_selftest(options: argparse.Namespace) -> int:
    code = gf_bch.default_code()
    rng = np.random.default_rng(options.seed)
    codeword = code.encode(rng.integers(0, 2, code.k, dtype=np.uint8))
    assert code.is_codeword(codeword)

    bad = 0
    checked = 0
    for weight in (1, 2):
        for positions in itertools.combinations(range(code.n), weight):
            word = codeword.copy()
            word[list(positions)] ^= 1
            outcome = gf_bch.ebch_bdd(word)
            checked += 1
            if not (outcome.success and np.array_equal(outcome.codeword, codeword)
                    and sorted(outcome.flips) == list(positions)):
                bad += 1
                if bad <= 10:
                    logger.error("BDD did not correct flips at %s", positions)
    logger.info("%d radius-2 patterns checked, %d wrong", checked, bad)

    print("weight 1-2: {} patterns, {} wrong".format(checked, bad))
    for weight in (3, 4):
        census = gf_bch.flip_census(code, codeword, rng, options.census, weight)
        print("weight {}: {} samples, {} failures, {} miscorrections ({:.1%})".format(
            weight, census.samples, census.failures, census.miscorrections,
            census.miscorrection_fraction))
    return EXIT_VALIDATION if bad else EXIT_OK


def cmd_sweep_delta(options: argparse.Namespace) -> int:
    cfg = _load_config(options)
    snr = parse_snr_range(options.snr)
    if len(snr) != 1:
        raise ConfigError("sweep-delta runs at a single SNR")
    deltas = parse_snr_range(options.deltas)
    table = sweep_delta(cfg, snr[0], deltas, options.sabm_decoder, progress=options.progress)
    for delta, row in table:
        print("delta={:<8g} post_fec_ber={:.4e} ({} errors, {} frames)".format(
            delta, row.post_fec_ber, row.post_fec_errors, row.frames))
    best_delta, best = min(table, key=lambda entry: entry[1].post_fec_ber)
    print("best delta: {:g} (post-FEC BER {:.4e})".format(best_delta, best.post_fec_ber))
    if options.output:
        emit_csv(SweepResult([row for _, row in table]), options.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='pcfec', description="Monte Carlo BER simulation of decoders for product codes.")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true', help="log debug messages")
    verbosity.add_argument('-q', '--quiet', action='store_true', help="log only errors")
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True

    p = sub.add_parser('simulate', help="run a BER sweep and write CSV")
    p.add_argument('--config', metavar='FILE', required=True, help="JSON sweep config")
    p.add_argument('--snr', metavar='A:B:STEP', help="override snr_points")
    p.add_argument('--decoder', action='append', choices=sorted(DECODERS),
                   help="decoder to run (repeatable); overrides the config")
    p.add_argument('--workers', type=int, help="worker processes")
    p.add_argument('--max-frames', type=int, help="override max_frames")
    p.add_argument('--output', metavar='FILE', default='sweep.csv', help="CSV output path")
    p.add_argument('--progress', action='store_true', help="print progress on stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser('validate-constellation', help="check a constellation file")
    p.add_argument('file', metavar='FILE')
    p.set_defaults(func=cmd_validate_constellation)

    p = sub.add_parser('bdd-selftest', help="check BDD on all weight-1 and -2 error patterns")
    p.add_argument('--seed', type=int, default=0)
    p.add_argument('--census', type=int, default=10000, metavar='N',
                   help="weight-3 patterns to sample")
    p.set_defaults(func=cmd_bdd_selftest)

    p = sub.add_parser('sweep-delta', help="post-FEC BER as a function of the marking threshold")
    p.add_argument('--config', metavar='FILE', required=True)
    p.add_argument('--snr', metavar='SNR', required=True)
    p.add_argument('--deltas', metavar='A:B:STEP', default='2:12:1')
    p.add_argument('--decoder', dest='sabm_decoder', default='sabm',
                   choices=['sabm', 'sabm-sr'])
    p.add_argument('--max-frames', type=int)
    p.add_argument('--output', metavar='FILE')
    p.add_argument('--progress', action='store_true')
    p.set_defaults(func=cmd_sweep_delta)
    return parser


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    options = build_parser().parse_args(argv)
    if options.verbose:
        logzero.loglevel(logging.DEBUG)
    elif options.quiet:
        logzero.loglevel(logging.ERROR)
    else:
        logzero.loglevel(logging.INFO)

    try:
        return typing.cast(int, options.func(options))
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    except ConstellationError as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == '__main__':
    sys.exit(main())
