"""sim.py - Monte Carlo harness: one frame, SNR sweeps, CSV output.

**One frame** goes random info -> pc_encode -> row-major serialization ->
interleave and map -> AWGN -> max-log demap -> every selected decoder ->
compare the decoded info block with the transmitted one. The channel runs
once per frame and all decoders see the same received frame, so decoder
comparisons are paired.

**Randomness** is counter-based: frame f at SNR index s draws everything from
SeedSequence([master_seed, s, f]), spawned into info, interleaver and noise
streams. A sweep is a pure function of its SweepConfig, whatever the worker
count.

**Counting.** Pre-FEC errors are counted over the n*n coded bits of a frame
(filler excluded), post-FEC errors over the k*k information bits. An SNR
point keeps running frames, `batch_frames` at a time, until every decoder has
`min_bit_errors` post-FEC errors or `max_frames` frames have run.
"""

from __future__ import annotations
# mypy: disallow-untyped-defs, disallow-incomplete-defs

import concurrent.futures
import csv
import dataclasses
import json
import math
import typing
from dataclasses import dataclass

import numpy as np
from logzero import logger
from scipy.stats import binomtest

from .decoders import (DECODERS, DecodeStats, DecoderConfig, DecoderConfigError,
                       DecoderInput, ReliabilityFrame, decode)
from .gf_bch import ComponentCode, default_code
from .modem import (ChannelParams, Constellation, awgn, demap_block, map_bits,
                    resolve_constellation)
from .product_code import PcFrame, pc_encode, pc_extract_info
from .utils import drain


__all__ = [
    'ConfigError', 'SweepConfig', 'FrameSeeds', 'FrameResult', 'run_frame',
    'SweepRow', 'SweepResult', 'CSV_COLUMNS', 'run_sweep', 'emit_csv',
    'read_csv', 'wilson_interval', 'snr_at_ber', 'pre_fec_at_post_fec',
    'sweep_delta',
]


# Noiseless frames still need a finite LLR scale.
NOISELESS_SIGMA2 = 1.0


# *** Configuration ***********************************************************

class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SweepConfig:
    snr_points: typing.Tuple[float, ...]
    max_frames: int = 100
    min_bit_errors: int = 100
    decoders: typing.Tuple[str, ...] = ('ibdd', 'sabm', 'sabm-sr', 'mf-ibdd', 'tpd')
    constellation: str = 'pm8qam_star'
    decoder_cfg: DecoderConfig = dataclasses.field(default_factory=DecoderConfig)
    master_seed: int = 0
    workers: int = 1
    batch_frames: int = 4
    identity_interleaver: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, 'snr_points', tuple(float(x) for x in self.snr_points))
        object.__setattr__(self, 'decoders', tuple(self.decoders))
        if not self.snr_points:
            raise ConfigError("snr_points must not be empty")
        if any(math.isnan(x) for x in self.snr_points):
            raise ConfigError("snr_points must be numbers")
        if self.max_frames < 1:
            raise ConfigError("max_frames must be >= 1")
        if self.min_bit_errors < 0:
            raise ConfigError("min_bit_errors must be >= 0")
        if not self.decoders:
            raise ConfigError("select at least one decoder")
        unknown = [d for d in self.decoders if d not in DECODERS]
        if unknown:
            raise ConfigError("unknown decoders {}; expected some of {}"
                              .format(unknown, sorted(DECODERS)))
        if len(set(self.decoders)) != len(self.decoders):
            raise ConfigError("decoders listed twice: {}".format(list(self.decoders)))
        if not 0 <= self.master_seed < 1 << 64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        if self.workers < 1 or self.batch_frames < 1:
            raise ConfigError("workers and batch_frames must be >= 1")

    @classmethod
    def from_dict(cls, d: typing.Mapping[str, typing.Any]) -> SweepConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError("unknown config keys: {}".format(sorted(unknown)))
        if 'snr_points' not in d:
            raise ConfigError("config needs snr_points")
        kwargs = dict(d)
        try:
            kwargs['decoder_cfg'] = DecoderConfig.from_dict(d.get('decoder_cfg', {}))
            return cls(**kwargs)
        except DecoderConfigError as exc:
            raise ConfigError("decoder_cfg: {}".format(exc)) from exc
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_json(cls, path: str) -> SweepConfig:
        try:
            with open(path, encoding='utf-8') as f:
                d = json.load(f)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("cannot read config {}: {}".format(path, exc)) from exc
        if not isinstance(d, dict):
            raise ConfigError("{}: top level must be an object".format(path))
        return cls.from_dict(d)

    def to_dict(self) -> typing.Dict[str, typing.Any]:
        d = {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}
        d['snr_points'] = list(self.snr_points)
        d['decoders'] = list(self.decoders)
        d['decoder_cfg'] = self.decoder_cfg.to_dict()
        return d

    def replace(self, **changes: typing.Any) -> SweepConfig:
        return dataclasses.replace(self, **changes)


# *** One frame ***************************************************************

@dataclass(frozen=True)
class FrameSeeds:
    info: np.random.SeedSequence
    interleaver: np.random.SeedSequence
    noise: np.random.SeedSequence

    @classmethod
    def derive(cls, master_seed: int, snr_index: int, frame_index: int) -> FrameSeeds:
        root = np.random.SeedSequence([master_seed, snr_index, frame_index])
        info, interleaver, noise = root.spawn(3)
        return cls(info, interleaver, noise)


@dataclass
class FrameResult:
    pre_fec_errors: int
    pre_fec_bits: int
    info_bits: int
    post_fec_errors: typing.Dict[str, int]
    stats: typing.Dict[str, DecodeStats]
    converged: typing.Dict[str, bool]


def run_frame(
        snr_db: float,
        decoders: typing.Sequence[str],
        seeds: FrameSeeds,
        constellation: Constellation,
        decoder_cfg: DecoderConfig,
        code: typing.Optional[ComponentCode] = None,
        *,
        identity_interleaver: bool = False
) -> FrameResult:
    code = code or default_code()
    info = np.random.default_rng(seeds.info).integers(0, 2, (code.k, code.k), dtype=np.uint8)
    frame = pc_encode(info, code)
    tx_bits = frame.serialize()

    block = map_bits(tx_bits, constellation, seeds.interleaver,
                     identity_interleaver=identity_interleaver)
    channel = ChannelParams(snr_db, seeds.noise)
    block.rx_syms = awgn(block.tx_syms, channel)
    llrs, hard_bits = demap_block(block, constellation, channel.sigma2 or NOISELESS_SIGMA2)

    received = DecoderInput(
        hard=PcFrame.deserialize(hard_bits, code.n),
        llr=ReliabilityFrame.from_serial(llrs, code.n, decoder_cfg.delta),
        truth=frame)

    result = FrameResult(int((hard_bits != tx_bits).sum()), len(tx_bits),
                         code.k * code.k, {}, {}, {})
    for name in decoders:
        report = decode(name, received, decoder_cfg, code)
        errors = int((pc_extract_info(report.decoded, code) != info).sum())
        result.post_fec_errors[name] = errors
        result.stats[name] = report.stats
        result.converged[name] = report.converged
    return result


def _frame_job(job: typing.Tuple[SweepConfig, Constellation, int, int]) -> FrameResult:
    cfg, constellation, snr_index, frame_index = job
    return run_frame(cfg.snr_points[snr_index], cfg.decoders,
                     FrameSeeds.derive(cfg.master_seed, snr_index, frame_index),
                     constellation, cfg.decoder_cfg,
                     identity_interleaver=cfg.identity_interleaver)


# *** Sweeps ******************************************************************

@dataclass(frozen=True)
class SweepRow:
    """One CSV row. Field order is the CSV column order."""
    snr_db: float
    decoder: str
    constellation: str
    frames: int
    pre_fec_errors: int
    pre_fec_ber: float
    post_fec_errors: int
    post_fec_ber: float
    ci_low: float
    ci_high: float


CSV_COLUMNS = tuple(f.name for f in dataclasses.fields(SweepRow))


@dataclass
class SweepResult:
    rows: typing.List[SweepRow] = dataclasses.field(default_factory=list)
    stats: typing.Dict[typing.Tuple[float, str], DecodeStats] = dataclasses.field(
        default_factory=dict, compare=False)

    def row(self, snr_db: float, decoder: str) -> SweepRow:
        for r in self.rows:
            if r.snr_db == snr_db and r.decoder == decoder:
                return r
        raise KeyError((snr_db, decoder))

    def for_decoder(self, decoder: str) -> typing.List[SweepRow]:
        return sorted((r for r in self.rows if r.decoder == decoder), key=lambda r: r.snr_db)


def wilson_interval(errors: int, trials: int) -> typing.Tuple[float, float]:
    """95% Wilson score interval for an error rate."""
    if trials == 0:
        return 0.0, 1.0
    ci = binomtest(errors, trials).proportion_ci(confidence_level=0.95, method='wilson')
    return float(ci.low), float(ci.high)


@dataclass
class _PointTally:
    frames: int = 0
    pre_fec_errors: int = 0
    pre_fec_bits: int = 0
    post_fec_errors: int = 0
    info_bits: int = 0
    stats: DecodeStats = dataclasses.field(default_factory=DecodeStats)

    def add(self, frame: FrameResult, decoder: str) -> None:
        self.frames += 1
        self.pre_fec_errors += frame.pre_fec_errors
        self.pre_fec_bits += frame.pre_fec_bits
        self.post_fec_errors += frame.post_fec_errors[decoder]
        self.info_bits += frame.info_bits
        self.stats += frame.stats[decoder]

    def row(self, snr_db: float, decoder: str, constellation: str) -> SweepRow:
        low, high = wilson_interval(self.post_fec_errors, self.info_bits)
        return SweepRow(snr_db, decoder, constellation, self.frames,
                        self.pre_fec_errors, self.pre_fec_errors / max(self.pre_fec_bits, 1),
                        self.post_fec_errors, self.post_fec_errors / max(self.info_bits, 1),
                        low, high)


def run_sweep(cfg: SweepConfig, *, progress: bool = False) -> SweepResult:
    constellation = resolve_constellation(cfg.constellation)
    result = SweepResult()
    executor: typing.Optional[concurrent.futures.Executor] = None
    if cfg.workers > 1:
        executor = concurrent.futures.ProcessPoolExecutor(max_workers=cfg.workers)

    try:
        for snr_index, snr_db in enumerate(cfg.snr_points):
            tallies = {name: _PointTally() for name in cfg.decoders}

            def batches() -> typing.Iterator[int]:
                for start in range(0, cfg.max_frames, cfg.batch_frames):
                    stop = min(start + cfg.batch_frames, cfg.max_frames)
                    jobs = [(cfg, constellation, snr_index, f) for f in range(start, stop)]
                    frames = executor.map(_frame_job, jobs) if executor else map(_frame_job, jobs)
                    for frame in frames:
                        for name in cfg.decoders:
                            tallies[name].add(frame, name)
                    yield stop

            def enough(_: int) -> bool:
                return all(t.post_fec_errors >= cfg.min_bit_errors for t in tallies.values())

            drain(batches(), progress, "{:.2f} dB".format(snr_db), stop=enough)

            for name in cfg.decoders:
                row = tallies[name].row(snr_db, name, constellation.name)
                result.rows.append(row)
                result.stats[(snr_db, name)] = tallies[name].stats
                logger.info("%s %.2f dB %s: %d frames, pre-FEC %.3e, post-FEC %.3e (%d errors)",
                            constellation.name, snr_db, name, row.frames, row.pre_fec_ber,
                            row.post_fec_ber, row.post_fec_errors)
    finally:
        if executor is not None:
            executor.shutdown()
    return result


# *** CSV *********************************************************************

def emit_csv(result: SweepResult, path: str) -> None:
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in dataclasses.astuple(row)])


def read_csv(path: str) -> SweepResult:
    types = {f.name: f.type for f in dataclasses.fields(SweepRow)}
    convert: typing.Dict[str, typing.Callable[[str], typing.Any]] = {
        'float': float, 'int': int, 'str': str}
    result = SweepResult()
    with open(path, newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError("{}: expected columns {}".format(path, CSV_COLUMNS))
        for record in reader:
            result.rows.append(SweepRow(**{
                name: convert[str(types[name])](record[name]) for name in CSV_COLUMNS}))
    return result


# *** Reading results *********************************************************

def _crossing(
        rows: typing.Sequence[SweepRow],
        target: float
) -> typing.Optional[typing.Tuple[float, float]]:
    """Where post-FEC BER falls through `target`, interpolating log10(BER)
    linearly in SNR. Returns (snr_db, pre_fec_ber) or None. Points with zero
    post-FEC errors carry no slope information and are skipped."""
    usable = [r for r in rows if r.post_fec_ber > 0]
    for a, b in zip(usable, usable[1:]):
        if a.post_fec_ber >= target >= b.post_fec_ber and a.post_fec_ber != b.post_fec_ber:
            x = ((math.log10(a.post_fec_ber) - math.log10(target))
                 / (math.log10(a.post_fec_ber) - math.log10(b.post_fec_ber)))
            snr = a.snr_db + x * (b.snr_db - a.snr_db)
            pre = 10 ** (math.log10(a.pre_fec_ber)
                         + x * (math.log10(b.pre_fec_ber) - math.log10(a.pre_fec_ber)))
            return snr, pre
    return None


def snr_at_ber(result: SweepResult, decoder: str, target: float) -> typing.Optional[float]:
    crossing = _crossing(result.for_decoder(decoder), target)
    return None if crossing is None else crossing[0]


def pre_fec_at_post_fec(
        result: SweepResult,
        decoder: str,
        target: float
) -> typing.Optional[float]:
    crossing = _crossing(result.for_decoder(decoder), target)
    return None if crossing is None else crossing[1]


def sweep_delta(
        cfg: SweepConfig,
        snr_db: float,
        deltas: typing.Sequence[float],
        decoder: str = 'sabm',
        *,
        progress: bool = False
) -> typing.List[typing.Tuple[float, SweepRow]]:
    """Post-FEC performance of `decoder` at one SNR for each marking threshold."""
    if decoder not in DECODERS:
        raise ConfigError("unknown decoder {!r}".format(decoder))
    table = []
    for delta in deltas:
        try:
            decoder_cfg = dataclasses.replace(cfg.decoder_cfg, delta=delta)
        except DecoderConfigError as exc:
            raise ConfigError(str(exc)) from exc
        point = cfg.replace(snr_points=(snr_db,), decoders=(decoder,), decoder_cfg=decoder_cfg)
        row = run_sweep(point, progress=progress).rows[0]
        logger.info("delta %.3f: post-FEC BER %.3e", delta, row.post_fec_ber)
        table.append((delta, row))
    return table
