"""decoders.py - Iterative decoders for the product code.

Five decoders share one frame model (see product_code.py):

*   `ibdd_decode` - iterative bounded-distance decoding. Each iteration is a
    row pass followed by a column pass; every component word goes through
    radius-2 BDD and is replaced on success, left alone on failure.

*   `sabm_decode` - soft-aided bit marking. Bits whose channel LLR magnitude
    is at least `delta` are highly reliable (HRBs). A BDD correction that
    would flip an HRB is treated as a detected miscorrection and rejected.
    Failed words get `flip_retries` more attempts, each after flipping the
    next least reliable bit. Marking is active for the first `m` iterations.

*   `sabm_sr_decode` - SABM with scaled reliabilities. After every half
    iteration, decoded words contribute u = +1/-1 (bit 1/0), failed words
    u = 0, and phi = w_i * u + l replaces the channel LLR as the reliability
    used for marking, least-reliable-bit choice and the next hard input.

*   `mf_ibdd_decode` - iBDD with a genie that vetoes every miscorrection.
    Needs the transmitted frame, so it only makes sense in simulation.

*   `chase_pyndiah_decode` - soft-decision turbo product decoding with
    Chase-II test patterns and Pyndiah's extrinsic update.

Every pass works on all 256 words of one orientation at once. A pass over
columns is a pass over the rows of the transposed array view; writes through
the view land in the frame.

LLR sign convention: l > 0 means bit 1 is more likely.
"""

from __future__ import annotations
# mypy: disallow-untyped-defs, disallow-incomplete-defs, disallow-untyped-calls

import dataclasses
import itertools
import math
import typing
from dataclasses import dataclass

import numpy as np
from logzero import logger

from .gf_bch import BddOutcome, BddStatus, ComponentCode, default_code
from .product_code import PcFrame, frame_validity


__all__ = [
    'DecoderConfigError', 'DecoderConfig', 'DecodeStats', 'DecodeReport',
    'ReliabilityFrame', 'SabmBatch', 'mark_bits', 'compute_scaled_reliability',
    'sabm_component_batch', 'sabm_component_decode', 'ibdd_decode',
    'sabm_decode', 'sabm_sr_decode', 'mf_ibdd_decode', 'chase_pyndiah_decode',
    'chase_test_patterns', 'DecoderInput', 'DECODERS', 'decode',
]


ROWS = 0
COLUMNS = 1


def _view(a: np.ndarray, axis: int) -> np.ndarray:
    """`a` with the words of the given orientation as rows."""
    return a if axis == ROWS else a.T


# *** Configuration ***********************************************************

class DecoderConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecoderConfig:
    """Settings shared by all decoders. Immutable; share freely.

    One iteration is a row pass plus a column pass. The first `m` iterations
    use marking (and, for SABM-SR, scaled reliabilities with weight w[i]);
    the rest run plain BDD. The chase_* fields only affect
    `chase_pyndiah_decode`: `chase_alpha` is indexed by half-iteration (its
    last entry repeats) and `chase_beta=None` selects the average-magnitude
    heuristic.

    The default `delta` is the best of a `sweep-delta` run with SABM on
    star-8QAM at 11.3 dB, the iBDD waterfall.
    """
    total_iterations: int = 10
    m: int = 5
    w: typing.Tuple[float, ...] = (3.42, 3.87, 4.08, 4.27, 4.49)
    delta: float = 6.0
    flip_retries: int = 1
    chase_p: int = 4
    chase_iterations: int = 4
    chase_alpha: typing.Tuple[float, ...] = (0.2, 0.3, 0.5, 0.7, 0.9, 1.0, 1.0, 1.0)
    chase_beta: typing.Optional[typing.Tuple[float, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, 'w', tuple(float(x) for x in self.w))
        object.__setattr__(self, 'delta', float(self.delta))
        object.__setattr__(self, 'chase_alpha',
                           tuple(float(x) for x in self.chase_alpha))
        if self.chase_beta is not None:
            object.__setattr__(self, 'chase_beta',
                               tuple(float(x) for x in self.chase_beta))

        if self.total_iterations < 1:
            raise DecoderConfigError("total_iterations must be >= 1")
        if not 0 <= self.m <= self.total_iterations:
            raise DecoderConfigError(
                "m must be in [0, total_iterations], got m={} total_iterations={}"
                .format(self.m, self.total_iterations))
        if len(self.w) != self.m:
            raise DecoderConfigError("w has {} entries but m = {}".format(len(self.w), self.m))
        if any(x < 0 or math.isnan(x) for x in self.w):
            raise DecoderConfigError("weights must be nonnegative: {}".format(self.w))
        if math.isnan(self.delta) or self.delta < 0:
            raise DecoderConfigError("delta must be >= 0, got {}".format(self.delta))
        if self.flip_retries < 0:
            raise DecoderConfigError("flip_retries must be >= 0")
        if not 0 <= self.chase_p <= 8:
            raise DecoderConfigError("chase_p must be in [0, 8], got {}".format(self.chase_p))
        if self.chase_iterations < 1:
            raise DecoderConfigError("chase_iterations must be >= 1")
        if not self.chase_alpha:
            raise DecoderConfigError("chase_alpha must not be empty")
        if self.chase_beta is not None and not self.chase_beta:
            raise DecoderConfigError("chase_beta must be null or non-empty")

    @classmethod
    def from_dict(cls, d: typing.Mapping[str, typing.Any]) -> DecoderConfig:
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise DecoderConfigError("unknown decoder settings: {}".format(sorted(unknown)))
        kwargs = dict(d)
        if 'delta' in kwargs:
            # JSON has no infinity literal; accept "inf".
            kwargs['delta'] = float(kwargs['delta'])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise DecoderConfigError(str(exc)) from exc

    def to_dict(self) -> typing.Dict[str, typing.Any]:
        d = dataclasses.asdict(self)
        if math.isinf(self.delta):
            d['delta'] = 'inf'
        return d

    def alpha(self, half: int) -> float:
        return self.chase_alpha[min(half, len(self.chase_alpha) - 1)]

    def beta(self, half: int) -> typing.Optional[float]:
        if self.chase_beta is None:
            return None
        return self.chase_beta[min(half, len(self.chase_beta) - 1)]


@dataclass
class DecodeStats:
    bdd_calls: int = 0
    miscorrections_detected: int = 0
    flip_retries_used: int = 0
    genie_vetoes: int = 0

    def __iadd__(self, other: DecodeStats) -> DecodeStats:
        self.bdd_calls += other.bdd_calls
        self.miscorrections_detected += other.miscorrections_detected
        self.flip_retries_used += other.flip_retries_used
        self.genie_vetoes += other.genie_vetoes
        return self


@dataclass
class DecodeReport:
    decoded: PcFrame
    converged: bool
    stats: DecodeStats


# *** Reliabilities ***********************************************************

def mark_bits(reliability: np.ndarray, delta: float) -> np.ndarray:
    """HUB mask: True where |reliability| < delta, False (HRB) elsewhere."""
    if delta < 0:
        raise DecoderConfigError("delta must be >= 0, got {}".format(delta))
    return np.abs(np.asarray(reliability, dtype=np.float64)) < delta


def compute_scaled_reliability(u: np.ndarray, llr: np.ndarray, w_i: float) -> np.ndarray:
    """phi = w_i * u + l, elementwise."""
    if not w_i > 0:
        raise DecoderConfigError("scaled reliabilities need w_i > 0, got {}".format(w_i))
    return w_i * np.asarray(u, dtype=np.float64) + np.asarray(llr, dtype=np.float64)


@dataclass
class ReliabilityFrame:
    """Channel LLRs of one frame plus the SABM-SR state derived from them.

    `llr` holds l_{i,j}; `u` the last quantized decoder output in {-1, 0, +1};
    `phi` the scaled reliabilities; `psi` the HUB mask of `phi` for `delta`.
    """
    llr: np.ndarray
    delta: float = math.inf
    u: np.ndarray = dataclasses.field(init=False)
    phi: np.ndarray = dataclasses.field(init=False)
    psi: np.ndarray = dataclasses.field(init=False)

    def __post_init__(self) -> None:
        self.llr = np.asarray(self.llr, dtype=np.float64)
        if self.llr.ndim != 2:
            raise ValueError("LLR frame must be 2-D, got shape {}".format(self.llr.shape))
        self.u = np.zeros(self.llr.shape, dtype=np.int8)
        self.phi = self.llr.copy()
        self.psi = mark_bits(self.phi, self.delta)

    @classmethod
    def from_serial(
            cls, llrs: np.ndarray, n: int = 256, delta: float = math.inf
    ) -> ReliabilityFrame:
        return cls(np.asarray(llrs, dtype=np.float64).reshape(n, n), delta)

    def hard(self) -> PcFrame:
        return PcFrame((self.llr > 0).astype(np.uint8))

    def update(self, u: np.ndarray, w_i: float) -> None:
        """Fold a new decoder output into phi and refresh the HUB mask."""
        self.u = np.asarray(u, dtype=np.int8)
        self.phi = compute_scaled_reliability(self.u, self.llr, w_i)
        self.psi = mark_bits(self.phi, self.delta)


# *** SABM component decoding *************************************************

@dataclass(frozen=True)
class SabmBatch:
    """Outcome of SABM on N words. Failed words come back unchanged."""
    success: np.ndarray
    decoded: np.ndarray
    miscorrection: np.ndarray
    bdd_calls: int
    vetoes: int
    retries_used: int


def sabm_component_batch(
        code: ComponentCode,
        words: np.ndarray,
        reliabilities: np.ndarray,
        psi: np.ndarray,
        retries: int
) -> SabmBatch:
    """BDD with the HRB veto and least-reliable-bit retries, on N words.

    Retry r flips the r-th least reliable bit of the original word on top of
    the bits flipped by earlier retries (ties go to the smaller index). A
    candidate is vetoed when its net change from the original word touches
    an HRB, so accepted outputs never modify an HRB.
    """
    words = np.asarray(words, dtype=np.uint8)
    n_words, n = words.shape
    hrb = ~np.asarray(psi, dtype=bool)
    order = np.argsort(np.abs(reliabilities), axis=1, kind='stable')

    current = words.copy()
    decoded = words.copy()
    success = np.zeros(n_words, dtype=bool)
    miscorrection = np.zeros(n_words, dtype=bool)
    active = np.arange(n_words)
    bdd_calls = vetoes = retries_used = 0

    for attempt in range(min(retries, n) + 1):
        if len(active) == 0:
            break
        if attempt > 0:
            current[active, order[active, attempt - 1]] ^= 1
            retries_used += len(active)
        outcome = code.bdd_batch(current[active])
        bdd_calls += len(active)
        candidate = outcome.apply(current[active])
        touches_hrb = ((candidate != words[active]) & hrb[active]).any(axis=1)
        vetoed = outcome.success & touches_hrb
        accepted = outcome.success & ~touches_hrb

        vetoes += int(vetoed.sum())
        miscorrection[active[vetoed]] = True
        decoded[active[accepted]] = candidate[accepted]
        success[active[accepted]] = True
        active = active[~accepted]

    assert not ((decoded != words) & hrb).any(), "SABM modified an HRB"
    return SabmBatch(success, decoded, miscorrection, bdd_calls, vetoes, retries_used)


def sabm_component_decode(
        word: np.ndarray,
        reliabilities: np.ndarray,
        psi_row: np.ndarray,
        retries: int,
        code: typing.Optional[ComponentCode] = None
) -> typing.Tuple[BddOutcome, bool]:
    """SABM on a single word. Returns (outcome, miscorrection_flag).

    `outcome.flips` is relative to the input word and includes retry flips,
    so it can exceed t.
    """
    code = code or default_code()
    word = np.asarray(word, dtype=np.uint8)
    batch = sabm_component_batch(code, word[None, :],
                                 np.asarray(reliabilities, dtype=np.float64)[None, :],
                                 np.asarray(psi_row, dtype=bool)[None, :], retries)
    flag = bool(batch.miscorrection[0])
    if not batch.success[0]:
        return BddOutcome.failure(), flag
    decoded = batch.decoded[0]
    flips = tuple(int(p) for p in np.flatnonzero(decoded != word))
    return BddOutcome(BddStatus.SUCCESS, decoded, flips), flag


def _add_sabm(stats: DecodeStats, batch: SabmBatch) -> None:
    stats.bdd_calls += batch.bdd_calls
    stats.miscorrections_detected += batch.vetoes
    stats.flip_retries_used += batch.retries_used


# *** Plain iterations ********************************************************

def _bdd_pass(
        code: ComponentCode,
        view: np.ndarray,
        stats: DecodeStats,
        truth: typing.Optional[np.ndarray] = None
) -> bool:
    """One BDD pass over the rows of `view`, in place. True if anything changed."""
    outcome = code.bdd_batch(view)
    stats.bdd_calls += len(view)
    if truth is not None:
        decoded = outcome.apply(view)
        wrong = (outcome.success & (outcome.flip_counts() > 0)
                 & (decoded != truth).any(axis=1))
        stats.genie_vetoes += int(wrong.sum())
        outcome = outcome.only(~wrong)
    decoded = outcome.apply(view)
    if truth is not None:
        fixed = outcome.success & (outcome.flip_counts() > 0)
        assert (decoded[fixed] == truth[fixed]).all(), "genie let a miscorrection through"
    changed = not np.array_equal(decoded, view)
    view[...] = decoded
    return changed


def _plain_iterations(
        code: ComponentCode,
        bits: np.ndarray,
        iterations: int,
        stats: DecodeStats,
        truth: typing.Optional[np.ndarray] = None
) -> int:
    """Run up to `iterations` row+column BDD iterations, stopping early after
    one that changes nothing. Returns the number run."""
    for it in range(iterations):
        changed = False
        for axis in (ROWS, COLUMNS):
            changed |= _bdd_pass(code, _view(bits, axis), stats,
                                 None if truth is None else _view(truth, axis))
        if not changed:
            return it + 1
    return iterations


def _report(code: ComponentCode, bits: np.ndarray, stats: DecodeStats) -> DecodeReport:
    frame = PcFrame(bits)
    rows_ok, cols_ok = frame_validity(frame, code)
    return DecodeReport(frame, bool(rows_ok.all() and cols_ok.all()), stats)


# *** The decoders ************************************************************

DEFAULT_CONFIG = DecoderConfig()


def ibdd_decode(
        hard: PcFrame,
        cfg: DecoderConfig = DEFAULT_CONFIG,
        code: typing.Optional[ComponentCode] = None
) -> DecodeReport:
    code = code or default_code()
    bits = hard.bits.copy()
    stats = DecodeStats()
    run = _plain_iterations(code, bits, cfg.total_iterations, stats)
    logger.debug("ibdd: %d iterations, %d BDD calls", run, stats.bdd_calls)
    return _report(code, bits, stats)


def mf_ibdd_decode(
        hard: PcFrame,
        truth: PcFrame,
        cfg: DecoderConfig = DEFAULT_CONFIG,
        code: typing.Optional[ComponentCode] = None
) -> DecodeReport:
    code = code or default_code()
    bits = hard.bits.copy()
    stats = DecodeStats()
    run = _plain_iterations(code, bits, cfg.total_iterations, stats, truth=truth.bits)
    logger.debug("mf-ibdd: %d iterations, %d vetoes", run, stats.genie_vetoes)
    return _report(code, bits, stats)


def sabm_decode(
        hard: PcFrame,
        llr: ReliabilityFrame,
        cfg: DecoderConfig = DEFAULT_CONFIG,
        code: typing.Optional[ComponentCode] = None
) -> DecodeReport:
    code = code or default_code()
    bits = hard.bits.copy()
    stats = DecodeStats()
    psi = mark_bits(llr.llr, cfg.delta)

    it = 0
    while it < cfg.m:
        changed = False
        for axis in (ROWS, COLUMNS):
            view = _view(bits, axis)
            batch = sabm_component_batch(code, view, _view(llr.llr, axis),
                                         _view(psi, axis), cfg.flip_retries)
            _add_sabm(stats, batch)
            changed |= not np.array_equal(batch.decoded, view)
            view[...] = batch.decoded
        it += 1
        if not changed:
            # The marking rule is the same every iteration, so the rest of
            # the marking phase would be a no-op. The plain phase still gets
            # only iterations m+1..total.
            break
    _plain_iterations(code, bits, cfg.total_iterations - cfg.m, stats)
    logger.debug("sabm: %d vetoes, %d retries", stats.miscorrections_detected,
                 stats.flip_retries_used)
    return _report(code, bits, stats)


def sabm_sr_decode(
        hard: PcFrame,
        llr: ReliabilityFrame,
        cfg: DecoderConfig = DEFAULT_CONFIG,
        code: typing.Optional[ComponentCode] = None
) -> DecodeReport:
    code = code or default_code()
    bits = hard.bits.copy()
    stats = DecodeStats()
    rf = ReliabilityFrame(llr.llr, cfg.delta)

    for i in range(cfg.m):
        w_i = cfg.w[i]
        for axis in (ROWS, COLUMNS):
            view = _view(bits, axis)
            batch = sabm_component_batch(code, view, _view(rf.phi, axis),
                                         _view(rf.psi, axis), cfg.flip_retries)
            _add_sabm(stats, batch)
            view[...] = batch.decoded
            if w_i == 0:
                # A zero weight gives the decoder output no say: no update.
                continue
            u = np.zeros(bits.shape, dtype=np.int8)
            u_view = _view(u, axis)
            u_view[batch.success] = 2 * batch.decoded[batch.success].astype(np.int8) - 1
            rf.update(u, w_i)
            bits[...] = np.where(rf.phi > 0, 1, np.where(rf.phi < 0, 0, bits))

    _plain_iterations(code, bits, cfg.total_iterations - cfg.m, stats)
    logger.debug("sabm-sr: %d vetoes, %d retries", stats.miscorrections_detected,
                 stats.flip_retries_used)
    return _report(code, bits, stats)


# *** Chase-Pyndiah ***********************************************************

def chase_test_patterns(p: int) -> np.ndarray:
    """All 2^p flip patterns over the p least reliable positions, (2^p, p)."""
    return np.array(list(itertools.product((0, 1), repeat=p)),
                    dtype=np.uint8).reshape(1 << p, p)


def _chase_half(
        code: ComponentCode,
        r: np.ndarray,
        patterns: np.ndarray,
        beta: typing.Optional[float],
        stats: DecodeStats
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Chase-II on every row of `r`. Returns (decisions, soft outputs)."""
    n_words, n = r.shape
    n_tests, p = patterns.shape
    hard = (r > 0).astype(np.uint8)

    tests = np.repeat(hard[:, None, :], n_tests, axis=1)
    if p:
        least = np.argsort(np.abs(r), axis=1, kind='stable')[:, :p]
        flips = np.zeros_like(tests)
        flips[np.arange(n_words)[:, None, None],
              np.arange(n_tests)[None, :, None],
              least[:, None, :]] = patterns[None, :, :]
        tests ^= flips

    flat = tests.reshape(n_words * n_tests, n)
    outcome = code.bdd_batch(flat)
    stats.bdd_calls += len(flat)
    candidates = outcome.apply(flat).reshape(n_words, n_tests, n)
    valid = outcome.success.reshape(n_words, n_tests)

    bipolar = 2.0 * candidates - 1.0
    metric = np.where(valid, np.einsum('wtj,wj->wt', bipolar, r), -np.inf)
    best = np.argmax(metric, axis=1)
    decodable = valid.any(axis=1)
    rows = np.arange(n_words)
    decision = np.where(decodable[:, None], candidates[rows, best], hard)
    d = 2.0 * decision - 1.0

    # Best competitor per position: highest metric among valid candidates
    # that disagree with the decision there.
    disagree = (candidates != decision[:, None, :]) & valid[:, :, None]
    competitor = np.where(disagree, metric[:, :, None], -np.inf).max(axis=1)
    has_competitor = disagree.any(axis=1) & decodable[:, None]
    gap = np.where(has_competitor,
                   metric[rows, best][:, None] - np.where(has_competitor, competitor, 0.0),
                   0.0) / 2.0

    if beta is None:
        beta = float(gap[has_competitor].mean()) if has_competitor.any() \
            else float(np.abs(r).mean())
    soft = np.where(has_competitor, gap * d, beta * d)
    soft = np.where(decodable[:, None], soft, r)
    return decision.astype(np.uint8), soft


def chase_pyndiah_decode(
        llr: ReliabilityFrame,
        cfg: DecoderConfig = DEFAULT_CONFIG,
        code: typing.Optional[ComponentCode] = None
) -> DecodeReport:
    code = code or default_code()
    channel = llr.llr
    extrinsic = np.zeros_like(channel)
    decision = (channel > 0).astype(np.uint8)
    patterns = chase_test_patterns(cfg.chase_p)
    stats = DecodeStats()

    for half in range(2 * cfg.chase_iterations):
        axis = half % 2
        r = _view(channel, axis) + cfg.alpha(half) * _view(extrinsic, axis)
        decided, soft = _chase_half(code, r, patterns, cfg.beta(half), stats)
        _view(extrinsic, axis)[...] = soft - r
        _view(decision, axis)[...] = decided

    logger.debug("tpd: %d BDD calls", stats.bdd_calls)
    return _report(code, decision, stats)


# *** Registry ****************************************************************

@dataclass(frozen=True)
class DecoderInput:
    """Everything any decoder may look at for one received frame."""
    hard: PcFrame
    llr: ReliabilityFrame
    truth: PcFrame


DecoderFn = typing.Callable[[DecoderInput, DecoderConfig, ComponentCode], DecodeReport]

DECODERS: typing.Dict[str, DecoderFn] = {
    'ibdd': lambda x, cfg, code: ibdd_decode(x.hard, cfg, code),
    'sabm': lambda x, cfg, code: sabm_decode(x.hard, x.llr, cfg, code),
    'sabm-sr': lambda x, cfg, code: sabm_sr_decode(x.hard, x.llr, cfg, code),
    'mf-ibdd': lambda x, cfg, code: mf_ibdd_decode(x.hard, x.truth, cfg, code),
    'tpd': lambda x, cfg, code: chase_pyndiah_decode(x.llr, cfg, code),
}


def decode(
        name: str,
        received: DecoderInput,
        cfg: DecoderConfig = DEFAULT_CONFIG,
        code: typing.Optional[ComponentCode] = None
) -> DecodeReport:
    try:
        fn = DECODERS[name]
    except KeyError:
        raise DecoderConfigError("unknown decoder {!r}; expected one of {}"
                                 .format(name, sorted(DECODERS))) from None
    return fn(received, cfg, code or default_code())
