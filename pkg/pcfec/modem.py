"""modem.py - Constellations, bit mapping, AWGN and max-log demapping.

A 4D symbol is a real vector [X_re, X_im, Y_re, Y_im] (two polarizations).
Every constellation carries `bits_per_sym` bits per symbol through an integer
label per point; label bits are read MSB first.

**Constellation files** are UTF-8 JSON:

    {"name": ..., "dims": 4, "bits_per_sym": 6, "constant_modulus": false,
     "points": [[x1, x2, x3, x4], ...], "labels": [int, ...]}

`labels[i]` is the label of `points[i]`. Points are rescaled to unit mean
energy on load.

**SNR convention.** Es = 1 per 4D symbol and snr_db is the per-polarization
SNR, so the noise variance per real dimension is

    sigma2 = 1 / (4 * 10^(snr_db / 10)).

**LLRs** follow l > 0 <=> bit 1:

    l_k = [min_{s: b_k(s)=0} |y - s|^2 - min_{s: b_k(s)=1} |y - s|^2] / (2 sigma2)
"""

from __future__ import annotations
# mypy: disallow-untyped-defs, disallow-incomplete-defs, disallow-untyped-calls

import dataclasses
import json
import math
import os
import typing
from dataclasses import dataclass

import numpy as np
from logzero import logger


__all__ = [
    'ConstellationError', 'Constellation', 'ChannelParams', 'SymbolBlock',
    'DATA_DIR', 'load_constellation', 'bundled_constellation',
    'resolve_constellation', 'pm8qam_star', 'filler_bits', 'map_bits', 'awgn',
    'demap_llr', 'demap_block', 'snr_to_sigma2',
]


DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')

ENERGY_TOL = 1e-9
CONSTANT_MODULUS_TOL = 1e-9

SeedLike = typing.Union[int, np.random.SeedSequence, None]


# *** Constellations **********************************************************

class ConstellationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Constellation:
    """M = 2^bits_per_sym labeled points in `dims` real dimensions.

    Construction validates everything except normalization; use
    `normalized()` (or `load_constellation`) to get unit mean energy.
    """
    name: str
    dims: int
    bits_per_sym: int
    points: np.ndarray
    labels: np.ndarray
    constant_modulus: bool = False

    # Filled in by __post_init__: points indexed by label, and the bits of
    # every label (row = label, MSB first).
    by_label: np.ndarray = dataclasses.field(init=False, repr=False)
    label_bits: np.ndarray = dataclasses.field(init=False, repr=False)

    def __post_init__(self) -> None:
        points = np.asarray(self.points, dtype=np.float64)
        labels = np.asarray(self.labels)
        size = 1 << self.bits_per_sym if self.bits_per_sym > 0 else 0

        if self.dims < 1 or self.bits_per_sym < 1:
            raise ConstellationError("{}: dims and bits_per_sym must be positive"
                                     .format(self.name))
        if points.ndim != 2 or points.shape[1] != self.dims:
            raise ConstellationError("{}: points must be an (M, {}) array, got shape {}"
                                     .format(self.name, self.dims, points.shape))
        if len(points) != size:
            raise ConstellationError("{}: expected {} points for {} bits/symbol, got {}"
                                     .format(self.name, size, self.bits_per_sym, len(points)))
        if labels.shape != (size,) or not np.issubdtype(labels.dtype, np.integer):
            raise ConstellationError("{}: need {} integer labels".format(self.name, size))
        if labels.min() < 0 or labels.max() >= size:
            raise ConstellationError("{}: labels must lie in [0, {})".format(self.name, size))
        if len(np.unique(labels)) != size:
            raise ConstellationError("{}: duplicate labels".format(self.name))
        if not np.isfinite(points).all():
            raise ConstellationError("{}: non-finite coordinates".format(self.name))

        by_label = np.empty_like(points)
        by_label[labels] = points
        shifts = np.arange(self.bits_per_sym - 1, -1, -1)
        object.__setattr__(self, 'points', points)
        object.__setattr__(self, 'labels', labels.astype(np.int64))
        object.__setattr__(self, 'by_label', by_label)
        object.__setattr__(self, 'label_bits',
                           ((np.arange(size)[:, None] >> shifts) & 1).astype(np.uint8))

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def mean_energy(self) -> float:
        return float((self.points ** 2).sum(axis=1).mean())

    def normalized(self) -> Constellation:
        energy = self.mean_energy
        if not energy > 0 or not math.isfinite(energy):
            raise ConstellationError("{}: cannot normalize, mean energy {}"
                                     .format(self.name, energy))
        c = Constellation(self.name, self.dims, self.bits_per_sym,
                          self.points / math.sqrt(energy), self.labels,
                          self.constant_modulus)
        if abs(c.mean_energy - 1.0) > ENERGY_TOL:
            raise ConstellationError("{}: normalization failed, mean energy {}"
                                     .format(self.name, c.mean_energy))
        c.check_constant_modulus()
        return c

    def check_constant_modulus(self) -> None:
        if not self.constant_modulus:
            return
        # Called on normalized constellations, so every |s|^2 should be 1.
        norms = (self.points ** 2).sum(axis=1)
        worst = float(np.abs(norms - 1.0).max())
        if worst > CONSTANT_MODULUS_TOL:
            raise ConstellationError("{}: flagged constant modulus but |s|^2 is off by {:.3g}"
                                     .format(self.name, worst))

    @classmethod
    def from_dict(cls, d: typing.Mapping[str, typing.Any]) -> Constellation:
        missing = {'name', 'dims', 'bits_per_sym', 'points', 'labels'} - set(d)
        if missing:
            raise ConstellationError("constellation file lacks {}".format(sorted(missing)))
        try:
            dims = int(d['dims'])
            bits_per_sym = int(d['bits_per_sym'])
            points = np.array(d['points'], dtype=np.float64)
            labels = np.array(d['labels'], dtype=np.int64)
        except (TypeError, ValueError) as exc:
            raise ConstellationError("malformed constellation: {}".format(exc)) from exc
        return cls(str(d['name']), dims, bits_per_sym, points, labels,
                   bool(d.get('constant_modulus', False)))

    def to_dict(self) -> typing.Dict[str, typing.Any]:
        return {
            'name': self.name,
            'dims': self.dims,
            'bits_per_sym': self.bits_per_sym,
            'constant_modulus': self.constant_modulus,
            'points': self.points.tolist(),
            'labels': self.labels.tolist(),
        }


def load_constellation(path: str) -> Constellation:
    try:
        with open(path, encoding='utf-8') as f:
            d = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConstellationError("{}: not valid JSON: {}".format(path, exc)) from exc
    if not isinstance(d, dict):
        raise ConstellationError("{}: top level must be an object".format(path))
    c = Constellation.from_dict(d).normalized()
    logger.debug("loaded %s from %s (%d points, constant modulus %s)",
                 c.name, path, c.size, c.constant_modulus)
    return c


def bundled_constellation(name: str) -> Constellation:
    filename = name if name.endswith('.json') else name + '.json'
    return load_constellation(os.path.join(DATA_DIR, filename))


def resolve_constellation(ref: str) -> Constellation:
    """Load `ref` as a path if it exists, else as a bundled file name."""
    if os.path.exists(ref):
        return load_constellation(ref)
    filename = ref if ref.endswith('.json') else ref + '.json'
    if os.path.exists(os.path.join(DATA_DIR, filename)):
        return bundled_constellation(filename)
    raise ConstellationError("no constellation file or bundled format named {!r}".format(ref))


def _gray(k: int) -> int:
    return k ^ (k >> 1)


def pm8qam_star(ring_ratio: float = math.sqrt(3)) -> Constellation:
    """PM-star-8QAM: the same star-8QAM in each polarization.

    Star-8QAM has an inner ring at 45 + k*90 degrees and an outer ring, `ring_ratio`
    times larger, at k*90 degrees. A 2D label is (ring bit, Gray(k)); the 4D
    label is X label << 3 | Y label.
    """
    star = np.zeros((8, 2))
    for ring in (0, 1):
        radius = ring_ratio if ring else 1.0
        offset = 0.0 if ring else math.pi / 4
        for k in range(4):
            angle = offset + k * math.pi / 2
            star[(ring << 2) | _gray(k)] = (radius * math.cos(angle),
                                            radius * math.sin(angle))
    labels = np.arange(64)
    points = np.concatenate([star[labels >> 3], star[labels & 7]], axis=1)
    return Constellation('pm8qam_star', 4, 6, points, labels).normalized()


# *** Mapping *****************************************************************

def filler_bits(count: int) -> np.ndarray:
    """The fixed pad pattern 0, 1, 0, 1, ..."""
    return (np.arange(count) & 1).astype(np.uint8)


@dataclass
class SymbolBlock:
    """One transmitted block, filled in stage by stage.

    `permutation[i]` is the frame position of the i-th transmitted bit.
    `n_filler` pad bits follow the interleaved frame bits and are never
    counted.
    """
    tx_bits: np.ndarray
    permutation: np.ndarray
    n_filler: int
    tx_syms: np.ndarray
    rx_syms: typing.Optional[np.ndarray] = None
    llrs: typing.Optional[np.ndarray] = None

    @property
    def n_symbols(self) -> int:
        return len(self.tx_syms)


def map_bits(
        bits: np.ndarray,
        constellation: Constellation,
        interleaver_seed: SeedLike = None,
        *,
        identity_interleaver: bool = False
) -> SymbolBlock:
    bits = np.asarray(bits, dtype=np.uint8).reshape(-1)
    n = len(bits)
    if identity_interleaver:
        permutation = np.arange(n)
    else:
        permutation = np.random.default_rng(interleaver_seed).permutation(n)
    bps = constellation.bits_per_sym
    n_filler = (-n) % bps
    stream = np.concatenate([bits[permutation], filler_bits(n_filler)])
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = stream.reshape(-1, bps).astype(np.int64) @ weights
    return SymbolBlock(bits.copy(), permutation, n_filler,
                       constellation.by_label[labels])


# *** Channel *****************************************************************

def snr_to_sigma2(snr_db: float) -> float:
    if snr_db == math.inf:
        return 0.0
    return 1.0 / (4.0 * 10.0 ** (snr_db / 10.0))


@dataclass(frozen=True)
class ChannelParams:
    snr_db: float
    seed: SeedLike = None

    @property
    def sigma2(self) -> float:
        return snr_to_sigma2(self.snr_db)


def awgn(tx_syms: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Add i.i.d. N(0, sigma2) noise to every real dimension."""
    tx_syms = np.asarray(tx_syms, dtype=np.float64)
    sigma2 = params.sigma2
    if sigma2 == 0:
        return tx_syms.copy()
    rng = np.random.default_rng(params.seed)
    return tx_syms + math.sqrt(sigma2) * rng.standard_normal(tx_syms.shape)


# *** Demapping ***************************************************************

def _squared_distances(rx: np.ndarray, points: np.ndarray) -> np.ndarray:
    """|y - s|^2 for every received y and point s, summed dimension by
    dimension in index order."""
    acc = np.zeros((len(rx), len(points)))
    for k in range(points.shape[1]):
        diff = rx[:, k, None] - points[None, :, k]
        acc = acc + diff * diff
    return acc


def demap_llr(
        rx_syms: np.ndarray,
        constellation: Constellation,
        sigma2: float,
        permutation: typing.Optional[np.ndarray] = None,
        n_bits: typing.Optional[int] = None,
        *,
        method: str = 'maxlog'
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Max-log LLRs and hard decisions, back in frame bit order.

    The first `n_bits` demapped bits (default: all) are kept, which drops
    the filler; `permutation` undoes the interleaver of `map_bits`.
    """
    if method != 'maxlog':
        raise NotImplementedError("only max-log demapping is implemented")
    if not sigma2 > 0:
        raise ValueError("demapping needs sigma2 > 0, got {}".format(sigma2))
    rx_syms = np.asarray(rx_syms, dtype=np.float64).reshape(-1, constellation.dims)

    dist = _squared_distances(rx_syms, constellation.by_label)
    bits = constellation.label_bits
    llrs = np.empty((len(rx_syms), constellation.bits_per_sym))
    for k in range(constellation.bits_per_sym):
        ones = bits[:, k] == 1
        llrs[:, k] = (dist[:, ~ones].min(axis=1) - dist[:, ones].min(axis=1)) / (2.0 * sigma2)

    stream = llrs.reshape(-1)
    if n_bits is not None:
        stream = stream[:n_bits]
    if permutation is not None:
        frame_order = np.empty_like(stream)
        frame_order[permutation] = stream
        stream = frame_order
    return stream, (stream > 0).astype(np.uint8)


def demap_block(
        block: SymbolBlock,
        constellation: Constellation,
        sigma2: float
) -> typing.Tuple[np.ndarray, np.ndarray]:
    assert block.rx_syms is not None, "run the channel before demapping"
    llrs, hard = demap_llr(block.rx_syms, constellation, sigma2,
                           block.permutation, len(block.tx_bits))
    block.llrs = llrs
    return llrs, hard
