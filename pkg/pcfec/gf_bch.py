"""gf_bch.py - GF(2^8) arithmetic and the eBCH(256, 239) component code.

**The field.**
Elements of GF(2^8) are ints in range(256). Bit i is the coefficient of x^i
of a polynomial over GF(2), reduced modulo PRIMITIVE_POLY. Addition is XOR.
Multiplication goes through log/antilog tables built once per field.

**The code.**
The inner code is the narrow-sense binary BCH(255, 239) code with designed
distance 5 (t = 2). Its generator is the product of the minimal polynomials
of alpha and alpha^3. One overall parity bit extends it to length 256, which
raises the minimum distance to 6.

A component word is a length-256 uint8 array. Position p < 255 holds the
coefficient of x^(254 - p), so a systematic codeword reads

    [ 239 info bits | 16 BCH parity bits | 1 overall parity bit ]

**Decoding.**
`ComponentCode.bdd` is the algebraic radius-2 decoder: syndromes
S1 = r(alpha), S3 = r(alpha^3), a Peterson solve for the error locator, and a
Chien search for its roots. The overall parity bit is then used for
bookkeeping: if e1 inner flips leave the word with odd weight, the parity bit
is flipped too (e2 = 1), and the result is accepted only if e1 + e2 <= 2.

`ComponentCode.bdd_batch` does the same thing for many words at once through
a syndrome table. Radius-2 decoding of a distance-5 code is unique, so the
table is exactly the map computed by the algebraic decoder.
"""

from __future__ import annotations
# mypy: disallow-untyped-defs, disallow-incomplete-defs, disallow-untyped-calls

import enum
import functools
import typing
from dataclasses import dataclass

import numpy as np
from logzero import logger


__all__ = [
    'PRIMITIVE_POLY', 'GaloisField', 'GF', 'gf_mul', 'gf_inv', 'gf_pow',
    'minimal_polynomial', 'CodeLengthError', 'BddStatus', 'BddOutcome',
    'BddBatch', 'ComponentCode', 'default_code', 'ebch_encode', 'ebch_bdd',
    'ebch_is_codeword', 'FlipCensus', 'flip_census', 'three_flip_census',
]


# x^8 + x^4 + x^3 + x^2 + 1. Fixed so codewords are bit-exact everywhere.
PRIMITIVE_POLY = 0x11D

FIELD_BITS = 8
FIELD_ORDER = (1 << FIELD_BITS) - 1


# *** GF(2^8) *****************************************************************

class GaloisField:
    """GF(2^8) defined by a primitive polynomial.

    `exp[i]` is alpha^i for i in range(2 * 255) (doubled so that sums of two
    logs never need reducing), and `log[a]` is the discrete log of a != 0.
    """
    __slots__ = ['poly', 'exp', 'log', 'exp_array']

    poly: int
    exp: typing.Tuple[int, ...]
    log: typing.Tuple[int, ...]
    exp_array: np.ndarray

    def __init__(self, poly: int = PRIMITIVE_POLY) -> None:
        if poly.bit_length() != FIELD_BITS + 1:
            raise ValueError("field polynomial must have degree {}, got {:#x}"
                             .format(FIELD_BITS, poly))
        exp = [0] * (2 * FIELD_ORDER)
        log = [0] * (FIELD_ORDER + 1)
        x = 1
        for i in range(FIELD_ORDER):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & (1 << FIELD_BITS):
                x ^= poly
        if len(set(exp[:FIELD_ORDER])) != FIELD_ORDER:
            raise ValueError("polynomial {:#x} is not primitive".format(poly))
        exp[FIELD_ORDER:] = exp[:FIELD_ORDER]

        self.poly = poly
        self.exp = tuple(exp)
        self.log = tuple(log)
        self.exp_array = np.array(exp, dtype=np.int64)

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self.exp[self.log[a] + self.log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise ZeroDivisionError("0 has no inverse in GF(2^8)")
        return self.exp[(FIELD_ORDER - self.log[a]) % FIELD_ORDER]

    def pow(self, a: int, n: int) -> int:
        if a == 0:
            return 1 if n == 0 else 0
        return self.exp[(self.log[a] * n) % FIELD_ORDER]

    def alpha_pow(self, n: int) -> int:
        return self.exp[n % FIELD_ORDER]


GF = GaloisField()


def gf_mul(a: int, b: int) -> int:
    return GF.mul(a, b)


def gf_inv(a: int) -> int:
    return GF.inv(a)


def gf_pow(a: int, n: int) -> int:
    return GF.pow(a, n)


# *** Binary polynomials ******************************************************
#
# A polynomial over GF(2) is an int whose bit i is the coefficient of x^i.

def _clmul(a: int, b: int) -> int:
    """Carryless product of two binary polynomials."""
    result = 0
    while b:
        if b & 1:
            result ^= a
        a <<= 1
        b >>= 1
    return result


def _poly_mod(a: int, g: int) -> int:
    dg = g.bit_length() - 1
    while a.bit_length() - 1 >= dg:
        a ^= g << (a.bit_length() - 1 - dg)
    return a


def minimal_polynomial(field: GaloisField, power: int) -> int:
    """The minimal polynomial over GF(2) of alpha^power, as a binary int."""
    conjugates = []
    e = power % FIELD_ORDER
    while e not in conjugates:
        conjugates.append(e)
        e = (2 * e) % FIELD_ORDER

    # Multiply out prod (x + alpha^e) with GF(2^8) coefficients, low degree
    # first.
    coeffs = [1]
    for e in conjugates:
        root = field.alpha_pow(e)
        shifted = [0] + coeffs
        scaled = [field.mul(c, root) for c in coeffs] + [0]
        coeffs = [s ^ c for s, c in zip(shifted, scaled)]

    poly = 0
    for i, c in enumerate(coeffs):
        assert c in (0, 1), "minimal polynomial must have binary coefficients"
        poly |= c << i
    return poly


# *** Decoder outcomes ********************************************************

class CodeLengthError(ValueError):
    pass


class BddStatus(enum.Enum):
    SUCCESS = 'success'
    FAILURE = 'failure'


@dataclass(frozen=True)
class BddOutcome:
    """Result of decoding one component word.

    On SUCCESS, `codeword` is a valid extended codeword and `flips` lists the
    positions where it differs from the input. On FAILURE `codeword` is None.
    """
    status: BddStatus
    codeword: typing.Optional[np.ndarray]
    flips: typing.Tuple[int, ...] = ()

    @property
    def success(self) -> bool:
        return self.status is BddStatus.SUCCESS

    @classmethod
    def failure(cls) -> BddOutcome:
        return cls(BddStatus.FAILURE, None, ())


@dataclass(frozen=True)
class BddBatch:
    """Result of decoding N component words at once.

    `flips` has shape (N, 2); unused slots hold -1. Failed words have no flips.
    """
    success: np.ndarray
    flips: np.ndarray

    def __len__(self) -> int:
        return len(self.success)

    def flip_mask(self, n: int = 256) -> np.ndarray:
        mask = np.zeros((len(self.success), n), dtype=bool)
        rows, slots = np.nonzero(self.flips >= 0)
        mask[rows, self.flips[rows, slots]] = True
        return mask

    def flip_counts(self) -> np.ndarray:
        return (self.flips >= 0).sum(axis=1)

    def apply(self, words: np.ndarray) -> np.ndarray:
        """Return a copy of `words` with every successful correction applied."""
        return words ^ self.flip_mask(words.shape[1]).astype(np.uint8)

    def only(self, keep: np.ndarray) -> BddBatch:
        """Demote every success outside `keep` to a failure."""
        success = self.success & keep
        return BddBatch(success,
                        np.where(success[:, None], self.flips, -1).astype(np.int16))


# *** The component code ******************************************************

class ComponentCode:
    """The eBCH(256, 239) code with radius-2 bounded-distance decoding.

    Instances are immutable after construction and safe to share.
    """
    n_inner = FIELD_ORDER
    n = FIELD_ORDER + 1
    k = 239
    t = 2

    field: GaloisField
    generator: int
    parity_matrix: np.ndarray
    syndrome_bits: np.ndarray

    def __init__(self, field: GaloisField = GF) -> None:
        self.field = field
        self.generator = _clmul(minimal_polynomial(field, 1),
                                minimal_polynomial(field, 3))
        r = self.n_inner - self.k
        if self.generator.bit_length() - 1 != r:
            raise ValueError("generator has degree {}, expected {}"
                             .format(self.generator.bit_length() - 1, r))

        # Row p is the BCH parity of the unit info word e_p, i.e.
        # x^(254 - p) mod g(x). Degree d lands at position 254 - d.
        parity = np.zeros((self.k, r), dtype=np.uint8)
        for p in range(self.k):
            rem = _poly_mod(1 << (self.n_inner - 1 - p), self.generator)
            for d in range(r):
                if (rem >> d) & 1:
                    parity[p, r - 1 - d] = 1
        self.parity_matrix = parity

        # Packed syndrome contribution of a one at each inner position:
        # S1 in the low byte, S3 in the high byte.
        degrees = self.n_inner - 1 - np.arange(self.n_inner)
        exp = field.exp_array
        self._position_syndromes = (exp[degrees % FIELD_ORDER]
                                    | (exp[(3 * degrees) % FIELD_ORDER] << 8))
        shifts = np.arange(2 * FIELD_BITS)
        self.syndrome_bits = ((self._position_syndromes[:, None] >> shifts) & 1
                              ).astype(np.int64)
        self._syndrome_weights = (1 << shifts).astype(np.int64)
        self._build_error_table()
        logger.debug("eBCH(%d, %d) ready, generator %#x", self.n, self.k,
                     self.generator)

    def _build_error_table(self) -> None:
        table_size = 1 << (2 * FIELD_BITS)
        count = np.full(table_size, -1, dtype=np.int8)
        positions = np.full((table_size, self.t), -1, dtype=np.int16)

        single = self._position_syndromes
        i, j = np.triu_indices(self.n_inner, k=1)
        pair = single[i] ^ single[j]
        everything = np.concatenate([[0], single, pair])
        assert len(np.unique(everything)) == len(everything), \
            "weight <= 2 patterns must have distinct syndromes"

        count[0] = 0
        count[single] = 1
        positions[single, 0] = np.arange(self.n_inner)
        count[pair] = 2
        positions[pair, 0] = i
        positions[pair, 1] = j
        self._error_count = count
        self._error_positions = positions

    @property
    def rate(self) -> float:
        return self.k / self.n

    @property
    def generator_weight(self) -> int:
        """Weight of the extended codeword built from g(x) itself."""
        w = bin(self.generator).count('1')
        return w + (w & 1)

    # --- shape checks ---

    def _words(self, words: typing.Any) -> np.ndarray:
        words = np.asarray(words, dtype=np.uint8)
        if words.shape[-1:] != (self.n,):
            raise CodeLengthError("component words must have length {}, got shape {}"
                                  .format(self.n, words.shape))
        return words

    # --- encoding ---

    def encode(self, info: typing.Any) -> np.ndarray:
        """Systematically encode info words of shape (..., 239)."""
        info = np.asarray(info, dtype=np.uint8)
        if info.shape[-1:] != (self.k,):
            raise CodeLengthError("info words must have length {}, got shape {}"
                                  .format(self.k, info.shape))
        parity = (info.astype(np.int64) @ self.parity_matrix) & 1
        inner = np.concatenate([info, parity.astype(np.uint8)], axis=-1)
        overall = inner.sum(axis=-1, dtype=np.int64) & 1
        return np.concatenate([inner, overall[..., None].astype(np.uint8)], axis=-1)

    def syndromes(self, words: typing.Any) -> np.ndarray:
        """Packed syndromes S1 | S3 << 8 of words of shape (..., 256)."""
        words = self._words(words)
        bits = (words[..., :self.n_inner].astype(np.int64) @ self.syndrome_bits) & 1
        return bits @ self._syndrome_weights

    def is_codeword(self, words: typing.Any) -> np.ndarray:
        words = self._words(words)
        even = (words.sum(axis=-1, dtype=np.int64) & 1) == 0
        return (self.syndromes(words) == 0) & even

    # --- algebraic decoding ---

    def _position(self, degree: int) -> int:
        return self.n_inner - 1 - degree

    def _chien(self, sigma1: int, sigma2: int) -> typing.List[int]:
        """Degrees d such that alpha^-d is a root of 1 + s1 x + s2 x^2."""
        log = self.field.log
        d = np.arange(FIELD_ORDER)
        exp = self.field.exp_array
        value = (1 ^ exp[(log[sigma1] - d) % FIELD_ORDER]
                 ^ exp[(log[sigma2] - 2 * d) % FIELD_ORDER])
        return [int(x) for x in np.flatnonzero(value == 0)]

    def locate_errors(self, s1: int, s3: int) -> typing.Optional[typing.Tuple[int, ...]]:
        """Peterson solve for t = 2. Returns inner error positions, or None
        when no pattern of weight <= 2 has these syndromes."""
        f = self.field
        if s1 == 0:
            return () if s3 == 0 else None
        s1_cubed = f.pow(s1, 3)
        if s3 == s1_cubed:
            return (self._position(f.log[s1]),)
        sigma2 = f.mul(s3 ^ s1_cubed, f.inv(s1))
        degrees = self._chien(s1, sigma2)
        if len(degrees) != 2:
            return None
        return tuple(sorted(self._position(d) for d in degrees))

    def bdd(self, word: typing.Any) -> BddOutcome:
        word = self._words(word)
        if word.ndim != 1:
            raise CodeLengthError("bdd() takes a single word; use bdd_batch()")
        s = int(self.syndromes(word))
        inner = self.locate_errors(s & 0xFF, s >> 8)
        if inner is None:
            return BddOutcome.failure()
        flips = list(inner)
        if (int(word.sum()) + len(flips)) & 1:
            flips.append(self.n - 1)
        if len(flips) > self.t:
            return BddOutcome.failure()

        codeword = word.copy()
        codeword[flips] ^= 1
        assert len(flips) <= self.t
        return BddOutcome(BddStatus.SUCCESS, codeword, tuple(flips))

    def bdd_batch(self, words: typing.Any) -> BddBatch:
        """Decode an (N, 256) array of words. Same results as bdd() per row."""
        words = self._words(words)
        if words.ndim != 2:
            raise CodeLengthError("bdd_batch() takes an (N, {}) array".format(self.n))
        s = self.syndromes(words)
        count = self._error_count[s].astype(np.int64)
        positions = self._error_positions[s]
        inner_ok = count >= 0
        weight = words.sum(axis=1, dtype=np.int64) + np.where(inner_ok, count, 0)
        parity_flip = (weight & 1) == 1
        success = inner_ok & (count + parity_flip <= self.t)

        flips = np.where(success[:, None], positions, -1).astype(np.int16)
        rows = np.flatnonzero(success & parity_flip)
        flips[rows, count[rows]] = self.n - 1
        return BddBatch(success, flips)


@functools.lru_cache(maxsize=None)
def default_code() -> ComponentCode:
    return ComponentCode()


def ebch_encode(info: typing.Any) -> np.ndarray:
    return default_code().encode(info)


def ebch_bdd(word: typing.Any) -> BddOutcome:
    return default_code().bdd(word)


def ebch_is_codeword(word: typing.Any) -> bool:
    return bool(default_code().is_codeword(word))


# *** Miscorrection census ****************************************************

@dataclass(frozen=True)
class FlipCensus:
    weight: int
    samples: int
    failures: int
    miscorrections: int

    @property
    def miscorrection_fraction(self) -> float:
        return self.miscorrections / self.samples if self.samples else 0.0


def flip_census(
        code: ComponentCode,
        codeword: np.ndarray,
        rng: np.random.Generator,
        samples: int,
        weight: int = 3
) -> FlipCensus:
    """Decode `samples` random corruptions of `codeword` with `weight` flips.

    For weight >= 3 any success is a miscorrection: the extended code has
    distance 6, so the corrupted word is within radius 2 only of other
    codewords. With the parity bookkeeping of bdd(), weight 3 always fails.
    """
    if not code.t < weight <= code.n:
        raise ValueError("census weight must be in ({}, {}], got {}"
                         .format(code.t, code.n, weight))
    positions = np.argsort(rng.random((samples, code.n)), axis=1)[:, :weight]
    words = np.repeat(codeword[None, :], samples, axis=0)
    np.put_along_axis(words, positions, 1 - np.take_along_axis(words, positions, 1), 1)
    outcome = code.bdd_batch(words)
    decoded = outcome.apply(words)
    miscorrected = outcome.success & (decoded != codeword).any(axis=1)
    assert (miscorrected == outcome.success).all()
    return FlipCensus(weight, samples, int((~outcome.success).sum()),
                      int(miscorrected.sum()))


def three_flip_census(
        code: ComponentCode,
        codeword: np.ndarray,
        rng: np.random.Generator,
        samples: int
) -> FlipCensus:
    return flip_census(code, codeword, rng, samples, 3)
