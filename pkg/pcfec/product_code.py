"""product_code.py - Framing for the eBCH(256, 239)^2 product code.

A frame is a 256x256 bit array whose rows and columns are all component
codewords. Information lives in the top-left 239x239 block; the remaining
rows and columns are parity, including the checks-on-checks corner. Frames
serialize in row-major order.
"""

from __future__ import annotations
# mypy: disallow-untyped-defs, disallow-incomplete-defs, disallow-untyped-calls

import typing
from dataclasses import dataclass

import numpy as np

from .gf_bch import ComponentCode, default_code


__all__ = ['FrameShapeError', 'CodeRate', 'PcFrame', 'code_rate', 'pc_encode',
           'pc_extract_info', 'frame_validity', 'BITS_PER_4D_SYMBOL']


BITS_PER_4D_SYMBOL = 6


class FrameShapeError(ValueError):
    pass


@dataclass(frozen=True)
class CodeRate:
    k: int
    n: int
    bits_per_symbol: int = BITS_PER_4D_SYMBOL

    @property
    def rate(self) -> float:
        return (self.k / self.n) ** 2

    @property
    def net_se(self) -> float:
        """Information bits per 4D symbol."""
        return self.bits_per_symbol * self.rate


@dataclass(frozen=True, eq=False)
class PcFrame:
    """A 256x256 product-code array. Treat `bits` as read-only."""
    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1]:
            raise FrameShapeError("frame must be square, got shape {}"
                                  .format(bits.shape))
        object.__setattr__(self, 'bits', bits)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, PcFrame) and np.array_equal(self.bits, other.bits)

    def copy(self) -> PcFrame:
        return PcFrame(self.bits.copy())

    def serialize(self) -> np.ndarray:
        return self.bits.reshape(-1).copy()

    @classmethod
    def deserialize(cls, bits: np.ndarray, n: int = 256) -> PcFrame:
        bits = np.asarray(bits, dtype=np.uint8)
        if bits.size != n * n:
            raise FrameShapeError("expected {} bits, got {}".format(n * n, bits.size))
        return cls(bits.reshape(n, n).copy())

    @classmethod
    def zeros(cls, n: int = 256) -> PcFrame:
        return cls(np.zeros((n, n), dtype=np.uint8))


def code_rate(code: typing.Optional[ComponentCode] = None) -> CodeRate:
    code = code or default_code()
    return CodeRate(code.k, code.n)


def pc_encode(info: typing.Any, code: typing.Optional[ComponentCode] = None) -> PcFrame:
    """Encode a kxk information block: rows first, then all n columns."""
    code = code or default_code()
    info = np.asarray(info, dtype=np.uint8)
    if info.shape != (code.k, code.k):
        raise FrameShapeError("info block must be {0}x{0}, got shape {1}"
                              .format(code.k, info.shape))
    rows = code.encode(info)
    return PcFrame(np.ascontiguousarray(code.encode(rows.T).T))


def pc_extract_info(frame: PcFrame, code: typing.Optional[ComponentCode] = None) -> np.ndarray:
    code = code or default_code()
    return frame.bits[:code.k, :code.k].copy()


def frame_validity(
        frame: PcFrame,
        code: typing.Optional[ComponentCode] = None
) -> typing.Tuple[np.ndarray, np.ndarray]:
    """Codebook membership of every row and every column."""
    code = code or default_code()
    return code.is_codeword(frame.bits), code.is_codeword(frame.bits.T)
