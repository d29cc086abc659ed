"""
Daubechies-4 discrete wavelet transform and the budgeted lossy coder built on it.

The transform is PyWavelets' db2 pyramid with periodization, which is the
orthonormal periodic-boundary D4 transform. Detail bands are stored finest
first: details[0] has padded_len/2 coefficients, details[-1] padded_len/2**levels,
the same as the approximation band.

Lossy payload, little-endian:

    offset  size  field
    0       1     levels
    1       1     quantizer bits
    2       1     body mode (0 raw, 1 LZW)
    3       1     reserved
    4       4     padded_len
    8       4     original_len
    12      4     kept coefficient count m
    16      8     sample rate (float64)
    24      8     max |c| (float64)
    32      8     achieved NMSE (float64)
    40      8     achieved ratio (float64)
    48      ...   body: significance bitmap (1 bit per coefficient, MSB first)
                  then m offset-binary quantizer indices of `bits` bits each
"""

import logging
import math
import struct
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np
import pywt

from container import HEADER_SIZE as CONTAINER_HEADER_SIZE, Algo, make_codestream
from errors import (
    ConfigError,
    CorruptStream,
    RatioUnreachable,
    ShapeMismatch,
    TooManyLevels,
)
from lossless_codecs import lzw_compress_bytes, lzw_expand_bytes
from signalgen import Signal, reference_bytes

logger = logging.getLogger(__name__)

DEFAULT_LEVELS = 5
DEFAULT_QUANTIZER_BITS = 12
MIN_BAND = 4

WAVELET = pywt.Wavelet('db2')
D4_LOW = np.array(WAVELET.rec_lo)
D4_HIGH = np.array(WAVELET.rec_hi)

MODE_RAW = 0
MODE_LZW = 1

_HEADER = struct.Struct("<BBBxIIIdddd")
HEADER_SIZE = _HEADER.size  # 48


def filter_residuals(h=D4_LOW):
    """How far h is from each defining equation of the D4 low-pass filter"""
    return {
        'sum': abs(h.sum() - math.sqrt(2.0)),
        'shift_orthogonality': abs(h[0] * h[2] + h[1] * h[3]),
        'vanishing_moment': abs(h[0] - h[1] + h[2] - h[3]),
        'unit_norm': abs(np.dot(h, h) - 1.0),
    }


_worst = max(filter_residuals(np.array(WAVELET.dec_lo)).values())
if _worst > 1e-12:
    raise RuntimeError(f"D4 filter constants are off by {_worst:.3e}")


@dataclass(frozen=True, eq=False)
class WaveletDecomposition:
    levels: int
    approximation: np.ndarray
    details: Tuple[np.ndarray, ...]
    original_len: int
    padded_len: int
    sample_rate_hz: float

    def check_shapes(self):
        if self.levels < 1 or len(self.details) != self.levels:
            raise ShapeMismatch(f"expected {self.levels} detail bands, got {len(self.details)}")
        if self.padded_len % (1 << self.levels):
            raise ShapeMismatch("padded length is not a multiple of 2**levels")
        for j, band in enumerate(self.details, start=1):
            if band.size != self.padded_len >> j:
                raise ShapeMismatch(f"detail band {j} has {band.size} coefficients, "
                                    f"expected {self.padded_len >> j}")
        if self.approximation.size != self.padded_len >> self.levels:
            raise ShapeMismatch("approximation band has the wrong length")
        if not 1 <= self.original_len <= self.padded_len:
            raise ShapeMismatch("original length does not fit the padded length")

    def coefficients(self):
        """Every coefficient: approximation first, then details finest first"""
        return np.concatenate([self.approximation, *self.details])

    @property
    def energy(self):
        c = self.coefficients()
        return float(np.dot(c, c))


@dataclass(frozen=True)
class LossyPlan:
    target_ratio: float
    quantizer_bits: int = DEFAULT_QUANTIZER_BITS
    levels: int = DEFAULT_LEVELS

    def __post_init__(self):
        if not self.target_ratio > 1:
            raise ConfigError("target_ratio must be greater than 1")
        if not 4 <= self.quantizer_bits <= 16:
            raise ConfigError("quantizer_bits must lie within 4..16")
        if self.levels < 1:
            raise ConfigError("levels must be at least 1")


class WaveletHeader(NamedTuple):
    levels: int
    quantizer_bits: int
    mode: int
    padded_len: int
    original_len: int
    kept: int
    sample_rate_hz: float
    max_abs: float
    nmse: float
    ratio: float


def padded_length(n, levels):
    block = 1 << levels
    return -(-n // block) * block


def _forward(x, levels):
    bands = pywt.wavedec(x, WAVELET, mode='periodization', level=levels)
    return bands[0], tuple(reversed(bands[1:]))


def _inverse(approx, details):
    return pywt.waverec([approx, *reversed(details)], WAVELET, mode='periodization')


def dwt(s, levels=DEFAULT_LEVELS):
    if levels < 1:
        raise TooManyLevels("levels must be at least 1")
    n = len(s)
    padded_len = padded_length(n, levels)
    if padded_len >> levels < MIN_BAND:
        raise TooManyLevels(
            f"{levels} levels leave fewer than {MIN_BAND} approximation coefficients "
            f"for {n} samples"
        )
    x = np.zeros(padded_len)
    x[:n] = s.samples
    approx, details = _forward(x, levels)
    return WaveletDecomposition(levels, approx, details, n, padded_len, s.sample_rate_hz)


def idwt(d):
    d.check_shapes()
    x = _inverse(np.asarray(d.approximation, dtype=np.float64),
                 [np.asarray(b, dtype=np.float64) for b in d.details])
    return Signal(x[:d.original_len], d.sample_rate_hz)


def _split(coefficients, padded_len, levels):
    bounds = np.cumsum([padded_len >> levels] + [padded_len >> j for j in range(1, levels + 1)])
    parts = np.split(coefficients, bounds[:-1])
    return parts[0], tuple(parts[1:])


def _bitmap_bytes(n):
    return -(-n // 8)


def _pack_indices(u, bits):
    if u.size == 0:
        return b''
    shifts = np.arange(bits - 1, -1, -1)
    planes = ((u[:, None] >> shifts) & 1).astype(np.uint8)
    return np.packbits(planes.ravel()).tobytes()


def _unpack_indices(data, count, bits):
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    planes = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    if planes[count * bits:].any():
        raise CorruptStream("nonzero padding after the quantizer indices")
    planes = planes[:count * bits].reshape(count, bits).astype(np.int64)
    return planes @ (1 << np.arange(bits - 1, -1, -1))


def kept_budget(padded_len, bits, budget_bytes):
    """Largest coefficient count whose raw block fits in budget_bytes"""
    room = budget_bytes - HEADER_SIZE - _bitmap_bytes(padded_len)
    if room < 0:
        return -1
    return min(padded_len, (room * 8) // bits)


def encode_block(x, sample_rate_hz, levels, bits, budget_bytes, overhead_bytes):
    """
    Code samples x into a self-describing block of at most budget_bytes.

    overhead_bytes is whatever the caller frames around the block; it counts
    toward the ratio recorded in the header.
    """
    n = x.size
    padded_len = padded_length(n, levels)
    if padded_len >> levels < MIN_BAND:
        raise TooManyLevels(f"{levels} levels are too many for {n} samples")

    m = kept_budget(padded_len, bits, budget_bytes)
    if m < 0:
        raise RatioUnreachable(
            f"{budget_bytes} bytes cannot hold even an empty {padded_len}-coefficient block"
        )

    padded = np.zeros(padded_len)
    padded[:n] = x
    approx, details = _forward(padded, levels)
    c = np.concatenate([approx, *details])
    magnitude = np.abs(c)
    max_abs = float(magnitude.max())
    m = min(m, int(np.count_nonzero(magnitude)))

    kept = np.sort(np.argsort(-magnitude, kind='stable')[:m])
    top = (1 << (bits - 1)) - 1
    step = max_abs / top if max_abs > 0 else 0.0
    if m:
        q = np.sign(c[kept]) * np.floor(magnitude[kept] / step + 0.5)
        q = np.clip(q, -top, top).astype(np.int64)
    else:
        q = np.zeros(0, dtype=np.int64)

    bitmap = np.zeros(padded_len, dtype=np.uint8)
    bitmap[kept] = 1
    body = np.packbits(bitmap).tobytes() + _pack_indices(q + top, bits)
    mode = MODE_RAW
    squeezed = lzw_compress_bytes(body)
    if len(squeezed) < len(body):
        body, mode = squeezed, MODE_LZW

    restored = np.zeros(padded_len)
    restored[kept] = q * step
    error = x - _inverse(*_split(restored, padded_len, levels))[:n]
    energy = float(np.dot(x, x))
    nmse = float(np.dot(error, error)) / energy if energy > 0 else 0.0
    size = HEADER_SIZE + len(body)
    ratio = reference_bytes(n) / (overhead_bytes + size)

    header = _HEADER.pack(levels, bits, mode, padded_len, n, m,
                          sample_rate_hz, max_abs, nmse, ratio)
    logger.debug("wavelet block: kept %d of %d, mode %d, %d bytes, NMSE %.3e",
                 m, padded_len, mode, size, nmse)
    return header + body


def read_header(block):
    if len(block) < HEADER_SIZE:
        raise CorruptStream("wavelet block is shorter than its header")
    header = WaveletHeader(*_HEADER.unpack_from(block))
    if header.levels < 1 or not 4 <= header.quantizer_bits <= 16 or header.mode > MODE_LZW:
        raise CorruptStream("wavelet header holds invalid parameters")
    if (header.padded_len != padded_length(header.original_len, header.levels)
            or header.original_len < 1 or header.kept > header.padded_len
            or header.padded_len >> header.levels < MIN_BAND):
        raise CorruptStream("wavelet header lengths are inconsistent")
    if not header.sample_rate_hz > 0 or not header.max_abs >= 0:
        raise CorruptStream("wavelet header holds invalid parameters")
    return header


def decode_block(block):
    header = read_header(block)
    body = bytes(block[HEADER_SIZE:])
    if header.mode == MODE_LZW:
        body = lzw_expand_bytes(body)

    n_bitmap = _bitmap_bytes(header.padded_len)
    if len(body) != n_bitmap + _bitmap_bytes(header.kept * header.quantizer_bits):
        raise CorruptStream("wavelet body has the wrong length")
    bitmap = np.unpackbits(np.frombuffer(body[:n_bitmap], dtype=np.uint8))
    if bitmap[header.padded_len:].any():
        raise CorruptStream("nonzero padding after the significance bitmap")
    kept = np.flatnonzero(bitmap[:header.padded_len])
    if kept.size != header.kept:
        raise CorruptStream("significance bitmap disagrees with the kept count")

    top = (1 << (header.quantizer_bits - 1)) - 1
    u = _unpack_indices(body[n_bitmap:], header.kept, header.quantizer_bits)
    if u.size and u.max() > 2 * top:
        raise CorruptStream("quantizer index out of range")
    step = header.max_abs / top
    restored = np.zeros(header.padded_len)
    restored[kept] = (u - top) * step
    x = _inverse(*_split(restored, header.padded_len, header.levels))
    return Signal(x[:header.original_len], header.sample_rate_hz)


def byte_budget(n_samples, target_ratio):
    return int(math.floor(reference_bytes(n_samples) / target_ratio))


def wavelet_compress(s, plan):
    budget = byte_budget(len(s), plan.target_ratio)
    block = encode_block(np.asarray(s.samples, dtype=np.float64), s.sample_rate_hz,
                         plan.levels, plan.quantizer_bits,
                         budget - CONTAINER_HEADER_SIZE, CONTAINER_HEADER_SIZE)
    header = read_header(block)
    logger.info("wavelet: target %.2f:1, achieved %.2f:1, NMSE %.3e",
                plan.target_ratio, header.ratio, header.nmse)
    return make_codestream(Algo.WAVELET, block, reference_bytes(len(s)))


def wavelet_decompress(c):
    if c.algo != Algo.WAVELET:
        raise CorruptStream(f"expected a WAVELET stream, got {c.algo.name}")
    return decode_block(c.payload)
