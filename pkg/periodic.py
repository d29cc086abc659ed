"""
Lossless predictive coder for periodic signals.

Each sample is predicted from a retained copy of an earlier period; only the
prediction residuals are stored. The dictionary is a ring of the last K stored
periods. At the boundary before period m the coder picks the stored period
with the smallest sum of absolute differences against period m-1, ties to the
most recent, and predicts period m from it. Period m-1 is then stored,
evicting the oldest. Period 1 is predicted from period 0, and period 0 is
coded as first-order deltas.

Payload layout, little-endian:

    offset  size  field
    0       4     period P (samples)
    4       4     template count K
    8       8     sample count
    16      8     scale (float64, volts per count)
    24      8     sample rate (float64, Hz)
    32      ...   LZW payload of the zig-zag varint residual stream
"""

import logging
import struct
from collections import deque
from dataclasses import dataclass
from typing import List

import numpy as np

from container import Algo, make_codestream
from errors import CorruptStream, InvalidSignal, NoPeriodicity, SignalTooShort
from lossless_codecs import lzw_compress_bytes, lzw_expand_bytes
from signalgen import INT16_MAX, INT16_MIN, QuantizedSignal

logger = logging.getLogger(__name__)

DEFAULT_TEMPLATES = 4
DEFAULT_MIN_PERIOD = 8
PERIODICITY_THRESHOLD = 0.5
TIE_TOLERANCE = 1e-9

_HEADER = struct.Struct("<IIQdd")
HEADER_SIZE = _HEADER.size  # 32


@dataclass(frozen=True)
class PeriodicModel:
    period_p: int
    template_count_k: int = DEFAULT_TEMPLATES
    sample_count: int = 0
    sample_width: int = 16

    def __post_init__(self):
        if self.period_p < 2:
            raise InvalidSignal("period must be at least 2 samples")
        if self.template_count_k < 1:
            raise InvalidSignal("template count must be at least 1")


@dataclass(frozen=True)
class PredictiveAnalysis:
    """Residuals of the predictor and, for periods 1.., the period used as template"""
    model: PeriodicModel
    residuals: np.ndarray
    selected: List[int]


def normalized_autocorrelation(q, p_min, p_max):
    """Normalized autocorrelation of the mean-removed samples at lags p_min..p_max"""
    x = q.samples.astype(np.float64)
    x = x - x.mean()
    n = x.size

    size = 1 << int(2 * n - 1).bit_length()
    spectrum = np.fft.rfft(x, size)
    raw = np.fft.irfft(spectrum * np.conj(spectrum), size)[:n]

    prefix = np.concatenate(([0.0], np.cumsum(x * x)))
    lags = np.arange(p_min, p_max + 1)
    tail_energy = prefix[n] - prefix[lags]      # x[lag:]
    head_energy = prefix[n - lags]              # x[:n-lag]
    denom = np.sqrt(tail_energy * head_energy)
    with np.errstate(invalid='ignore', divide='ignore'):
        corr = np.where(denom > 0, raw[lags] / denom, -np.inf)
    return lags, corr


def estimate_period(q, p_min=None, p_max=None):
    n = len(q)
    if p_min is None:
        p_min = DEFAULT_MIN_PERIOD
    if p_max is None:
        p_max = n // 2
    if p_min < 2 or p_max > n // 2 or p_min >= p_max:
        raise SignalTooShort(
            f"period window [{p_min}, {p_max}] does not fit a {n}-sample signal"
        )
    if np.all(q.samples == q.samples[0]):
        raise NoPeriodicity("constant signal has no period")

    lags, corr = normalized_autocorrelation(q, p_min, p_max)
    peak = float(np.max(corr))
    if not peak >= PERIODICITY_THRESHOLD:
        raise NoPeriodicity(f"autocorrelation peak {peak:.3f} is below {PERIODICITY_THRESHOLD}")
    period = int(lags[np.argmax(corr >= peak - TIE_TOLERANCE)])
    logger.debug("period %d samples, correlation %.6f", period, peak)
    return period


def _select_template(x, start, period, ring):
    """Start of the stored period closest, in SAD, to the period ending at `start`

    An empty ring falls back to that period itself. Ties go to the most
    recently stored period.
    """
    last = x[start - period:start]
    best, best_sad = start - period, None
    for base in reversed(ring):
        sad = int(np.abs(last - x[base:base + period]).sum())
        if best_sad is None or sad < best_sad:
            best, best_sad = base, sad
    return best


def _residuals(x, period, templates):
    n = x.size
    r = np.empty(n, dtype=np.int64)
    warm = min(period, n)
    r[0] = x[0]
    r[1:warm] = np.diff(x[:warm])

    ring = deque(maxlen=templates)
    selected = []
    for start in range(period, n, period):
        base = _select_template(x, start, period, ring)
        end = min(start + period, n)
        r[start:end] = x[start:end] - x[base:base + end - start]
        ring.append(start - period)
        selected.append(base // period)
    return r, selected


def _reconstruct(r, period, templates):
    n = r.size
    x = np.empty(n, dtype=np.int64)
    warm = min(period, n)
    x[:warm] = np.cumsum(r[:warm])
    ring = deque(maxlen=templates)
    for start in range(period, n, period):
        base = _select_template(x, start, period, ring)
        end = min(start + period, n)
        x[start:end] = r[start:end] + x[base:base + end - start]
        ring.append(start - period)
    return x


def zigzag(values):
    values = np.asarray(values, dtype=np.int64)
    return (values << 1) ^ (values >> 63)


def unzigzag(values):
    values = np.asarray(values, dtype=np.int64)
    return (values >> 1) ^ -(values & 1)


def encode_varints(values):
    out = bytearray()
    for v in values.tolist():
        while v >= 0x80:
            out.append((v & 0x7F) | 0x80)
            v >>= 7
        out.append(v)
    return bytes(out)


def decode_varints(data, count):
    values = []
    v, shift = 0, 0
    for byte in data:
        v |= (byte & 0x7F) << shift
        if byte & 0x80:
            shift += 7
            if shift > 35:
                raise CorruptStream("residual varint is too long")
            continue
        values.append(v)
        v, shift = 0, 0
    if shift:
        raise CorruptStream("residual stream ends inside a varint")
    if len(values) != count:
        raise CorruptStream(f"residual stream holds {len(values)} values, expected {count}")
    return np.array(values, dtype=np.int64)


def predictive_analyze(q, period=None, templates=DEFAULT_TEMPLATES, p_min=None, p_max=None):
    if period is None:
        period = estimate_period(q, p_min, p_max)
    model = PeriodicModel(period, templates, len(q))
    residuals, selected = _residuals(q.samples.astype(np.int64), period, templates)
    return PredictiveAnalysis(model, residuals, selected)


def predictive_encode(q, period=None, templates=DEFAULT_TEMPLATES, p_min=None, p_max=None):
    analysis = predictive_analyze(q, period, templates, p_min, p_max)
    model = analysis.model
    stream = encode_varints(zigzag(analysis.residuals))
    header = _HEADER.pack(model.period_p, model.template_count_k, model.sample_count,
                          q.scale, q.sample_rate_hz)
    payload = header + lzw_compress_bytes(stream)
    source = q.to_bytes()
    logger.info("predictive: P=%d K=%d, %d samples -> %d payload bytes",
                model.period_p, model.template_count_k, model.sample_count, len(payload))
    return make_codestream(Algo.PREDICTIVE, payload, len(source), source=source)


def read_header(payload):
    if len(payload) < HEADER_SIZE:
        raise CorruptStream("predictive payload is shorter than its header")
    period, templates, count, scale, sample_rate_hz = _HEADER.unpack_from(payload)
    if period < 2 or templates < 1 or count < 1 or not scale > 0 or not sample_rate_hz > 0:
        raise CorruptStream("predictive header holds invalid parameters")
    return PeriodicModel(period, templates, count), scale, sample_rate_hz


def predictive_decode(c) -> QuantizedSignal:
    if c.algo != Algo.PREDICTIVE:
        raise CorruptStream(f"expected a PREDICTIVE stream, got {c.algo.name}")
    model, scale, sample_rate_hz = read_header(c.payload)
    if c.original_len != 2 * model.sample_count:
        raise CorruptStream("sample count disagrees with the stream length")

    stream = lzw_expand_bytes(c.payload[HEADER_SIZE:])
    residuals = unzigzag(decode_varints(stream, model.sample_count))
    x = _reconstruct(residuals, model.period_p, model.template_count_k)
    if x.min() < INT16_MIN or x.max() > INT16_MAX:
        raise CorruptStream("reconstructed samples leave the 16-bit range")

    q = QuantizedSignal(x, scale, sample_rate_hz)
    c.verify_source(q.to_bytes())
    if predictive_encode(q, model.period_p, model.template_count_k).payload != c.payload:
        raise CorruptStream("predictive stream is not the canonical encoding of its output")
    return q
