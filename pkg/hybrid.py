"""
Hybrid coder: a five-parameter fundamental plus a wavelet-coded residue.

The fundamental (begin, end, amplitude, frequency, phase) is found from the
peak of a Hann-windowed, zero-padded spectrum, refined by quadratic
interpolation of the log magnitude and a Gauss-Newton least-squares fit.
What the sinusoid does not explain goes through the wavelet block coder.

Payload, little-endian: a 57-byte parameter block

    begin (u64), end (u64), amplitude, freq_hz, phase_rad, sample_rate_hz
    (float64 each), sample count (u64), residue mode (u8: 0 none, 1 wavelet)

followed, in mode 1, by a wavelet block.
"""

import logging
import math
import struct
from dataclasses import dataclass

import numpy as np

from container import HEADER_SIZE as CONTAINER_HEADER_SIZE, Algo, make_codestream
from errors import (
    BadInterval,
    BandEmpty,
    CorruptStream,
    InvalidSignal,
    NoFundamental,
    NyquistViolation,
    RatioUnreachable,
    SignalTooShort,
)
from signalgen import DEFAULT_FUNDAMENTAL_HZ, Signal, reference_bytes
from wavelet import byte_budget, decode_block, encode_block

logger = logging.getLogger(__name__)

PEAK_TO_MEDIAN = 3.0
MIN_CYCLES = 4
ZERO_PAD_FACTOR = 8
RESIDUE_FLOOR = 1e-5
SEGMENT_TOLERANCE_DB = 3.0
REFINE_ITERATIONS = 4

RESIDUE_NONE = 0
RESIDUE_WAVELET = 1

_PARAMS = struct.Struct("<QQddddQB")
PARAMS_SIZE = _PARAMS.size  # 57


@dataclass(frozen=True)
class FundamentalParams:
    begin_sample: int
    end_sample: int
    amplitude: float
    freq_hz: float
    phase_rad: float

    def __post_init__(self):
        if not 0 <= self.begin_sample < self.end_sample:
            raise BadInterval(f"[{self.begin_sample}, {self.end_sample}) is not a valid interval")
        if not self.amplitude >= 0:
            raise InvalidSignal("amplitude must be non-negative")
        if not self.freq_hz > 0:
            raise NyquistViolation("fundamental frequency must be positive")
        if not -math.pi < self.phase_rad <= math.pi:
            raise InvalidSignal("phase must lie in (-pi, pi]")

    def check_against(self, s):
        if self.end_sample > len(s):
            raise BadInterval(f"end sample {self.end_sample} is past the {len(s)}-sample signal")
        if self.freq_hz >= s.sample_rate_hz / 2:
            raise NyquistViolation(f"{self.freq_hz} Hz is above Nyquist")

    def waveform(self, n, sample_rate_hz):
        """The sinusoid over [begin, end) of an n-sample record, zero elsewhere"""
        out = np.zeros(n)
        k = np.arange(self.begin_sample, self.end_sample, dtype=np.float64)
        out[self.begin_sample:self.end_sample] = self.amplitude * np.sin(
            2.0 * np.pi * self.freq_hz * k / sample_rate_hz + self.phase_rad
        )
        return out


def default_band(fundamental_hz=DEFAULT_FUNDAMENTAL_HZ):
    return 0.5 * fundamental_hz, 1.5 * fundamental_hz


def wrap_phase(phi):
    phi = math.remainder(phi, 2.0 * math.pi)
    return math.pi if phi <= -math.pi else phi


def _peak_frequency(x, sample_rate_hz, band):
    f_lo, f_hi = band
    n = x.size
    nfft = 1 << int(ZERO_PAD_FACTOR * n - 1).bit_length()
    magnitude = np.abs(np.fft.rfft(x * np.hanning(n), nfft))
    freqs = np.arange(magnitude.size) * sample_rate_hz / nfft
    in_band = np.flatnonzero((freqs >= f_lo) & (freqs <= f_hi))
    if in_band.size < 3:
        raise BandEmpty(f"no spectral bins between {f_lo} and {f_hi} Hz")

    k = int(in_band[np.argmax(magnitude[in_band])])
    peak = magnitude[k]
    median = float(np.median(magnitude[in_band]))
    if not peak > PEAK_TO_MEDIAN * median:
        raise NoFundamental(
            f"spectral peak {peak:.3g} is not {PEAK_TO_MEDIAN:g}x the band median {median:.3g}"
        )

    offset = 0.0
    if 0 < k < magnitude.size - 1 and np.all(magnitude[k - 1:k + 2] > 0):
        alpha, beta, gamma = np.log(magnitude[k - 1:k + 2])
        denom = alpha - 2.0 * beta + gamma
        if denom < 0:
            offset = 0.5 * (alpha - gamma) / denom
    return (k + offset) * sample_rate_hz / nfft


def _fit(x, begin, freq_hz, sample_rate_hz):
    """Least-squares a*sin + b*cos, then Gauss-Newton on the frequency"""
    k = np.arange(begin, begin + x.size, dtype=np.float64)
    omega = 2.0 * np.pi * freq_hz / sample_rate_hz

    def linear(w):
        basis = np.column_stack([np.sin(w * k), np.cos(w * k)])
        coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
        r = x - basis @ coef
        return coef, r, float(np.dot(r, r))

    (a, b), r, cost = linear(omega)
    for _ in range(REFINE_ITERATIONS):
        s, c = np.sin(omega * k), np.cos(omega * k)
        jacobian = np.column_stack([s, c, k * (a * c - b * s)])
        step, *_ = np.linalg.lstsq(jacobian, r, rcond=None)
        trial = omega + step[2]
        (ta, tb), tr, tcost = linear(trial)
        if not tcost < cost:
            break
        omega, a, b, r, cost = trial, ta, tb, tr, tcost

    return math.hypot(a, b), omega * sample_rate_hz / (2.0 * np.pi), wrap_phase(math.atan2(b, a))


def _dominant_segment(x, freq_hz, sample_rate_hz):
    """Longest run of whole cycles whose RMS stays within 3 dB of the median cycle RMS"""
    cycle = max(1, int(round(sample_rate_hz / freq_hz)))
    count = x.size // cycle
    if count < 1:
        return 0, x.size
    rms = np.sqrt(np.mean(x[:count * cycle].reshape(count, cycle) ** 2, axis=1))
    median = float(np.median(rms))
    if median <= 0:
        return 0, x.size
    with np.errstate(divide='ignore'):
        level_db = 20.0 * np.log10(rms / median)
    good = np.abs(level_db) <= SEGMENT_TOLERANCE_DB

    best, run_start, best_span = 0, 0, (0, 0)
    for i, ok in enumerate(np.append(good, False)):
        if ok:
            continue
        if i - run_start > best:
            best, best_span = i - run_start, (run_start, i)
        run_start = i + 1
    if best == 0:
        return 0, x.size
    return best_span[0] * cycle, best_span[1] * cycle


def estimate_fundamental(s, search_band=None, segment=False):
    fs = s.sample_rate_hz
    f_lo, f_hi = search_band or default_band()
    if not 0 < f_lo < f_hi < fs / 2:
        raise BandEmpty(f"search band [{f_lo}, {f_hi}] Hz is not inside (0, {fs / 2}) Hz")
    if len(s) < MIN_CYCLES * fs / f_lo:
        raise SignalTooShort(f"need {MIN_CYCLES} cycles at {f_lo} Hz, have {len(s)} samples")

    x = np.asarray(s.samples, dtype=np.float64)
    if not np.any(x):
        raise NoFundamental("zero signal has no fundamental")

    freq_hz = _peak_frequency(x, fs, (f_lo, f_hi))
    begin, end = 0, x.size
    if segment:
        begin, end = _dominant_segment(x, freq_hz, fs)
        if end - begin < MIN_CYCLES * fs / f_lo:
            begin, end = 0, x.size
        elif (begin, end) != (0, x.size):
            freq_hz = _peak_frequency(x[begin:end], fs, (f_lo, f_hi))

    amplitude, freq_hz, phase = _fit(x[begin:end], begin, freq_hz, fs)
    logger.debug("fundamental %.6f Hz, amplitude %.6g, phase %.6f over [%d, %d)",
                 freq_hz, amplitude, phase, begin, end)
    return FundamentalParams(begin, end, amplitude, freq_hz, phase)


def subtract_fundamental(s, p):
    p.check_against(s)
    return Signal(s.samples - p.waveform(len(s), s.sample_rate_hz), s.sample_rate_hz)


def hybrid_encode(s, residue_plan, search_band=None, segment=False):
    params = estimate_fundamental(s, search_band, segment)
    residue = subtract_fundamental(s, params)
    n = len(s)
    budget = byte_budget(n, residue_plan.target_ratio)
    overhead = CONTAINER_HEADER_SIZE + PARAMS_SIZE
    if budget < overhead:
        raise RatioUnreachable(f"{budget} bytes cannot hold the fundamental parameters")

    fraction = residue.energy / s.energy
    mode = RESIDUE_NONE if fraction <= RESIDUE_FLOOR else RESIDUE_WAVELET
    block = b''
    if mode == RESIDUE_WAVELET:
        block = encode_block(np.asarray(residue.samples), s.sample_rate_hz,
                             residue_plan.levels, residue_plan.quantizer_bits,
                             budget - overhead, overhead)

    head = pack_params(params, s.sample_rate_hz, n, mode)
    logger.info("hybrid: %.4f Hz fundamental, residue %.3e of energy, %d byte payload",
                params.freq_hz, fraction, len(head) + len(block))
    return make_codestream(Algo.HYBRID, head + block, reference_bytes(n))


def pack_params(params, sample_rate_hz, n, mode):
    return _PARAMS.pack(params.begin_sample, params.end_sample, params.amplitude,
                        params.freq_hz, params.phase_rad, sample_rate_hz, n, mode)


def read_params(payload):
    if len(payload) < PARAMS_SIZE:
        raise CorruptStream("hybrid payload is shorter than its parameter block")
    begin, end, amplitude, freq_hz, phase, fs, n, mode = _PARAMS.unpack_from(payload)
    if mode not in (RESIDUE_NONE, RESIDUE_WAVELET) or n < 1 or end > n or not fs > 0:
        raise CorruptStream("hybrid parameter block is inconsistent")
    try:
        params = FundamentalParams(begin, end, amplitude, freq_hz, phase)
    except (BadInterval, InvalidSignal, NyquistViolation) as e:
        raise CorruptStream(f"hybrid parameters are invalid: {e}") from None
    return params, fs, n, mode


def hybrid_decode(c):
    if c.algo != Algo.HYBRID:
        raise CorruptStream(f"expected a HYBRID stream, got {c.algo.name}")
    params, fs, n, mode = read_params(c.payload)
    samples = params.waveform(n, fs)
    rest = c.payload[PARAMS_SIZE:]
    if mode == RESIDUE_WAVELET:
        residue = decode_block(rest)
        if len(residue) != n:
            raise CorruptStream("residue length disagrees with the parameter block")
        samples = samples + residue.samples
    elif rest:
        raise CorruptStream("hybrid payload has trailing bytes")
    return Signal(samples, fs)
