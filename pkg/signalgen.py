"""
Deterministic test waveforms for power-quality coding.

Sinusoids, voltage dips, recurring damped transients, noise calibrated to an
exact SNR, plus the 16-bit quantizer and the CSV signal format.

Noise comes from a 64-bit linear congruential generator
(state = 6364136223846793005 * state + 1442695040888963407 mod 2**64)
feeding Box-Muller, so draws are reproducible in any language.
"""

import io
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd

from errors import (
    BadInterval,
    EmptySignal,
    InvalidSignal,
    NyquistViolation,
    Overflow,
    ZeroSignal,
)

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_RATE_HZ = 15360.0
DEFAULT_FUNDAMENTAL_HZ = 60.0

# Reference storage cost of one sample: the 16-bit digitizer word
SAMPLE_WORD_BYTES = 2

INT16_MIN = -32768
INT16_MAX = 32767

LCG_MULTIPLIER = 6364136223846793005
LCG_INCREMENT = 1442695040888963407
_MASK64 = (1 << 64) - 1


def _frozen_array(values, dtype):
    array = np.array(values, dtype=dtype).reshape(-1)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Signal:
    """Sampled waveform in normalized volts"""
    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = _frozen_array(self.samples, np.float64)
        if samples.size < 1:
            raise EmptySignal("a signal needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise InvalidSignal("signal samples must be finite")
        if not self.sample_rate_hz > 0:
            raise InvalidSignal("sample_rate_hz must be positive")
        object.__setattr__(self, 'samples', samples)
        object.__setattr__(self, 'sample_rate_hz', float(self.sample_rate_hz))

    def __len__(self):
        return int(self.samples.size)

    @property
    def energy(self):
        return float(np.dot(self.samples, self.samples))


@dataclass(frozen=True, eq=False)
class QuantizedSignal:
    """Signal digitized to signed 16-bit counts of `scale` volts"""
    samples: np.ndarray
    scale: float
    sample_rate_hz: float

    def __post_init__(self):
        raw = np.asarray(self.samples).reshape(-1)
        if raw.size < 1:
            raise EmptySignal("a signal needs at least one sample")
        if raw.dtype.kind not in 'iuf':
            raise InvalidSignal("quantized samples must be numbers")
        if raw.dtype.kind == 'f' and not np.array_equal(raw, np.round(raw)):
            raise InvalidSignal("quantized samples must be whole counts")
        if raw.size and (raw.min() < INT16_MIN or raw.max() > INT16_MAX):
            raise Overflow("quantized samples must fit in 16 bits")
        if not self.scale > 0:
            raise InvalidSignal("scale must be positive")
        if not self.sample_rate_hz > 0:
            raise InvalidSignal("sample_rate_hz must be positive")
        object.__setattr__(self, 'samples', _frozen_array(raw, np.int16))
        object.__setattr__(self, 'scale', float(self.scale))
        object.__setattr__(self, 'sample_rate_hz', float(self.sample_rate_hz))

    def __len__(self):
        return int(self.samples.size)

    def to_bytes(self):
        """Samples as little-endian int16, the bytes lossless coders see"""
        return self.samples.astype('<i2').tobytes()


@dataclass(frozen=True)
class SineSpec:
    """Amplitude, frequency and phase of a sinusoid at a given sample rate"""
    amplitude: float = 1.0
    freq_hz: float = DEFAULT_FUNDAMENTAL_HZ
    phase_rad: float = 0.0
    sample_rate_hz: float = DEFAULT_SAMPLE_RATE_HZ


def _check_frequency(freq_hz, sample_rate_hz, what="freq_hz"):
    if not 0 < freq_hz < sample_rate_hz / 2:
        raise NyquistViolation(
            f"{what}={freq_hz} Hz must lie in (0, {sample_rate_hz / 2}) Hz"
        )


def _check_count(n):
    if n < 1:
        raise EmptySignal("n must be at least 1")


def _sine_samples(spec, n):
    k = np.arange(n, dtype=np.float64)
    return spec.amplitude * np.sin(
        2.0 * np.pi * spec.freq_hz * k / spec.sample_rate_hz + spec.phase_rad
    )


def gen_sine(amplitude, freq_hz, phase_rad=0.0,
             sample_rate_hz=DEFAULT_SAMPLE_RATE_HZ, n=256):
    if amplitude < 0:
        raise InvalidSignal("amplitude must be non-negative")
    _check_count(n)
    _check_frequency(freq_hz, sample_rate_hz)
    spec = SineSpec(amplitude, freq_hz, phase_rad, sample_rate_hz)
    return Signal(_sine_samples(spec, n), sample_rate_hz)


def gen_voltage_dip(base, dip_start, dip_end, dip_factor, n):
    """Sine whose amplitude is scaled by dip_factor over [dip_start, dip_end)"""
    _check_count(n)
    if not 0 <= dip_start < dip_end <= n:
        raise BadInterval(
            f"dip interval [{dip_start}, {dip_end}) is not inside [0, {n})"
        )
    if not 0 < dip_factor <= 1:
        raise InvalidSignal("dip_factor must lie in (0, 1]")
    pure = gen_sine(base.amplitude, base.freq_hz, base.phase_rad,
                    base.sample_rate_hz, n).samples
    envelope = np.ones(n)
    envelope[dip_start:dip_end] = dip_factor
    return Signal(pure * envelope, base.sample_rate_hz)


def gen_transients(base, transient_period, transient_amp, transient_decay,
                   transient_freq_hz, n, first_onset=0):
    """Fundamental plus a damped oscillation launched every transient_period samples"""
    _check_count(n)
    if transient_period < 1:
        raise InvalidSignal("transient_period must be at least 1 sample")
    if not 0 < transient_decay < 1:
        raise InvalidSignal("transient_decay must lie in (0, 1)")
    _check_frequency(transient_freq_hz, base.sample_rate_hz, "transient_freq_hz")

    samples = gen_sine(base.amplitude, base.freq_hz, base.phase_rad,
                       base.sample_rate_hz, n).samples.copy()
    if transient_amp != 0:
        for onset in range(first_onset, n, transient_period):
            k = np.arange(n - onset, dtype=np.float64)
            samples[onset:] += (
                transient_amp * transient_decay ** k
                * np.sin(2.0 * np.pi * transient_freq_hz * k / base.sample_rate_hz)
            )
    return Signal(samples, base.sample_rate_hz)


def transient_onsets(transient_period, n, first_onset=0):
    return list(range(first_onset, n, transient_period))


class Lcg64:
    """64-bit linear congruential generator with Box-Muller normals"""

    def __init__(self, seed):
        self.state = int(seed) & _MASK64

    def next_u64(self):
        self.state = (LCG_MULTIPLIER * self.state + LCG_INCREMENT) & _MASK64
        return self.state

    def uniform_open(self):
        """Uniform on (0, 1]"""
        return ((self.next_u64() >> 11) + 1) / float(1 << 53)

    def uniform(self):
        """Uniform on [0, 1)"""
        return (self.next_u64() >> 11) / float(1 << 53)

    def normals(self, n):
        out = np.empty(n)
        for i in range(0, n, 2):
            radius = math.sqrt(-2.0 * math.log(self.uniform_open()))
            angle = 2.0 * math.pi * self.uniform()
            out[i] = radius * math.cos(angle)
            if i + 1 < n:
                out[i + 1] = radius * math.sin(angle)
        return out


def add_noise(s, target_snr_db, seed):
    """Add Gaussian noise rescaled after drawing so the realized SNR is exact"""
    if not math.isfinite(target_snr_db):
        raise InvalidSignal("target_snr_db must be finite")
    signal_energy = s.energy
    if signal_energy == 0:
        raise ZeroSignal("cannot calibrate noise against a zero-energy signal")

    noise = Lcg64(seed).normals(len(s))
    noise_energy = float(np.dot(noise, noise))
    wanted_energy = signal_energy / 10.0 ** (target_snr_db / 10.0)
    noise *= math.sqrt(wanted_energy / noise_energy)
    logger.debug("noise at %.3f dB, energy %.6g", target_snr_db, wanted_energy)
    return Signal(s.samples + noise, s.sample_rate_hz)


def quantize(s, scale):
    """Round half away from zero to int16 counts of `scale` volts"""
    if not scale > 0:
        raise InvalidSignal("scale must be positive")
    scaled = s.samples / scale
    rounded = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    if rounded.min() < INT16_MIN or rounded.max() > INT16_MAX:
        worst = float(np.max(np.abs(rounded)))
        raise Overflow(f"{worst:.0f} counts does not fit in 16 bits at scale {scale}")
    return QuantizedSignal(rounded.astype(np.int16), scale, s.sample_rate_hz)


def dequantize(q):
    return Signal(q.samples.astype(np.float64) * q.scale, q.sample_rate_hz)


def reference_bytes(n_samples):
    return SAMPLE_WORD_BYTES * int(n_samples)


# CSV format: "# sample_rate_hz=<v>" [, "# scale=<v>"] then one sample per line

def to_csv(s: Union[Signal, QuantizedSignal]):
    header = [f"# sample_rate_hz={s.sample_rate_hz!r}"]
    if isinstance(s, QuantizedSignal):
        header.append(f"# scale={s.scale!r}")
    body = pd.Series(s.samples).to_csv(index=False, header=False, lineterminator='\n')
    return '\n'.join(header) + '\n' + body


def from_csv(text):
    meta = {}
    for line in text.splitlines():
        if not line.startswith('#'):
            break
        key, _, value = line[1:].strip().partition('=')
        meta[key.strip()] = value.strip()

    if 'sample_rate_hz' not in meta:
        raise InvalidSignal("signal CSV is missing the '# sample_rate_hz=' header")
    try:
        sample_rate_hz = float(meta['sample_rate_hz'])
        frame = pd.read_csv(io.StringIO(text), comment='#', header=None,
                            float_precision='round_trip')
    except (ValueError, pd.errors.EmptyDataError) as e:
        raise InvalidSignal(f"unreadable signal CSV: {e}") from None

    values = frame.iloc[:, 0].to_numpy()
    if values.dtype.kind not in 'iuf':
        raise InvalidSignal("signal CSV holds values that are not numbers")
    if 'scale' in meta:
        return QuantizedSignal(values, float(meta['scale']), sample_rate_hz)
    return Signal(values.astype(np.float64), sample_rate_hz)
