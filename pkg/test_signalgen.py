#!/usr/bin/env python3
"""
Tests for the test-waveform generators, noise and quantization
"""

import math
import sys

import numpy as np
import pytest

from errors import (
    BadInterval,
    EmptySignal,
    InvalidSignal,
    NyquistViolation,
    Overflow,
    ZeroSignal,
)
from signalgen import (
    Lcg64,
    QuantizedSignal,
    Signal,
    SineSpec,
    add_noise,
    dequantize,
    from_csv,
    gen_sine,
    gen_transients,
    gen_voltage_dip,
    quantize,
    reference_bytes,
    to_csv,
    transient_onsets,
)


def _snr_db(clean, noisy):
    noise = noisy.samples - clean.samples
    return 10.0 * math.log10(np.dot(clean.samples, clean.samples) / np.dot(noise, noise))


def test_sine_landmarks():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 256)
    assert s.samples[0] == 0.0
    assert s.samples[64] == pytest.approx(1.0, abs=1e-15)
    assert len(s) == 256 and s.sample_rate_hz == 15360.0


def test_zero_amplitude():
    assert not gen_sine(0.0, 60.0, 1.3, 15360.0, 16).samples.any()


def test_sine_is_periodic():
    s = gen_sine(0.8, 60.0, 0.4, 15360.0, 1024).samples
    assert np.max(np.abs(s[256:] - s[:-256])) <= 1e-12


def test_sine_errors():
    with pytest.raises(NyquistViolation):
        gen_sine(1.0, 7680.0, 0.0, 15360.0, 16)
    with pytest.raises(NyquistViolation):
        gen_sine(1.0, 0.0, 0.0, 15360.0, 16)
    with pytest.raises(EmptySignal):
        gen_sine(1.0, 60.0, 0.0, 15360.0, 0)
    with pytest.raises(InvalidSignal):
        gen_sine(-1.0, 60.0, 0.0, 15360.0, 16)


def test_signal_invariants():
    with pytest.raises(EmptySignal):
        Signal([], 100.0)
    with pytest.raises(InvalidSignal):
        Signal([0.0, float('nan')], 100.0)
    with pytest.raises(InvalidSignal):
        Signal([0.0], 0.0)
    with pytest.raises(Overflow):
        QuantizedSignal([40000], 1e-3, 100.0)


def test_signal_is_read_only():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 16)
    with pytest.raises(ValueError):
        s.samples[0] = 1.0


def test_dip_identity_factor():
    base = SineSpec()
    dip = gen_voltage_dip(base, 100, 400, 1.0, 1024)
    assert np.array_equal(dip.samples, gen_sine(1.0, 60.0, 0.0, 15360.0, 1024).samples)


def test_dip_over_whole_record_halves():
    pure = gen_sine(1.0, 60.0, 0.0, 15360.0, 512).samples
    dip = gen_voltage_dip(SineSpec(), 0, 512, 0.5, 512).samples
    assert np.array_equal(dip, 0.5 * pure)


def test_dip_only_inside_interval():
    pure = gen_sine(1.0, 60.0, 0.0, 15360.0, 2048).samples
    dip = gen_voltage_dip(SineSpec(), 512, 1280, 0.3, 2048).samples
    assert np.array_equal(dip[:512], pure[:512])
    assert np.array_equal(dip[1280:], pure[1280:])
    assert np.allclose(dip[512:1280], 0.3 * pure[512:1280])


@pytest.mark.parametrize('start,end', [(5, 5), (10, 4), (-1, 10), (0, 2000)])
def test_dip_bad_interval(start, end):
    with pytest.raises(BadInterval):
        gen_voltage_dip(SineSpec(), start, end, 0.5, 1024)


def test_transients_zero_amplitude_is_pure_sine():
    s = gen_transients(SineSpec(), 300, 0.0, 0.9, 1500.0, 1024)
    assert np.array_equal(s.samples, gen_sine(1.0, 60.0, 0.0, 15360.0, 1024).samples)


def test_single_transient_closed_form():
    s = gen_transients(SineSpec(amplitude=0.0), 10_000, 0.5, 0.97, 1500.0, 400)
    k = np.arange(400)
    expected = 0.5 * 0.97 ** k * np.sin(2 * np.pi * 1500.0 * k / 15360.0)
    assert np.allclose(s.samples, expected, atol=1e-15)


def test_transient_errors():
    with pytest.raises(NyquistViolation):
        gen_transients(SineSpec(), 100, 0.3, 0.9, 9000.0, 256)
    with pytest.raises(InvalidSignal):
        gen_transients(SineSpec(), 100, 0.3, 1.0, 1500.0, 256)
    with pytest.raises(InvalidSignal):
        gen_transients(SineSpec(), 0, 0.3, 0.9, 1500.0, 256)


def test_transient_onsets():
    assert transient_onsets(1024, 4096, 100) == [100, 1124, 2148, 3172]


def test_noise_snr_is_exact():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 4096)
    noisy = add_noise(s, 34.2, seed=11)
    assert _snr_db(s, noisy) == pytest.approx(34.2, abs=1e-9)


def test_noise_is_deterministic():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 1000)
    a = add_noise(s, 20.0, seed=3).samples
    b = add_noise(s, 20.0, seed=3).samples
    c = add_noise(s, 20.0, seed=4).samples
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_noise_at_300_db_is_negligible():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 1000)
    noisy = add_noise(s, 300.0, seed=0)
    diff = noisy.samples - s.samples
    assert np.dot(diff, diff) <= 1e-12 * s.energy


def test_noise_errors():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 100)
    with pytest.raises(InvalidSignal):
        add_noise(s, math.inf, seed=0)
    with pytest.raises(ZeroSignal):
        add_noise(Signal(np.zeros(10), 100.0), 30.0, seed=0)


def test_lcg_sequence():
    rng = Lcg64(0)
    assert rng.next_u64() == 1442695040888963407
    assert rng.next_u64() == (6364136223846793005 * 1442695040888963407
                              + 1442695040888963407) % 2 ** 64


def test_lcg_normals_are_standard():
    draws = Lcg64(42).normals(20_000)
    assert abs(draws.mean()) < 0.05
    assert abs(draws.std() - 1.0) < 0.05


def test_quantize_examples():
    assert not quantize(Signal(np.zeros(4), 100.0), 0.5).samples.any()
    assert quantize(Signal([1.0], 100.0), 1 / 1000).samples[0] == 1000


def test_quantize_rounds_half_away_from_zero():
    q = quantize(Signal([0.5, -0.5, 1.5, -2.5, 0.49], 100.0), 1.0)
    assert q.samples.tolist() == [1, -1, 2, -3, 0]


def test_quantize_error_bound():
    s = gen_sine(1.0, 60.0, 0.0, 15360.0, 4096)
    scale = 1 / 30000
    err = np.abs(dequantize(quantize(s, scale)).samples - s.samples)
    assert err.max() <= 1.6667e-5


def test_quantize_overflow():
    with pytest.raises(Overflow):
        quantize(Signal([1.0], 100.0), 1e-5)
    with pytest.raises(InvalidSignal):
        quantize(Signal([1.0], 100.0), 0.0)


def test_quantized_bytes_are_little_endian():
    q = QuantizedSignal([1, -2], 1.0, 100.0)
    assert q.to_bytes() == b"\x01\x00\xfe\xff"
    assert reference_bytes(len(q)) == 4


def test_csv_round_trip_real():
    s = add_noise(gen_sine(1.0, 60.0, 0.3, 15360.0, 300), 30.0, seed=1)
    text = to_csv(s)
    assert text.startswith("# sample_rate_hz=15360.0\n")
    back = from_csv(text)
    assert isinstance(back, Signal)
    assert np.array_equal(back.samples, s.samples)


def test_csv_round_trip_quantized():
    q = quantize(gen_sine(1.0, 60.0, 0.0, 15360.0, 300), 1e-3)
    back = from_csv(to_csv(q))
    assert isinstance(back, QuantizedSignal)
    assert back.scale == 1e-3
    assert np.array_equal(back.samples, q.samples)


def test_csv_requires_sample_rate():
    with pytest.raises(InvalidSignal):
        from_csv("1.0\n2.0\n")


def test_quantized_csv_rejects_fractional_counts():
    with pytest.raises(InvalidSignal):
        from_csv("# sample_rate_hz=100.0\n# scale=0.001\n1\n1.5\n-2\n")
    back = from_csv("# sample_rate_hz=100.0\n# scale=0.001\n1.0\n-2\n")
    assert back.samples.tolist() == [1, -2]


def test_csv_rejects_text_values():
    with pytest.raises(InvalidSignal):
        from_csv("# sample_rate_hz=100.0\n1.0\nabc\n")


def test_quantized_signal_needs_whole_counts():
    with pytest.raises(InvalidSignal):
        QuantizedSignal([0.25, 1.0], 1e-3, 100.0)
    with pytest.raises(InvalidSignal):
        QuantizedSignal([0.0, float("nan")], 1e-3, 100.0)
    assert QuantizedSignal(np.array([3.0, -4.0]), 1e-3, 100.0).samples.tolist() == [3, -4]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
