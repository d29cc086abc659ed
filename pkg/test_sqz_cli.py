#!/usr/bin/env python3
"""
End-to-end tests for the sqz command line
"""

import io
import json
import sys

import numpy as np
import pandas as pd
import pytest

from memsim import format_trace
from scenarios import sequential_trace
from signalgen import from_csv, gen_sine
from sqz_cli import EXIT_INTEGRITY, EXIT_NO_FIT, EXIT_OK, EXIT_PROCESSING, EXIT_USAGE, main


@pytest.fixture(autouse=True)
def clean_env(monkeypatch, tmp_path):
    for name in ('SQZ_SAMPLE_RATE_HZ', 'SQZ_SEED', 'SQZ_QUANT_SCALE', 'SQZ_LOG_LEVEL',
                 'SQZ_STUB_TABLE', 'SQZ_DEVICE_CATALOG', 'SQZ_WAVELET_LEVELS',
                 'SQZ_QUANTIZER_BITS', 'SQZ_FUNDAMENTAL_HZ'):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _gen(capsys, path, *argv):
    code, _, _ = _run(capsys, 'gen', *argv, '-o', path)
    assert code == EXIT_OK
    return path


# gen

def test_gen_sine_file(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 'sine.csv', 'sine', '--n', 1024, '--amplitude', 2.0)
    s = from_csv(path.read_text())
    expected = gen_sine(2.0, 60.0, 0.0, 15360.0, 1024)
    assert s.sample_rate_hz == 15360.0
    assert np.array_equal(s.samples, expected.samples)


def test_gen_to_stdout_quantized(capsys):
    code, out, err = _run(capsys, 'gen', 'sine', '--n', 256, '--scale', 0.001)
    assert code == EXIT_OK
    q = from_csv(out)
    assert q.scale == 0.001 and len(q) == 256
    assert err.startswith("✅")


def test_gen_nyquist_violation(capsys):
    code, out, err = _run(capsys, 'gen', 'sine', '--freq', 9000)
    assert code == EXIT_USAGE
    assert "UsageError: NyquistViolation" in err
    assert "--freq=9000.0 Hz" in err
    assert "freq_hz" not in err
    assert out == ''


def test_gen_transient_frequency_names_its_flag(capsys):
    code, _, err = _run(capsys, 'gen', 'transients', '--tfreq', 8000)
    assert code == EXIT_USAGE
    assert "--tfreq=8000.0 Hz" in err
    assert "transient_freq_hz" not in err


def test_gen_dip_requires_interval(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(['gen', 'dip'])
    assert excinfo.value.code == 2


def test_gen_noise_is_seeded(capsys, tmp_path):
    a = _gen(capsys, tmp_path / 'a.csv', 'sine', '--n', 512, '--snr', 30, '--seed', 4)
    b = _gen(capsys, tmp_path / 'b.csv', 'sine', '--n', 512, '--snr', 30, '--seed', 4)
    assert a.read_bytes() == b.read_bytes()


def test_gen_png(capsys, tmp_path):
    _gen(capsys, tmp_path / 's.csv', 'transients', '--n', 2048, '--png', tmp_path / 's.png')
    assert (tmp_path / 's.png').read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


# compress / decompress

@pytest.mark.parametrize('algo', ['rle', 'lzw', 'lzss', 'lzar'])
def test_byte_codec_round_trip(capsys, tmp_path, text_bytes, algo):
    source = tmp_path / 'notes.txt'
    source.write_bytes(text_bytes)
    code, out, _ = _run(capsys, 'compress', source, '--algo', algo, '--verify')
    assert code == EXIT_OK
    report = json.loads(out)
    assert report['algo'] == algo.upper()
    assert report['original_bytes'] == len(text_bytes)
    assert report['verified'] is True
    container = tmp_path / 'notes.txt.sqz'
    assert report['container_bytes'] == container.stat().st_size

    code, _, _ = _run(capsys, 'decompress', container, '-o', tmp_path / 'back.txt')
    assert code == EXIT_OK
    assert (tmp_path / 'back.txt').read_bytes() == text_bytes


def test_decompress_default_name(capsys, tmp_path):
    source = tmp_path / 'zeros.bin'
    source.write_bytes(bytes(1000))
    assert _run(capsys, 'compress', source, '--algo', 'rle', '-o', tmp_path / 'z.bin.sqz')[0] == 0
    assert _run(capsys, 'decompress', tmp_path / 'z.bin.sqz')[0] == EXIT_OK
    assert (tmp_path / 'z.bin').read_bytes() == bytes(1000)


def test_predictive_round_trip(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 'q.csv', 'sine', '--n', 2560, '--scale', 0.001)
    code, out, _ = _run(capsys, 'compress', path, '--algo', 'predictive', '--verify')
    assert code == EXIT_OK
    report = json.loads(out)
    assert report['original_bytes'] == 2 * 2560
    assert report['ratio'] >= 10

    assert _run(capsys, 'decompress', tmp_path / 'q.csv.sqz', '-o', tmp_path / 'back.csv')[0] == 0
    assert np.array_equal(from_csv((tmp_path / 'back.csv').read_text()).samples,
                          from_csv(path.read_text()).samples)


def test_wavelet_meets_ratio(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 's.csv', 'sine', '--n', 4096)
    code, out, _ = _run(capsys, 'compress', path, '--algo', 'wavelet', '--ratio', 3)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report['ratio'] >= 3
    assert report['distortion']['nmse'] <= 1e-4
    assert report['header_nmse'] == pytest.approx(report['distortion']['nmse'], rel=1e-6, abs=1e-15)

    assert _run(capsys, 'decompress', tmp_path / 's.csv.sqz', '-o', tmp_path / 'r.csv')[0] == 0
    assert len(from_csv((tmp_path / 'r.csv').read_text())) == 4096


def test_hybrid_on_transients(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 't.csv', 'transients', '--n', 4096, '--onset', 100)
    code, out, _ = _run(capsys, 'compress', path, '--algo', 'hybrid', '--ratio', 8)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report['algo'] == 'HYBRID'
    assert report['ratio'] >= 8
    assert report['distortion']['snr_db'] >= 20


def test_lossy_needs_ratio(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 's.csv', 'sine', '--n', 4096)
    assert _run(capsys, 'compress', path, '--algo', 'wavelet')[0] == EXIT_USAGE
    assert _run(capsys, 'compress', path, '--algo', 'wavelet', '--ratio', 1)[0] == EXIT_USAGE


def test_unreachable_ratio_is_processing_error(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 's.csv', 'sine', '--n', 4096)
    code, _, err = _run(capsys, 'compress', path, '--algo', 'wavelet', '--ratio', 1000)
    assert code == EXIT_PROCESSING
    assert "RatioUnreachable" in err


def test_missing_input(capsys, tmp_path):
    code, _, err = _run(capsys, 'compress', tmp_path / 'nope.bin', '--algo', 'rle')
    assert code == EXIT_USAGE
    assert err.startswith("❌ UsageError")


def test_corrupted_container_is_integrity_failure(capsys, tmp_path):
    source = tmp_path / 'runs.bin'
    source.write_bytes(bytes(300) + b"\x07" * 300)
    _run(capsys, 'compress', source, '--algo', 'rle')
    container = tmp_path / 'runs.bin.sqz'
    blob = bytearray(container.read_bytes())
    blob[-1] ^= 0x01
    container.write_bytes(bytes(blob))
    code, _, err = _run(capsys, 'decompress', container, '-o', tmp_path / 'out.bin')
    assert code == EXIT_INTEGRITY
    assert "ChecksumMismatch" in err
    assert not (tmp_path / 'out.bin').exists()


def test_bad_magic_is_processing_error(capsys, tmp_path):
    junk = tmp_path / 'junk.sqz'
    junk.write_bytes(b"NOPE" + bytes(40))
    assert _run(capsys, 'decompress', junk)[0] == EXIT_PROCESSING


def test_compress_is_deterministic(capsys, tmp_path, text_bytes):
    source = tmp_path / 'notes.txt'
    source.write_bytes(text_bytes)
    _run(capsys, 'compress', source, '--algo', 'lzar', '-o', tmp_path / 'a.sqz')
    _run(capsys, 'compress', source, '--algo', 'lzar', '-o', tmp_path / 'b.sqz')
    assert (tmp_path / 'a.sqz').read_bytes() == (tmp_path / 'b.sqz').read_bytes()


# metrics / plotdata

def test_metrics_with_container(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 's.csv', 'sine', '--n', 4096)
    _run(capsys, 'compress', path, '--algo', 'wavelet', '--ratio', 4)
    _run(capsys, 'decompress', tmp_path / 's.csv.sqz', '-o', tmp_path / 'r.csv')
    code, out, _ = _run(capsys, 'metrics', path, tmp_path / 'r.csv',
                        '--container', tmp_path / 's.csv.sqz')
    assert code == EXIT_OK
    record = json.loads(out)
    assert record['ratio'] >= 4
    assert record['prd_pct'] == pytest.approx(100 * record['nmse'] ** 0.5)


def test_metrics_length_mismatch(capsys, tmp_path):
    a = _gen(capsys, tmp_path / 'a.csv', 'sine', '--n', 100)
    b = _gen(capsys, tmp_path / 'b.csv', 'sine', '--n', 101)
    assert _run(capsys, 'metrics', a, b)[0] == EXIT_PROCESSING


@pytest.mark.parametrize('algo,extra', [
    ('predictive', ['--period', 256]),
    ('wavelet', ['--ratio', 4]),
    ('hybrid', ['--ratio', 8]),
])
def test_plotdata_columns(capsys, tmp_path, algo, extra):
    path = _gen(capsys, tmp_path / 's.csv', 'sine', '--n', 4096, '--scale', 0.001)
    code, out, _ = _run(capsys, 'plotdata', path, '--algo', algo, *extra)
    assert code == EXIT_OK
    frame = pd.read_csv(io.StringIO(out))
    assert list(frame.columns) == ['original', 'coding_output', 'decoding_output', 'error']
    assert len(frame) == 4096
    assert np.allclose(frame['error'], frame['decoding_output'] - frame['original'])
    if algo == 'predictive':
        assert not frame['error'].any()


def test_plotdata_png(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 's.csv', 'sine', '--n', 4096)
    code, _, _ = _run(capsys, 'plotdata', path, '--algo', 'wavelet', '--ratio', 4,
                      '-o', tmp_path / 'p.csv', '--png', tmp_path / 'p.png')
    assert code == EXIT_OK
    assert (tmp_path / 'p.png').read_bytes()[:4] == b"\x89PNG"


# romfit

@pytest.fixture
def rom_dir(capsys, tmp_path):
    directory = tmp_path / 'rom'
    assert _run(capsys, 'gen', 'rom-scenario', directory)[0] == EXIT_OK
    return directory


def test_romfit_fits_smaller_device(capsys, rom_dir):
    code, out, err = _run(capsys, 'romfit', rom_dir / 'firmware.hex',
                          '--manifest', rom_dir / 'manifest.json',
                          '--catalog', rom_dir / 'catalog.json')
    assert code == EXIT_OK
    report = json.loads(out)
    assert report['chosen_device'] == 'TC1734'
    assert report['baseline_device'] == 'TC1738'
    assert report['stub_overheads'] == {'RLE': 100}
    assert "TC1734" in err


def test_romfit_no_device(capsys, rom_dir, tmp_path):
    tiny = tmp_path / 'tiny.json'
    tiny.write_text(json.dumps({'version': 1, 'devices': [{'name': 'tiny', 'flash_bytes': 4096}]}))
    code, out, _ = _run(capsys, 'romfit', rom_dir / 'firmware.hex',
                        '--manifest', rom_dir / 'manifest.json', '--catalog', tiny,
                        '--format', 'table')
    assert code == EXIT_NO_FIT
    assert 'none' in out


def test_romfit_usage_errors(capsys, rom_dir):
    hex_path = rom_dir / 'firmware.hex'
    assert _run(capsys, 'romfit', hex_path, '--manifest', rom_dir / 'missing.json')[0] == EXIT_USAGE
    assert _run(capsys, 'romfit', hex_path, '--manifest', rom_dir / 'manifest.json',
                '--policy', 'initvars')[0] == EXIT_USAGE


def test_romfit_bad_policy_algo(capsys, rom_dir):
    code, _, err = _run(capsys, 'romfit', rom_dir / 'firmware.hex',
                        '--manifest', rom_dir / 'manifest.json', '--policy', 'initvars=zip')
    assert code == EXIT_PROCESSING
    assert "PolicyUnknownAlgo" in err


def test_romfit_binary_image(capsys, tmp_path):
    image = tmp_path / 'fw.bin'
    image.write_bytes(bytes(8192))
    manifest = tmp_path / 'm.json'
    manifest.write_text(json.dumps({'version': 1, 'sections': [
        {'name': 'bss', 'kind': 'zerovars', 'start': '0x1000', 'end': '0x3000'}]}))
    code, out, _ = _run(capsys, 'romfit', image, '--manifest', manifest,
                        '--binary', '--base', '0x1000')
    assert code == EXIT_OK
    assert json.loads(out)['sections'][0]['algo'] == 'RLE'


# memsim / bench

@pytest.fixture
def zero_image(tmp_path):
    image = tmp_path / 'mem.bin'
    image.write_bytes(bytes(4096))
    trace = tmp_path / 'trace.csv'
    trace.write_text(format_trace(sequential_trace(4096)))
    return image, trace


def test_memsim_reduction(capsys, zero_image):
    image, trace = zero_image
    code, out, _ = _run(capsys, 'memsim', image, '--trace', trace)
    assert code == EXIT_OK
    assert json.loads(out)['reduction_pct'] == 62.5


def test_memsim_sweep(capsys, zero_image):
    image, trace = zero_image
    code, out, _ = _run(capsys, 'memsim', image, '--trace', trace, '--sweep')
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc['delta_bytes'] == 512
    assert doc['S8']['reduction_pct'] == 75.0


def test_memsim_bad_config(capsys, zero_image):
    image, trace = zero_image
    assert _run(capsys, 'memsim', image, '--trace', trace, '--slot', 16)[0] == EXIT_USAGE
    assert _run(capsys, 'memsim', image, '--trace', trace, '--line', 24)[0] == EXIT_USAGE


def test_memsim_out_of_range(capsys, zero_image, tmp_path):
    image, _ = zero_image
    trace = tmp_path / 'far.csv'
    trace.write_text("R,2000\n")
    code, _, err = _run(capsys, 'memsim', image, '--trace', trace)
    assert code == EXIT_PROCESSING
    assert "AddressOutOfRange" in err


def test_bench_csv(capsys, tmp_path, text_bytes):
    source = tmp_path / 'notes.txt'
    source.write_bytes(text_bytes)
    code, out, _ = _run(capsys, 'bench', source, '--format', 'csv')
    assert code == EXIT_OK
    frame = pd.read_csv(io.StringIO(out))
    assert list(frame['algo']) == ['RLE', 'LZW', 'LZSS', 'LZAR']
    assert (frame['original_bytes'] == len(text_bytes)).all()


def test_bench_samples_adds_predictive(capsys, tmp_path):
    path = _gen(capsys, tmp_path / 'q.csv', 'sine', '--n', 2560, '--scale', 0.001)
    code, out, _ = _run(capsys, 'bench', path, '--samples')
    assert code == EXIT_OK
    rows = json.loads(out)
    assert rows[-1]['algo'] == 'PREDICTIVE'
    assert rows[-1]['ratio'] > max(r['ratio'] for r in rows[:-1])


def test_bad_env_is_usage_error(capsys, monkeypatch):
    monkeypatch.setenv('SQZ_QUANTIZER_BITS', 'twelve')
    code, _, err = _run(capsys, 'gen', 'sine', '--n', 16)
    assert code == EXIT_USAGE
    assert "ConfigError" in err


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
