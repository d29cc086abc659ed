#!/usr/bin/env python3
"""
sqz command line: generate signals, compress and decompress, measure
distortion, export plot data, fit firmware into FLASH and simulate
compressed main memory.

Exit codes: 0 success, 2 usage or configuration, 3 processing error,
4 integrity failure, 5 firmware does not fit any device.
"""

import argparse
import json
import logging
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd

import hybrid
import lossless_codecs
import memsim
import periodic
import romtool
import scenarios
import wavelet
from container import Algo, unwrap
from errors import ConfigError, IntegrityError, SignalError, SqzError
from load_env_helper import get_settings
from metrics import compression_ratio, distortion
from signalgen import (
    QuantizedSignal,
    SineSpec,
    add_noise,
    dequantize,
    from_csv,
    gen_sine,
    gen_transients,
    gen_voltage_dip,
    quantize,
    to_csv,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PROCESSING = 3
EXIT_INTEGRITY = 4
EXIT_NO_FIT = 5

ALGO_NAMES = [a.name.lower() for a in Algo]
SIGNAL_ALGOS = ('predictive', 'wavelet', 'hybrid')


class UsageError(Exception):
    """Bad flags or inputs detected before any work starts"""


def status(message):
    print(message, file=sys.stderr)


def write_atomic(path, data):
    """Write via a temporary file in the target directory, then rename"""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode('utf-8')
    directory = path.parent if str(path.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=f".{path.name}.", suffix='.tmp')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(args, text):
    """Machine output to -o or stdout"""
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def render(args, record):
    """Serialize a dict (or list of dicts) in the requested --format"""
    if args.format == 'json':
        return json.dumps(record, indent=2, sort_keys=True) + '\n'
    rows = record if isinstance(record, list) else [pd.json_normalize(record).iloc[0].to_dict()]
    frame = pd.DataFrame(rows)
    if args.format == 'csv':
        return frame.to_csv(index=False, lineterminator='\n')
    return frame.to_string(index=False) + '\n'


def require_file(path, flag):
    if not Path(path).is_file():
        raise UsageError(f"{flag}: no such file {path}")
    return Path(path)


def read_signal(path):
    return from_csv(require_file(path, 'input').read_text())


def as_quantized(s, scale):
    return s if isinstance(s, QuantizedSignal) else quantize(s, scale)


def as_real(s):
    return dequantize(s) if isinstance(s, QuantizedSignal) else s


def _json_float(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


# gen

# generator parameter names as the gen flags that set them
GEN_FLAGS = {
    'transient_freq_hz': '--tfreq',
    'freq_hz': '--freq',
    'sample_rate_hz': '--fs',
}
_GEN_PARAM = re.compile(r'\b(' + '|'.join(GEN_FLAGS) + r')\b')


def _flag_message(message):
    return _GEN_PARAM.sub(lambda m: GEN_FLAGS[m.group(1)], message)


def _sine_base(args):
    return SineSpec(args.amplitude, args.freq, args.phase, args.fs)


def _build_signal(args):
    if args.kind == 'sine':
        s = gen_sine(args.amplitude, args.freq, args.phase, args.fs, args.n)
    elif args.kind == 'dip':
        s = gen_voltage_dip(_sine_base(args), args.start, args.end, args.factor, args.n)
    else:
        s = gen_transients(_sine_base(args), args.period, args.amp, args.decay,
                           args.tfreq, args.n, args.onset)
    if args.snr is not None:
        s = add_noise(s, args.snr, args.seed)
    if args.scale is not None:
        s = quantize(s, args.scale)
    return s


def cmd_gen(args, settings):
    if args.kind == 'rom-scenario':
        return _gen_rom_scenario(args)
    try:
        s = _build_signal(args)
    except SignalError as e:
        raise UsageError(f"{type(e).__name__}: {_flag_message(str(e))}") from None
    emit(args, to_csv(s))
    if args.png:
        from plotting import plot_signal
        plot_signal(s.samples, s.sample_rate_hz, args.png, title=f"{args.kind} signal")
    status(f"✅ Generated {args.kind} signal, {len(s)} samples")
    return EXIT_OK


def _gen_rom_scenario(args):
    directory = Path(args.directory)
    scenario = scenarios.rom_scenario(args.seed)
    write_atomic(directory / 'firmware.hex', romtool.format_ihex(scenario.image))
    write_atomic(directory / 'manifest.json', romtool.manifest_to_json(scenario.manifest) + '\n')
    write_atomic(directory / 'catalog.json', romtool.catalog_to_json(scenario.catalog) + '\n')
    status(f"✅ Wrote firmware.hex, manifest.json and catalog.json to {directory}")
    return EXIT_OK


# compress / decompress

def _encode(args, settings, path):
    """Returns (codestream, source bytes or signal)"""
    algo = Algo.parse(args.algo)
    if algo in lossless_codecs.LOSSLESS_ALGOS:
        if args.samples:
            q = as_quantized(read_signal(path), settings.quant_scale)
            data = q.to_bytes()
        else:
            data = path.read_bytes()
        return lossless_codecs.encode(algo, data), data

    s = read_signal(path)
    if algo is Algo.PREDICTIVE:
        q = as_quantized(s, settings.quant_scale)
        return periodic.predictive_encode(q, period=args.period, templates=args.templates), q

    plan = wavelet.LossyPlan(args.ratio, args.bits or settings.quantizer_bits,
                             args.levels or settings.wavelet_levels)
    real = as_real(s)
    if algo is Algo.WAVELET:
        return wavelet.wavelet_compress(real, plan), real
    band = tuple(args.band) if args.band else hybrid.default_band(settings.fundamental_hz)
    return hybrid.hybrid_encode(real, plan, band, segment=args.segment), real


def decode_stream(c):
    if c.algo in lossless_codecs.LOSSLESS_ALGOS:
        return lossless_codecs.decode(c)
    if c.algo is Algo.PREDICTIVE:
        return periodic.predictive_decode(c)
    if c.algo is Algo.WAVELET:
        return wavelet.wavelet_decompress(c)
    return hybrid.hybrid_decode(c)


def cmd_compress(args, settings):
    path = require_file(args.input, 'input')
    if args.ratio is not None and not args.ratio > 1:
        raise UsageError("--ratio must be greater than 1")
    algo = Algo.parse(args.algo)
    if algo.lossy and args.ratio is None:
        raise UsageError(f"--ratio is required for {args.algo}")

    c, source = _encode(args, settings, path)
    blob = c.to_bytes()
    ratio = compression_ratio(c.original_len, len(blob))
    report = {
        'algo': c.algo.name,
        'input': str(path),
        'original_bytes': c.original_len,
        'container_bytes': len(blob),
        'ratio': ratio.ratio,
        'ratio_label': ratio.label,
    }

    decoded = None
    if args.verify or algo.lossy:
        decoded = decode_stream(unwrap(blob))
    if args.verify and not algo.lossy:
        same = (decoded == source) if isinstance(source, bytes) else \
            np.array_equal(decoded.samples, source.samples)
        if not same:
            raise IntegrityError("verification decode does not match the input")
        report['verified'] = True
    if algo.lossy:
        report['distortion'] = distortion(source, decoded).to_dict()
        header = wavelet.read_header(c.payload) if algo is Algo.WAVELET else None
        if header is not None:
            report['header_nmse'] = header.nmse

    output = args.output or str(path) + '.sqz'
    write_atomic(output, blob)
    sys.stdout.write(render(args, {k: _json_float(v) for k, v in report.items()}))
    status(f"✅ {c.algo.name}: {c.original_len} -> {len(blob)} bytes ({ratio.label}) in {output}")
    return EXIT_OK


def cmd_decompress(args, settings):
    path = require_file(args.input, 'input')
    c = unwrap(path.read_bytes())
    result = decode_stream(c)
    data = result if isinstance(result, bytes) else to_csv(result)
    output = args.output or (str(path)[:-4] if str(path).endswith('.sqz') else str(path) + '.out')
    write_atomic(output, data)
    status(f"✅ {c.algo.name} stream decoded to {output}")
    return EXIT_OK


# metrics / plotdata

def cmd_metrics(args, settings):
    original = as_real(read_signal(args.original))
    reconstructed = as_real(read_signal(args.reconstructed))
    record = distortion(original, reconstructed).to_dict()
    if args.container:
        blob = require_file(args.container, '--container').read_bytes()
        c = unwrap(blob)
        ratio = compression_ratio(c.original_len, len(blob))
        record.update(ratio=ratio.ratio, ratio_label=ratio.label)
    emit(args, render(args, record))
    return EXIT_OK


def plot_frame(args, settings, s):
    """Original, coding output, decoding output and error columns"""
    algo = Algo.parse(args.algo)
    if algo is Algo.PREDICTIVE:
        q = as_quantized(s, settings.quant_scale)
        analysis = periodic.predictive_analyze(q, period=args.period, templates=args.templates)
        decoded = periodic.predictive_decode(periodic.predictive_encode(
            q, period=analysis.model.period_p, templates=args.templates))
        original = q.samples.astype(np.int64)
        columns = {
            'original': original,
            'coding_output': analysis.residuals,
            'decoding_output': decoded.samples.astype(np.int64),
            'error': decoded.samples.astype(np.int64) - original,
        }
    else:
        real = as_real(s)
        plan = wavelet.LossyPlan(args.ratio, args.bits or settings.quantizer_bits,
                                 args.levels or settings.wavelet_levels)
        if algo is Algo.WAVELET:
            c = wavelet.wavelet_compress(real, plan)
            decoded = wavelet.wavelet_decompress(c)
            coding = wavelet.dwt(decoded, plan.levels).coefficients()
        else:
            band = tuple(args.band) if args.band else hybrid.default_band(settings.fundamental_hz)
            c = hybrid.hybrid_encode(real, plan, band, segment=args.segment)
            decoded = hybrid.hybrid_decode(c)
            params, *_ = hybrid.read_params(c.payload)
            coding = decoded.samples - params.waveform(len(decoded), decoded.sample_rate_hz)
        columns = {
            'original': real.samples,
            'coding_output': coding,
            'decoding_output': decoded.samples,
            'error': decoded.samples - real.samples,
        }
    return pd.DataFrame({name: pd.Series(values) for name, values in columns.items()})


def cmd_plotdata(args, settings):
    algo = Algo.parse(args.algo)
    if algo.lossy and args.ratio is None:
        raise UsageError(f"--ratio is required for {args.algo}")
    frame = plot_frame(args, settings, read_signal(args.input))
    emit(args, frame.to_csv(index=False, lineterminator='\n'))
    if args.png:
        from plotting import plot_coding
        plot_coding(frame, args.png, title=f"{algo.name.lower()} coding")
    status(f"✅ Plot data for {algo.name}, {len(frame)} rows")
    return EXIT_OK


# romfit / memsim / bench

def _parse_policy(items):
    policy = {}
    for item in items or []:
        kind, sep, algo = item.partition('=')
        if not sep:
            raise UsageError(f"--policy expects kind=algo, got {item!r}")
        policy[kind.strip()] = algo.strip()
    return policy


def cmd_romfit(args, settings):
    image_path = require_file(args.image, 'image')
    manifest_path = require_file(args.manifest, '--manifest')
    catalog_path = args.catalog or settings.catalog_path
    stubs_path = args.stubs or settings.stub_table_path
    catalog = romtool.load_catalog(require_file(catalog_path, '--catalog').read_text()) \
        if catalog_path else romtool.default_catalog()
    stubs = romtool.load_stub_table(require_file(stubs_path, '--stubs').read_text()) \
        if stubs_path else None
    policy = _parse_policy(args.policy)

    if args.binary:
        image = romtool.load_binary(image_path.read_bytes(), args.base)
    else:
        image = romtool.parse_ihex(image_path.read_text())
    manifest = romtool.load_manifest(manifest_path.read_text())

    report = romtool.fit_report(romtool.compress_image(image, manifest, policy), catalog, stubs)
    emit(args, report.to_table() if args.format == 'table' else report.to_json() + '\n')
    if report.fits:
        status(f"✅ {report.total_bytes} bytes fit {report.chosen_device} "
               f"(uncompressed needs {report.baseline_device or 'no device'})")
        return EXIT_OK
    status(f"❌ {report.total_bytes} bytes fit no device in the catalog")
    return EXIT_NO_FIT


def cmd_memsim(args, settings):
    image = require_file(args.image, 'image').read_bytes()
    trace = memsim.parse_trace(require_file(args.trace, '--trace').read_text())
    try:
        cfg = memsim.CacheConfig(args.line, args.sets, args.ways, args.slot,
                                 Algo.parse(args.codec))
    except ConfigError as e:
        raise UsageError(str(e)) from None

    if args.sweep:
        record = memsim.sweep_slots(image, trace, cfg, args.base).to_dict()
    else:
        record = memsim.run_trace(image, trace, cfg, args.base).to_dict()
    emit(args, render(args, record))
    status("✅ Simulation finished")
    return EXIT_OK


def cmd_bench(args, settings):
    path = require_file(args.input, 'input')
    if args.samples:
        q = as_quantized(read_signal(path), settings.quant_scale)
        data = q.to_bytes()
    else:
        data = path.read_bytes()
    rows = lossless_codecs.compare_codecs(data)
    if args.samples:
        c = periodic.predictive_encode(q)
        rows.append({'algo': Algo.PREDICTIVE.name, 'original_bytes': len(data),
                     'payload_bytes': len(c.payload),
                     'ratio': len(data) / len(c.payload)})
    emit(args, render(args, rows))
    return EXIT_OK


# parser

def _common(parser):
    parser.add_argument('--seed', type=int, default=None, help='random seed (default SQZ_SEED)')
    parser.add_argument('--format', choices=('json', 'table', 'csv'), default='json',
                        help='report format')
    parser.add_argument('-o', '--output', help='output file (default stdout)')
    parser.add_argument('-v', '--verbose', action='store_true', help='debug logging')


def _signal_options(parser):
    parser.add_argument('--ratio', type=float, help='target compression ratio (lossy algos)')
    parser.add_argument('--bits', type=int, help='quantizer bits (default SQZ_QUANTIZER_BITS)')
    parser.add_argument('--levels', type=int, help='wavelet levels (default SQZ_WAVELET_LEVELS)')
    parser.add_argument('--period', type=int, help='force the predictive period in samples')
    parser.add_argument('--templates', type=int, default=periodic.DEFAULT_TEMPLATES,
                        help='predictive template count K')
    parser.add_argument('--band', type=float, nargs=2, metavar=('LO', 'HI'),
                        help='fundamental search band in Hz')
    parser.add_argument('--segment', action='store_true',
                        help='fit the fundamental over its dominant segment only')


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    _common(common)

    parser = argparse.ArgumentParser(prog='sqz', description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen', help='generate a test signal or firmware scenario')
    kinds = gen.add_subparsers(dest='kind', required=True)
    for kind in ('sine', 'dip', 'transients'):
        p = kinds.add_parser(kind, parents=[common])
        p.add_argument('--amplitude', type=float, default=1.0)
        p.add_argument('--freq', type=float, default=60.0, help='fundamental in Hz')
        p.add_argument('--phase', type=float, default=0.0, help='phase in radians')
        p.add_argument('--fs', type=float, default=None, help='sample rate in Hz')
        p.add_argument('--n', type=int, default=4096, help='sample count')
        p.add_argument('--snr', type=float, help='add noise at this SNR in dB')
        p.add_argument('--scale', type=float, help='quantize at this many volts per count')
        p.add_argument('--png', help='also render the signal to this PNG file')
        if kind == 'dip':
            p.add_argument('--start', type=int, required=True)
            p.add_argument('--end', type=int, required=True)
            p.add_argument('--factor', type=float, default=0.5)
        if kind == 'transients':
            p.add_argument('--period', type=int, default=scenarios.TRANSIENT_PERIOD)
            p.add_argument('--amp', type=float, default=scenarios.TRANSIENT_AMP)
            p.add_argument('--decay', type=float, default=scenarios.TRANSIENT_DECAY)
            p.add_argument('--tfreq', type=float, default=scenarios.TRANSIENT_FREQ_HZ)
            p.add_argument('--onset', type=int, default=0)
        p.set_defaults(func=cmd_gen)
    rom = kinds.add_parser('rom-scenario', parents=[common])
    rom.add_argument('directory')
    rom.set_defaults(func=cmd_gen)

    p = sub.add_parser('compress', parents=[common], help='compress a file into an SQZ1 container')
    p.add_argument('input')
    p.add_argument('--algo', choices=ALGO_NAMES, required=True)
    p.add_argument('--samples', action='store_true',
                   help='byte codecs: compress the 16-bit samples of a signal CSV')
    p.add_argument('--verify', action='store_true', help='decode in memory before writing')
    _signal_options(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser('decompress', parents=[common], help='expand an SQZ1 container')
    p.add_argument('input')
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser('metrics', parents=[common], help='distortion between two signals')
    p.add_argument('original')
    p.add_argument('reconstructed')
    p.add_argument('--container', help='container to report the compression ratio of')
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser('plotdata', parents=[common], help='original/coding/decoding/error CSV')
    p.add_argument('input')
    p.add_argument('--algo', choices=SIGNAL_ALGOS, required=True)
    p.add_argument('--png', help='also render the four panels to this PNG file')
    _signal_options(p)
    p.set_defaults(func=cmd_plotdata)

    p = sub.add_parser('romfit', parents=[common], help='fit a firmware image into FLASH')
    p.add_argument('image')
    p.add_argument('--manifest', required=True)
    p.add_argument('--catalog', help='device catalog JSON (default built-in)')
    p.add_argument('--stubs', help='decompressor stub sizes JSON')
    p.add_argument('--policy', action='append', metavar='KIND=ALGO',
                   help='override the algorithm for a section kind (repeatable)')
    p.add_argument('--binary', action='store_true', help='image is raw binary, not Intel HEX')
    p.add_argument('--base', type=lambda v: int(v, 0), default=0, help='binary load address')
    p.set_defaults(func=cmd_romfit)

    p = sub.add_parser('memsim', parents=[common], help='simulate compressed main memory')
    p.add_argument('image', help='raw memory image')
    p.add_argument('--trace', required=True)
    p.add_argument('--base', type=lambda v: int(v, 0), default=0)
    p.add_argument('--line', type=int, default=32, help='line size in bytes')
    p.add_argument('--sets', type=int, default=64)
    p.add_argument('--ways', type=int, default=4)
    p.add_argument('--slot', type=int, default=12, help='slot size S (8 or 12)')
    p.add_argument('--codec', choices=('rle', 'lzss', 'lzar'), default='rle')
    p.add_argument('--sweep', action='store_true', help='compare S=8 with S=12')
    p.set_defaults(func=cmd_memsim)

    p = sub.add_parser('bench', parents=[common], help='compare the byte codecs on one input')
    p.add_argument('input')
    p.add_argument('--samples', action='store_true',
                   help='input is a signal CSV; also run the predictive coder')
    p.set_defaults(func=cmd_bench)
    return parser


def exit_code_for(error):
    if isinstance(error, (UsageError, ConfigError)):
        return EXIT_USAGE
    if isinstance(error, IntegrityError):
        return EXIT_INTEGRITY
    return EXIT_PROCESSING


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings()
    except ConfigError as e:
        status(f"❌ ConfigError: {e}")
        return EXIT_USAGE

    level = logging.DEBUG if args.verbose else getattr(logging, settings.log_level.upper(),
                                                      logging.WARNING)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    if args.seed is None:
        args.seed = settings.seed
    if getattr(args, 'fs', 0) is None:
        args.fs = settings.sample_rate_hz

    try:
        return args.func(args, settings)
    except (UsageError, SqzError) as e:
        status(f"❌ {type(e).__name__}: {e}")
        return exit_code_for(e)
    except OSError as e:
        status(f"❌ {e}")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
