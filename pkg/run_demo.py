#!/usr/bin/env python3
"""
Replay the headline scenarios and print a pass/fail summary
"""

import sys

from container import Algo
from hybrid import hybrid_decode, hybrid_encode
from lossless_codecs import lzw_encode, rle_encode
from metrics import compression_ratio, distortion
from periodic import predictive_decode, predictive_encode
from romtool import compress_image, fit_report
from scenarios import (
    INITVARS_RUN,
    ROM_INITVARS_BYTES,
    dip_signal,
    periodic_sine,
    rom_scenario,
    run_bytes,
    transient_signal,
)
from signalgen import add_noise, dequantize, quantize
from wavelet import LossyPlan, wavelet_compress, wavelet_decompress


def demo_rom_fit():
    """Raw firmware needs TC1738; compressed it fits TC1734"""
    print("💾 ROM fit...")
    scenario = rom_scenario()
    stored = compress_image(scenario.image, scenario.manifest,
                            {kind: 'STORE' for kind in ('code', 'const', 'initvars', 'zerovars')})
    packed = compress_image(scenario.image, scenario.manifest)
    before = fit_report(stored, scenario.catalog)
    after = fit_report(packed, scenario.catalog)
    print(f"   uncompressed {before.total_bytes} bytes -> {before.chosen_device}")
    print(f"   compressed   {after.total_bytes} bytes -> {after.chosen_device}")
    print(f"   stubs: {after.stub_overheads}")
    return before.chosen_device == 'TC1738' and after.chosen_device == 'TC1734'


def demo_rle_initvars():
    """Run-heavy and all-zero 100 KiB sections under RLE"""
    print("🧮 RLE initvars...")
    runs = run_bytes(ROM_INITVARS_BYTES, INITVARS_RUN)
    zeros = bytes(ROM_INITVARS_BYTES)
    runs_ratio = compression_ratio(len(runs), len(rle_encode(runs).payload))
    zero_payload = len(rle_encode(zeros).payload)
    zero_ratio = compression_ratio(len(zeros), zero_payload)
    print(f"   runs of {INITVARS_RUN}: {runs_ratio.label}")
    print(f"   all zero: {zero_ratio.label}, {len(zeros) - zero_payload} bytes saved")
    return runs_ratio.ratio >= 10 and zero_ratio.ratio >= 100


def demo_predictive():
    """Predictive coder against plain LZW, clean and at 34.2 dB"""
    print("📈 Predictive coder...")
    q = periodic_sine()
    c = predictive_encode(q)
    ratio = compression_ratio(c.original_len, len(c.to_bytes())).ratio
    lzw = compression_ratio(c.original_len, len(lzw_encode(q.to_bytes()).to_bytes())).ratio
    lossless = (predictive_decode(c).samples == q.samples).all()

    noisy = quantize(add_noise(dequantize(q), 34.2, seed=0), q.scale)
    cn = predictive_encode(noisy, period=256)
    noisy_ratio = compression_ratio(cn.original_len, len(cn.to_bytes())).ratio
    noisy_lossless = (predictive_decode(cn).samples == noisy.samples).all()
    print(f"   clean {ratio:.1f}:1 (LZW {lzw:.1f}:1), noisy {noisy_ratio:.1f}:1")
    return lossless and noisy_lossless and ratio >= 10 and ratio > lzw and noisy_ratio < ratio


def demo_wavelet():
    """Dip signal at 6:1"""
    print("🌊 Wavelet...")
    s = dip_signal()
    c = wavelet_compress(s, LossyPlan(6.0))
    report = distortion(s, wavelet_decompress(c))
    ratio = compression_ratio(c.original_len, len(c.to_bytes()))
    print(f"   {ratio.label}, NMSE {report.nmse:.2e}")
    return ratio.ratio >= 6 and report.nmse <= 1e-3


def demo_hybrid():
    """Transient signal at 8:1"""
    print("🔀 Hybrid...")
    s = transient_signal()
    c = hybrid_encode(s, LossyPlan(8.0))
    report = distortion(s, hybrid_decode(c))
    ratio = compression_ratio(c.original_len, len(c.to_bytes()))
    print(f"   {ratio.label}, SNR {report.snr_db:.1f} dB")
    return c.algo == Algo.HYBRID and ratio.ratio >= 8 and report.snr_db >= 20


DEMOS = (
    ('ROM fit', demo_rom_fit),
    ('RLE initvars', demo_rle_initvars),
    ('Predictive coder', demo_predictive),
    ('Wavelet', demo_wavelet),
    ('Hybrid', demo_hybrid),
)


def main():
    """Run every scenario"""
    print("🗜️ sqz scenario runner")
    print("=" * 50)

    results = {}
    for name, demo in DEMOS:
        try:
            results[name] = bool(demo())
        except Exception as e:
            print(f"❌ {name} failed: {type(e).__name__}: {e}")
            results[name] = False

    print("\n" + "=" * 50)
    print("📋 Results:")
    for name, ok in results.items():
        print(f"   {name}: {'✅ PASS' if ok else '❌ FAIL'}")

    if all(results.values()):
        print("\n🎉 All scenarios passed!")
    else:
        print("\n⚠️ Some scenarios failed. Check the output above.")
    return all(results.values())


if __name__ == "__main__":
    success = main()
    sys.exit(0 if success else 1)
