"""
Deterministic inputs shared by the demo runner, the CLI and the tests.
"""

from dataclasses import dataclass

import numpy as np

from memsim import TraceOp
from romtool import (
    RomImage,
    Section,
    SectionKind,
    SectionManifest,
    default_catalog,
)
from signalgen import (
    DEFAULT_FUNDAMENTAL_HZ,
    DEFAULT_SAMPLE_RATE_HZ,
    SineSpec,
    gen_sine,
    gen_transients,
    gen_voltage_dip,
    quantize,
)

SAMPLES_PER_CYCLE = int(DEFAULT_SAMPLE_RATE_HZ / DEFAULT_FUNDAMENTAL_HZ)  # 256

ROM_BASE = 0x80000000
ROM_CODE_BYTES = 948_634
ROM_INITVARS_BYTES = 100 * 1024
ROM_ZEROVARS_BYTES = 100 * 1024
INITVARS_RUN = 40


def periodic_sine(cycles=10, amplitude=1.0, scale=1e-3):
    """Quantized 60 Hz sine at 15360 Hz, exactly 256 samples per period"""
    s = gen_sine(amplitude, DEFAULT_FUNDAMENTAL_HZ, 0.0, DEFAULT_SAMPLE_RATE_HZ,
                 cycles * SAMPLES_PER_CYCLE)
    return quantize(s, scale)


def dip_signal(n=4096, start=1000, end=2100, factor=0.5):
    return gen_voltage_dip(SineSpec(), start, end, factor, n)


TRANSIENT_PERIOD = 1024
TRANSIENT_AMP = 0.3
TRANSIENT_DECAY = 0.98
TRANSIENT_FREQ_HZ = 1500.0


def transient_signal(n=4096, amp=TRANSIENT_AMP, first_onset=100):
    return gen_transients(SineSpec(), TRANSIENT_PERIOD, amp, TRANSIENT_DECAY,
                          TRANSIENT_FREQ_HZ, n, first_onset)


def random_bytes(n, seed=0):
    return np.random.default_rng(seed).integers(0, 256, n, dtype=np.uint8).tobytes()


def run_bytes(n, run):
    """Runs of `run` identical bytes; values step by 37 so neighbours differ"""
    runs = -(-n // run)
    values = (np.arange(runs) * 37 + 1) % 256
    return np.repeat(values.astype(np.uint8), run)[:n].tobytes()


def sparse_bytes(n, density=0.02, seed=0):
    rng = np.random.default_rng(seed)
    data = np.zeros(n, dtype=np.uint8)
    hits = rng.random(n) < density
    data[hits] = rng.integers(1, 256, int(hits.sum()), dtype=np.uint8)
    return data.tobytes()


@dataclass(frozen=True)
class RomScenario:
    image: RomImage
    manifest: SectionManifest
    catalog: object


def rom_scenario(seed=0):
    """A 1.1 MiB firmware that needs TC1738 raw and fits TC1734 once compressed"""
    code_end = ROM_BASE + ROM_CODE_BYTES
    init_end = code_end + ROM_INITVARS_BYTES
    zero_end = init_end + ROM_ZEROVARS_BYTES
    image = RomImage(
        spans=((ROM_BASE, random_bytes(ROM_CODE_BYTES, seed)),
               (code_end, run_bytes(ROM_INITVARS_BYTES, INITVARS_RUN))),
        entry_point=ROM_BASE,
    )
    manifest = SectionManifest((
        Section('text', SectionKind.CODE, ROM_BASE, code_end, relocatable=False),
        Section('data', SectionKind.INITVARS, code_end, init_end),
        Section('bss', SectionKind.ZEROVARS, init_end, zero_end),
    ))
    return RomScenario(image, manifest, default_catalog())


def random_trace(size, count, seed=0, write_fraction=0.3, base=0):
    rng = np.random.default_rng(seed)
    addresses = rng.integers(0, size, count)
    writes = rng.random(count) < write_fraction
    values = rng.integers(0, 256, count)
    return [TraceOp('W', base + int(a), int(v)) if w else TraceOp('R', base + int(a))
            for a, w, v in zip(addresses, writes, values)]


def sequential_trace(size, stride=4, base=0):
    return [TraceOp('R', base + a) for a in range(0, size, stride)]
