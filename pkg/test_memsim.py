#!/usr/bin/env python3
"""
Tests for the compressed main memory cache simulator
"""

import sys

import numpy as np
import pytest

from container import Algo
from errors import AddressOutOfRange, ConfigError, SimulationError, ZeroLengthTrace
from memsim import (
    CacheConfig,
    CompressedMainMemory,
    FlatMemory,
    TraceOp,
    format_trace,
    parse_trace,
    reference_image,
    run_trace,
    simulate,
    slot_bytes,
    sweep_slots,
)
from scenarios import random_bytes, random_trace, sequential_trace


def _apply_writes(image, trace, base=0):
    """Final memory from applying the trace's writes straight to the image"""
    out = bytearray(image)
    writes = 0
    for t in trace:
        if t.op == 'W':
            out[t.address - base] = t.value if t.value is not None else writes & 0xFF
            writes += 1
    return bytes(out)


def _mixed_image():
    return bytes(2048) + random_bytes(2048, seed=5)


def test_slot_rounding():
    assert slot_bytes(2, 12, 32) == 12
    assert slot_bytes(2, 8, 32) == 8
    assert slot_bytes(13, 12, 32) == 24
    assert slot_bytes(25, 12, 32) == 32
    assert slot_bytes(40, 8, 32) == 32


def test_zero_image_sequential_read():
    stats = run_trace(bytes(4096), sequential_trace(4096), CacheConfig())
    assert stats.accesses == 1024
    assert stats.misses == 128 and stats.writebacks == 0
    assert stats.bytes_uncompressed_equiv == 4096
    assert stats.bytes_compressed == 128 * 12
    assert stats.reduction_pct == 62.5


def test_random_image_stays_raw():
    stats = run_trace(random_bytes(4096, seed=1), sequential_trace(4096), CacheConfig())
    assert stats.reduction_pct == 0.0
    assert stats.raw_transfers == stats.misses
    assert stats.compressed_transfers == 0


def test_mixed_image_is_partial():
    stats = run_trace(_mixed_image(), sequential_trace(4096), CacheConfig())
    assert 0.0 < stats.reduction_pct < 100.0
    assert stats.raw_transfers > 0 and stats.compressed_transfers > 0


def test_smaller_slot_on_zero_lines():
    sweep = sweep_slots(bytes(4096), sequential_trace(4096), CacheConfig())
    assert sweep.s8.bytes_compressed <= sweep.s12.bytes_compressed
    assert sweep.delta_bytes == 128 * 4
    doc = sweep.to_dict()
    assert set(doc) == {'S8', 'S12', 'delta_bytes'}
    assert doc['S8']['reduction_pct'] == 75.0


@pytest.mark.parametrize('seed', range(20))
def test_compressed_never_exceeds_uncompressed(seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(64, 1024))
    image = _mixed_image()[2048 - size // 2:2048 - size // 2 + size]
    trace = random_trace(size, 200, seed=seed)
    cfg = CacheConfig(line_bytes=16, sets=4, ways=2, slot_s=int(rng.choice([8, 12])))
    stats = run_trace(image, trace, cfg)
    assert stats.bytes_compressed <= stats.bytes_uncompressed_equiv


@pytest.mark.parametrize('codec', [Algo.RLE, Algo.LZSS, Algo.LZAR])
def test_final_memory_matches_uncompressed_run(codec):
    image = _mixed_image()[1024:3072]
    trace = random_trace(len(image), 300, seed=3)
    cfg = CacheConfig(sets=4, ways=2, codec=codec)
    result = simulate(image, trace, cfg)
    assert result.memory == reference_image(image, trace, cfg)
    assert result.memory == _apply_writes(image, trace)


def test_writes_without_value_store_ordinal():
    trace = [TraceOp('W', 0), TraceOp('W', 1), TraceOp('W', 2, 0xAB), TraceOp('W', 3)]
    result = simulate(bytes(64), trace, CacheConfig())
    assert result.memory[:4] == bytes([0, 1, 0xAB, 3])


def test_traffic_conservation():
    image = _mixed_image()
    trace = random_trace(len(image), 2000, seed=7)
    stats = run_trace(image, trace, CacheConfig(sets=8, ways=2))
    transfers = stats.misses + stats.writebacks
    assert stats.hits + stats.misses == stats.accesses == len(trace)
    assert stats.raw_transfers + stats.compressed_transfers == transfers
    assert stats.bytes_uncompressed_equiv == transfers * 32
    assert stats.writebacks > 0


def test_direct_mapped_writebacks():
    cfg = CacheConfig(sets=1, ways=1)
    trace = [TraceOp('W', 0, 1), TraceOp('W', 32, 2), TraceOp('R', 0)]
    result = simulate(bytes(128), trace, cfg)
    assert (result.stats.misses, result.stats.writebacks, result.stats.hits) == (3, 2, 0)
    assert result.stats.bytes_uncompressed_equiv == 5 * 32
    assert result.memory[0] == 1 and result.memory[32] == 2


def test_base_address():
    trace = sequential_trace(256, base=0x80000000)
    stats = run_trace(bytes(256), trace, CacheConfig(), base=0x80000000)
    assert stats.misses == 8
    with pytest.raises(AddressOutOfRange) as excinfo:
        run_trace(bytes(256), [TraceOp('R', 0x80000100)], CacheConfig(), base=0x80000000)
    assert excinfo.value.address == 0x80000100


def test_address_out_of_range():
    with pytest.raises(AddressOutOfRange):
        run_trace(bytes(64), [TraceOp('R', 64)], CacheConfig())
    with pytest.raises(AddressOutOfRange):
        run_trace(bytes(64), [TraceOp('R', 16)], CacheConfig(), base=32)


def test_zero_length_trace():
    with pytest.raises(ZeroLengthTrace):
        run_trace(bytes(64), [], CacheConfig())


def test_deterministic():
    image = _mixed_image()
    trace = random_trace(len(image), 500, seed=11)
    assert run_trace(image, trace, CacheConfig()) == run_trace(image, trace, CacheConfig())


@pytest.mark.parametrize('kwargs', [
    {'line_bytes': 24},
    {'line_bytes': 8},
    {'sets': 3},
    {'sets': 0},
    {'ways': 0},
    {'slot_s': 16},
    {'codec': Algo.LZW},
    {'codec': Algo.WAVELET},
])
def test_config_errors(kwargs):
    with pytest.raises(ConfigError):
        CacheConfig(**kwargs)


def test_config_accepts_algo_values():
    assert CacheConfig(codec=Algo.LZSS.value).codec is Algo.LZSS
    assert CacheConfig(line_bytes=64, sets=16, ways=8).capacity == 64 * 16 * 8


def test_memories_agree_on_image():
    image = _mixed_image()[:1000]
    assert FlatMemory(image, 32).image() == image
    assert CompressedMainMemory(image, 32, 12, Algo.RLE).image() == image


def test_compressed_memory_marks_raw_lines():
    memory = CompressedMainMemory(bytes(32) + random_bytes(32, seed=2), 32, 12, Algo.RLE)
    assert memory.fetch(0)[1:] == (12, False)
    assert memory.fetch(1)[1:] == (32, True)


def test_lines_compress_on_first_fetch():
    image = bytes(32) + random_bytes(96, seed=3)
    memory = CompressedMainMemory(image, 32, 12, Algo.LZSS)
    assert memory.packed_lines() == 0
    assert memory.image() == image
    memory.fetch(2)
    memory.fetch(2)
    assert memory.packed_lines() == 1
    assert memory.image() == image


def test_single_access_on_large_image():
    image = bytes(256 * 1024)
    memory = CompressedMainMemory(image, 32, 12, Algo.LZSS)
    result = simulate(image, [TraceOp('R', 0)], CacheConfig(codec=Algo.LZSS), memory=memory)
    assert result.stats.misses == 1
    assert result.stats.bytes_compressed == 12
    assert memory.packed_lines() == 1
    assert result.memory == image


def test_parse_trace():
    text = "# header\nR,10\nW,1F,ff\nw, 20\n\nR,0x30\n"
    assert parse_trace(text) == [
        TraceOp('R', 0x10), TraceOp('W', 0x1F, 0xFF), TraceOp('W', 0x20), TraceOp('R', 0x30),
    ]
    assert parse_trace("") == []


def test_parse_trace_errors():
    with pytest.raises(SimulationError):
        parse_trace("X,10\n")
    with pytest.raises(SimulationError):
        parse_trace("R,zz\n")
    with pytest.raises(SimulationError):
        parse_trace("R,10,05\n")
    with pytest.raises(SimulationError):
        parse_trace("W,10,100\n")


def test_format_trace_reads_back():
    trace = random_trace(4096, 50, seed=4)
    assert parse_trace(format_trace(trace)) == trace


if __name__ == "__main__":
    sys.exit(pytest.main([__file__]))
