"""
Functional simulation of a cache in front of compressed main memory.

The cache holds lines uncompressed. Every transfer between the cache and
memory (miss fill or dirty write-back) goes through the codec: a line of c
compressed bytes moves ceil(c/S)*S bytes, or line_bytes when that is not
smaller (raw mode; the per-line mode bit lives in metadata that is not counted).

Trace format: CSV lines `R,<hex address>` or `W,<hex address>[,<hex value>]`.
A write without a value stores the low byte of the write's ordinal.
"""

import io
import logging
from collections import OrderedDict
from dataclasses import asdict, dataclass, field, replace
from typing import List, NamedTuple, Optional

import pandas as pd

from container import Algo
from errors import AddressOutOfRange, ConfigError, SimulationError, ZeroLengthTrace
from lossless_codecs import compress_payload, expand_payload

logger = logging.getLogger(__name__)

SLOT_SIZES = (8, 12)
CACHE_CODECS = (Algo.RLE, Algo.LZSS, Algo.LZAR)


def _power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


@dataclass(frozen=True)
class CacheConfig:
    line_bytes: int = 32
    sets: int = 64
    ways: int = 4
    slot_s: int = 12
    codec: Algo = Algo.RLE

    def __post_init__(self):
        object.__setattr__(self, 'codec', Algo(self.codec))
        if not (_power_of_two(self.line_bytes) and self.line_bytes >= 16):
            raise ConfigError("line_bytes must be a power of two of at least 16")
        if not _power_of_two(self.sets):
            raise ConfigError("sets must be a power of two")
        if self.ways < 1:
            raise ConfigError("ways must be at least 1")
        if self.slot_s not in SLOT_SIZES:
            raise ConfigError(f"slot size must be one of {SLOT_SIZES}")
        if self.codec not in CACHE_CODECS:
            raise ConfigError(f"{self.codec.name} is not a cache line codec")
        if self.line_bytes < self.slot_s:
            raise ConfigError("line_bytes must be at least the slot size")

    @property
    def capacity(self):
        return self.line_bytes * self.sets * self.ways


@dataclass
class TrafficStats:
    accesses: int = 0
    hits: int = 0
    misses: int = 0
    writebacks: int = 0
    bytes_uncompressed_equiv: int = 0
    bytes_compressed: int = 0
    raw_transfers: int = 0
    compressed_transfers: int = 0

    @property
    def reduction_pct(self):
        if self.bytes_uncompressed_equiv == 0:
            return 0.0
        return 100.0 * (1.0 - self.bytes_compressed / self.bytes_uncompressed_equiv)

    def to_dict(self):
        doc = asdict(self)
        doc['reduction_pct'] = self.reduction_pct
        return doc


class TraceOp(NamedTuple):
    op: str
    address: int
    value: Optional[int] = None


def slot_bytes(compressed_len, slot_s, line_bytes):
    """Bytes moved for a line compressed to compressed_len bytes"""
    slotted = -(-compressed_len // slot_s) * slot_s
    return line_bytes if slotted >= line_bytes else slotted


class FlatMemory:
    """Uncompressed reference memory"""

    def __init__(self, image, line_bytes):
        self.line_bytes = line_bytes
        self.data = bytearray(image)
        self.data += bytes(-len(self.data) % line_bytes)
        self.size = len(image)

    def fetch(self, line_no):
        start = line_no * self.line_bytes
        return bytes(self.data[start:start + self.line_bytes]), self.line_bytes, True

    def store(self, line_no, data):
        start = line_no * self.line_bytes
        self.data[start:start + self.line_bytes] = data
        return self.line_bytes, True

    def image(self):
        return bytes(self.data[:self.size])


class CompressedMainMemory:
    """Lines kept in compressed form, with a raw-mode bit per line

    A line is compressed the first time it is fetched; lines never touched
    stay as image bytes and cost nothing.
    """

    def __init__(self, image, line_bytes, slot_s, codec):
        self.line_bytes = line_bytes
        self.slot_s = slot_s
        self.codec = codec
        self.size = len(image)
        self.padded = bytes(image) + bytes(-len(image) % line_bytes)
        self.lines = [None] * (len(self.padded) // line_bytes)

    def _pack(self, data):
        payload = compress_payload(self.codec, data)
        moved = slot_bytes(len(payload), self.slot_s, self.line_bytes)
        if moved >= self.line_bytes:
            return True, bytes(data)
        return False, payload

    def _unpack(self, record):
        raw, payload = record
        if raw:
            return payload
        return expand_payload(self.codec, payload, self.line_bytes)

    def _moved(self, record):
        raw, payload = record
        return self.line_bytes if raw else slot_bytes(len(payload), self.slot_s, self.line_bytes)

    def _original(self, line_no):
        start = line_no * self.line_bytes
        return self.padded[start:start + self.line_bytes]

    def packed_lines(self):
        return sum(1 for r in self.lines if r is not None)

    def fetch(self, line_no):
        record = self.lines[line_no]
        if record is None:
            record = self.lines[line_no] = self._pack(self._original(line_no))
        return self._unpack(record), self._moved(record), record[0]

    def store(self, line_no, data):
        record = self._pack(data)
        self.lines[line_no] = record
        return self._moved(record), record[0]

    def image(self):
        return b''.join(self._original(i) if r is None else self._unpack(r)
                        for i, r in enumerate(self.lines))[:self.size]


@dataclass
class _Line:
    data: bytearray
    dirty: bool = False


@dataclass
class SimulationResult:
    stats: TrafficStats
    memory: bytes = field(repr=False)


def parse_trace(text):
    try:
        frame = pd.read_csv(io.StringIO(text), header=None, names=['op', 'address', 'value'],
                            comment='#', dtype=str, skipinitialspace=True,
                            skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return []
    except pd.errors.ParserError as e:
        raise SimulationError(f"unreadable trace: {e}") from None

    trace = []
    for lineno, (op, address, value) in enumerate(frame.itertuples(index=False), start=1):
        op = str(op).strip().upper()
        if op not in ('R', 'W'):
            raise SimulationError(f"trace record {lineno}: operation must be R or W, got {op!r}")
        try:
            addr = int(str(address).strip(), 16)
            val = None if pd.isna(value) else int(str(value).strip(), 16)
        except ValueError:
            raise SimulationError(f"trace record {lineno}: bad hex number") from None
        if val is not None and not (op == 'W' and 0 <= val <= 0xFF):
            raise SimulationError(f"trace record {lineno}: only writes carry a byte value")
        trace.append(TraceOp(op, addr, val))
    return trace


def format_trace(trace):
    lines = []
    for t in trace:
        if t.value is None:
            lines.append(f"{t.op},{t.address:X}")
        else:
            lines.append(f"{t.op},{t.address:X},{t.value:02X}")
    return '\n'.join(lines) + '\n'


def simulate(image, trace, cfg, base=0, memory=None):
    """Replay trace; returns the traffic and the memory image after a final flush"""
    if len(trace) == 0:
        raise ZeroLengthTrace("trace has no accesses")
    image = bytes(image)
    if memory is None:
        memory = CompressedMainMemory(image, cfg.line_bytes, cfg.slot_s, cfg.codec)

    stats = TrafficStats()
    sets: List[OrderedDict] = [OrderedDict() for _ in range(cfg.sets)]

    def transfer(moved, raw):
        stats.bytes_uncompressed_equiv += cfg.line_bytes
        stats.bytes_compressed += moved
        if raw:
            stats.raw_transfers += 1
        else:
            stats.compressed_transfers += 1

    writes = 0
    for access in trace:
        offset = access.address - base
        if not 0 <= offset < len(image):
            raise AddressOutOfRange(access.address)
        line_no, within = divmod(offset, cfg.line_bytes)
        set_index, tag = line_no % cfg.sets, line_no // cfg.sets
        lines = sets[set_index]

        stats.accesses += 1
        line = lines.get(tag)
        if line is not None:
            stats.hits += 1
            lines.move_to_end(tag)
        else:
            stats.misses += 1
            if len(lines) >= cfg.ways:
                victim_tag, victim = lines.popitem(last=False)
                if victim.dirty:
                    stats.writebacks += 1
                    transfer(*memory.store(victim_tag * cfg.sets + set_index, bytes(victim.data)))
            data, moved, raw = memory.fetch(line_no)
            transfer(moved, raw)
            line = _Line(bytearray(data))
            lines[tag] = line

        if access.op == 'W':
            line.data[within] = access.value if access.value is not None else writes & 0xFF
            line.dirty = True
            writes += 1

    for set_index, lines in enumerate(sets):
        for tag, line in lines.items():
            if line.dirty:
                memory.store(tag * cfg.sets + set_index, bytes(line.data))

    logger.debug("simulated %d accesses: %d misses, %d write-backs, %.2f%% reduction",
                 stats.accesses, stats.misses, stats.writebacks, stats.reduction_pct)
    return SimulationResult(stats, memory.image())


def run_trace(image, trace, cfg, base=0):
    return simulate(image, trace, cfg, base).stats


def reference_image(image, trace, cfg, base=0):
    """Final memory of the same run against uncompressed memory"""
    return simulate(image, trace, cfg, base, FlatMemory(bytes(image), cfg.line_bytes)).memory


@dataclass(frozen=True)
class SlotSweep:
    s8: TrafficStats
    s12: TrafficStats

    @property
    def delta_bytes(self):
        """Bytes S=12 moves beyond S=8"""
        return self.s12.bytes_compressed - self.s8.bytes_compressed

    def to_dict(self):
        return {'S8': self.s8.to_dict(), 'S12': self.s12.to_dict(),
                'delta_bytes': self.delta_bytes}


def sweep_slots(image, trace, cfg, base=0):
    return SlotSweep(
        s8=run_trace(image, trace, replace(cfg, slot_s=8), base),
        s12=run_trace(image, trace, replace(cfg, slot_s=12), base),
    )
