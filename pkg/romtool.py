"""
Firmware ROM fitting: Intel HEX images, section manifests, per-section
compression and FLASH device selection.

Manifest (JSON):

    {"version": 1,
     "sections": [{"name": "text", "kind": "code", "start": "0x80000000",
                   "end": "0x800E7A9A", "relocatable": false}, ...]}

`end` is exclusive; addresses are integers or hex strings. zerovars sections
need no bytes in the image, they stand for zero fill of their length.

Catalog (JSON): {"version": 1, "devices": [{"name": "TC1734", "flash_bytes": 1048576}, ...]}
Stub table (JSON): {"RLE": 100, "LZW": 5120, ...}
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import pandas as pd

from container import Algo
from errors import (
    BadChecksum,
    BadHexDigit,
    ManifestError,
    MissingEof,
    OverlappingData,
    PolicyUnknownAlgo,
    UnsupportedRecordType,
)
from lossless_codecs import LOSSLESS_ALGOS, compress_payload, expand_payload

logger = logging.getLogger(__name__)

REC_DATA = 0x00
REC_EOF = 0x01
REC_EXT_LINEAR = 0x04
REC_START_LINEAR = 0x05

MIB = 1 << 20

DEFAULT_CATALOG = (
    ('TC1734', 1 * MIB),
    ('TC1738', 3 * MIB // 2),
    ('TC1767', 2 * MIB),
)

DEFAULT_STUBS = {
    Algo.RLE: 100,
    Algo.LZW: 5120,
    Algo.LZSS: 1024,
    Algo.LZAR: 3072,
}

STORE = 'STORE'


class SectionKind(str, Enum):
    CODE = 'code'
    CONST = 'const'
    INITVARS = 'initvars'
    ZEROVARS = 'zerovars'


DEFAULT_POLICY = {
    SectionKind.CODE: 'LZW',
    SectionKind.CONST: 'LZW',
    SectionKind.INITVARS: 'RLE',
    SectionKind.ZEROVARS: 'RLE',
}


# Images

@dataclass(frozen=True)
class RomImage:
    spans: Tuple[Tuple[int, bytes], ...] = ()
    entry_point: Optional[int] = None

    def __post_init__(self):
        spans = tuple(sorted((int(base), bytes(data)) for base, data in self.spans if data))
        for (base, data), (nxt, _) in zip(spans, spans[1:]):
            if base + len(data) > nxt:
                raise OverlappingData(nxt)
        object.__setattr__(self, 'spans', spans)

    @property
    def size(self):
        return sum(len(data) for _, data in self.spans)

    def covers(self, start, end):
        return all(self._span_at(a) is not None for a in (start, end - 1)) and \
            self._span_at(start) == self._span_at(end - 1)

    def _span_at(self, address):
        for i, (base, data) in enumerate(self.spans):
            if base <= address < base + len(data):
                return i
        return None

    def read(self, start, end):
        """Bytes of [start, end), which must lie inside one span"""
        i = self._span_at(start)
        if i is None or not self.covers(start, end):
            raise ManifestError(f"[0x{start:08X}, 0x{end:08X}) is not covered by the image")
        base, data = self.spans[i]
        return data[start - base:end - base]


def _checksum(record):
    return (-sum(record)) & 0xFF


def ihex_record(rtype, address, data=b''):
    """One Intel HEX line, checksum included"""
    body = bytes([len(data), (address >> 8) & 0xFF, address & 0xFF, rtype]) + bytes(data)
    return ':' + (body + bytes([_checksum(body)])).hex().upper()


def parse_ihex(text):
    records = []
    upper = 0
    entry = None
    seen_eof = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if not line.startswith(':'):
            raise BadHexDigit(lineno)
        try:
            record = bytes.fromhex(line[1:])
        except ValueError:
            raise BadHexDigit(lineno) from None
        if len(record) < 5 or len(record) != record[0] + 5:
            raise BadHexDigit(lineno)
        if sum(record) & 0xFF:
            raise BadChecksum(lineno)

        address = (record[1] << 8) | record[2]
        rtype = record[3]
        data = record[4:-1]
        if rtype == REC_DATA:
            records.append((upper + address, data))
        elif rtype == REC_EOF:
            seen_eof = True
            break
        elif rtype == REC_EXT_LINEAR:
            upper = int.from_bytes(data, 'big') << 16
        elif rtype == REC_START_LINEAR:
            entry = int.from_bytes(data, 'big')
        else:
            raise UnsupportedRecordType(f"record type {rtype:02X} on line {lineno}")

    if not seen_eof:
        raise MissingEof("no end-of-file record")

    spans = []
    for address, data in sorted(records, key=lambda r: r[0]):
        if not data:
            continue
        if spans:
            base, buf = spans[-1]
            end = base + len(buf)
            if address < end:
                raise OverlappingData(address)
            if address == end:
                buf += data
                continue
        spans.append((address, bytearray(data)))
    logger.debug("parsed %d data records into %d spans", len(records), len(spans))
    return RomImage(tuple((base, bytes(buf)) for base, buf in spans), entry)


def format_ihex(image, record_size=16):
    lines = []
    upper = 0
    for base, data in image.spans:
        pos = 0
        while pos < len(data):
            address = base + pos
            if address >> 16 != upper:
                upper = address >> 16
                lines.append(ihex_record(REC_EXT_LINEAR, 0, upper.to_bytes(2, 'big')))
            room = 0x10000 - (address & 0xFFFF)
            chunk = data[pos:pos + min(record_size, room)]
            lines.append(ihex_record(REC_DATA, address & 0xFFFF, chunk))
            pos += len(chunk)
    if image.entry_point is not None:
        lines.append(ihex_record(REC_START_LINEAR, 0, image.entry_point.to_bytes(4, 'big')))
    lines.append(ihex_record(REC_EOF, 0))
    return '\n'.join(lines) + '\n'


def load_binary(data, base=0):
    return RomImage(((base, bytes(data)),))


# Manifests, catalogs, stubs

@dataclass(frozen=True)
class Section:
    name: str
    kind: SectionKind
    start: int
    end: int
    relocatable: bool = True

    @property
    def length(self):
        return self.end - self.start


@dataclass(frozen=True)
class SectionManifest:
    entries: Tuple[Section, ...]

    def __post_init__(self):
        entries = tuple(sorted(self.entries, key=lambda s: s.start))
        names = [s.name for s in entries]
        if len(set(names)) != len(names):
            raise ManifestError("section names must be unique")
        for s in entries:
            if not s.start < s.end:
                raise ManifestError(f"section {s.name} has an empty or reversed range")
        for a, b in zip(entries, entries[1:]):
            if a.end > b.start:
                raise ManifestError(f"sections {a.name} and {b.name} overlap")
        object.__setattr__(self, 'entries', entries)


def _address(value, what):
    if isinstance(value, bool):
        raise ManifestError(f"{what} must be an address")
    if isinstance(value, int):
        return value
    try:
        return int(str(value), 0)
    except ValueError:
        raise ManifestError(f"{what} is not an address: {value!r}") from None


def _json(text, what):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(f"{what} is not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get('version') != 1:
        raise ManifestError(f"{what} must be an object with \"version\": 1")
    return doc


def load_manifest(text):
    doc = _json(text, "manifest")
    sections = []
    for i, entry in enumerate(doc.get('sections', [])):
        try:
            kind = SectionKind(entry['kind'])
            sections.append(Section(
                name=str(entry['name']),
                kind=kind,
                start=_address(entry['start'], f"sections[{i}].start"),
                end=_address(entry['end'], f"sections[{i}].end"),
                relocatable=bool(entry.get('relocatable', True)),
            ))
        except (KeyError, TypeError):
            raise ManifestError(f"sections[{i}] needs name, kind, start and end") from None
        except ValueError:
            raise ManifestError(f"sections[{i}] has unknown kind {entry.get('kind')!r}") from None
    if not sections:
        raise ManifestError("manifest lists no sections")
    return SectionManifest(tuple(sections))


def manifest_to_json(manifest):
    return json.dumps({
        'version': 1,
        'sections': [
            {'name': s.name, 'kind': s.kind.value, 'start': f"0x{s.start:08X}",
             'end': f"0x{s.end:08X}", 'relocatable': s.relocatable}
            for s in manifest.entries
        ],
    }, indent=2)


@dataclass(frozen=True)
class Device:
    name: str
    flash_bytes: int


@dataclass(frozen=True)
class DeviceCatalog:
    devices: Tuple[Device, ...]

    def __post_init__(self):
        names = [d.name for d in self.devices]
        if not self.devices:
            raise ManifestError("device catalog is empty")
        if len(set(names)) != len(names):
            raise ManifestError("device names must be unique")
        if any(d.flash_bytes <= 0 for d in self.devices):
            raise ManifestError("flash sizes must be positive")

    def smallest_fit(self, total_bytes):
        fitting = [d for d in self.devices if d.flash_bytes >= total_bytes]
        if not fitting:
            return None
        return min(fitting, key=lambda d: d.flash_bytes).name


def default_catalog():
    return DeviceCatalog(tuple(Device(name, size) for name, size in DEFAULT_CATALOG))


def load_catalog(text):
    doc = _json(text, "device catalog")
    try:
        devices = tuple(Device(str(d['name']), int(d['flash_bytes'])) for d in doc['devices'])
    except (KeyError, TypeError, ValueError):
        raise ManifestError("catalog devices need name and flash_bytes") from None
    return DeviceCatalog(devices)


def catalog_to_json(catalog):
    return json.dumps({'version': 1, 'devices': [asdict(d) for d in catalog.devices]}, indent=2)


def load_stub_table(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(f"stub table is not valid JSON: {e}") from None
    stubs = dict(DEFAULT_STUBS)
    for name, size in doc.items():
        algo = _policy_algo(name)
        if algo is None or not isinstance(size, int) or size < 0:
            raise ManifestError(f"stub table entry {name!r} is invalid")
        stubs[algo] = size
    return stubs


def _policy_algo(name):
    """Algo for a policy name, None for STORE"""
    name = str(name).upper()
    if name == STORE:
        return None
    try:
        algo = Algo.parse(name)
    except ValueError:
        raise PolicyUnknownAlgo(f"unknown compression algorithm {name!r}") from None
    if algo not in LOSSLESS_ALGOS:
        raise PolicyUnknownAlgo(f"{algo.name} cannot compress ROM sections")
    return algo


def parse_policy(mapping=None):
    policy = dict(DEFAULT_POLICY)
    for kind, name in (mapping or {}).items():
        try:
            kind = SectionKind(kind)
        except ValueError:
            raise ManifestError(f"unknown section kind {kind!r}") from None
        policy[kind] = name
    return {kind: _policy_algo(name) for kind, name in policy.items()}


# Compression and fitting

@dataclass(frozen=True)
class CompressedSection:
    section: Section
    raw_bytes: int
    algo: Optional[Algo]
    payload: bytes

    @property
    def compressed_bytes(self):
        return len(self.payload)

    @property
    def ratio(self):
        return self.raw_bytes / self.compressed_bytes if self.payload else float('inf')

    @property
    def expands(self):
        return self.compressed_bytes > self.raw_bytes


@dataclass(frozen=True)
class CompressedImage:
    sections: Tuple[CompressedSection, ...]

    @property
    def algos_used(self):
        return sorted({s.algo for s in self.sections if s.algo is not None})


def _unlisted_sections(img, manifest):
    """Image bytes no manifest section claims, stored as they are"""
    extra = []
    for base, data in img.spans:
        cursor, end = base, base + len(data)
        for s in manifest.entries:
            if s.end <= cursor or s.start >= end:
                continue
            if s.start > cursor:
                extra.append((cursor, s.start))
            cursor = max(cursor, s.end)
        if cursor < end:
            extra.append((cursor, end))
    return [Section(f"unlisted@0x{a:08X}", SectionKind.CONST, a, b, relocatable=False)
            for a, b in extra]


def section_bytes(img, section):
    if section.kind is SectionKind.ZEROVARS:
        return bytes(section.length)
    return img.read(section.start, section.end)


def compress_image(img, manifest, policy=None):
    algos = parse_policy(policy)
    out = []
    for section in list(manifest.entries) + _unlisted_sections(img, manifest):
        raw = section_bytes(img, section)
        algo = algos[section.kind]
        if section.kind is SectionKind.CODE and not section.relocatable:
            algo = None
        if section.name.startswith('unlisted@'):
            algo = None
        payload = raw if algo is None else compress_payload(algo, raw)
        cs = CompressedSection(section, len(raw), algo, payload)
        if cs.expands:
            logger.warning("section %s grows from %d to %d bytes under %s",
                           section.name, cs.raw_bytes, cs.compressed_bytes, algo.name)
        out.append(cs)
    return CompressedImage(tuple(out))


def expand_section(cs):
    if cs.algo is None:
        return cs.payload
    return expand_payload(cs.algo, cs.payload, cs.raw_bytes)


@dataclass(frozen=True)
class SectionReport:
    name: str
    kind: str
    raw_bytes: int
    algo: str
    compressed_bytes: int
    ratio: float
    expands: bool


@dataclass(frozen=True)
class FitReport:
    sections: List[SectionReport]
    stub_overheads: Dict[str, int]
    total_bytes: int
    chosen_device: Optional[str]
    savings_bytes: int
    baseline_bytes: int
    baseline_device: Optional[str]
    expanded_bytes: int
    catalog: List[Dict] = field(default_factory=list)

    @property
    def fits(self):
        return self.chosen_device is not None

    def to_dict(self):
        doc = asdict(self)
        doc['ratio_overall'] = self.baseline_bytes / self.total_bytes if self.total_bytes else None
        return doc

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def to_frame(self):
        return pd.DataFrame([asdict(s) for s in self.sections])

    def to_table(self):
        frame = self.to_frame()
        frame['ratio'] = frame['ratio'].map(lambda r: f"{r:.1f}:1")
        lines = [frame.to_string(index=False), '']
        for algo, size in self.stub_overheads.items():
            lines.append(f"stub {algo}: {size} bytes")
        lines.append(f"baseline: {self.baseline_bytes} bytes -> {self.baseline_device or 'none'}")
        lines.append(f"total:    {self.total_bytes} bytes -> {self.chosen_device or 'none'}")
        lines.append(f"savings:  {self.savings_bytes} bytes")
        lines.append(f"expanded at boot: {self.expanded_bytes} bytes")
        return '\n'.join(lines) + '\n'


def fit_report(compressed, catalog=None, stubs=None):
    catalog = catalog or default_catalog()
    stubs = {Algo(k): v for k, v in (stubs or DEFAULT_STUBS).items()}

    sections = [
        SectionReport(cs.section.name, cs.section.kind.value, cs.raw_bytes,
                      cs.algo.name if cs.algo is not None else STORE,
                      cs.compressed_bytes, cs.ratio, cs.expands)
        for cs in compressed.sections
    ]
    stub_overheads = {algo.name: stubs[algo] for algo in compressed.algos_used}
    total = sum(s.compressed_bytes for s in sections) + sum(stub_overheads.values())
    baseline = sum(s.raw_bytes for s in sections)
    expanded = sum(cs.raw_bytes for cs in compressed.sections if cs.algo is not None)

    report = FitReport(
        sections=sections,
        stub_overheads=stub_overheads,
        total_bytes=total,
        chosen_device=catalog.smallest_fit(total),
        savings_bytes=baseline - total,
        baseline_bytes=baseline,
        baseline_device=catalog.smallest_fit(baseline),
        expanded_bytes=expanded,
        catalog=[asdict(d) for d in catalog.devices],
    )
    logger.info("ROM total %d bytes (baseline %d): %s", total, baseline,
                report.chosen_device or "no device fits")
    return report
