"""
The SQZ1 compressed container.

Layout, little-endian, 28-byte header then payload:

    offset  size  field
    0       4     magic "SQZ1" (0x53 0x51 0x5A 0x31)
    4       1     version (1)
    5       1     algo
    6       1     flags (bit0 = lossy)
    7       1     reserved (0)
    8       8     original_len
    16      4     integrity, CRC-32 of the source (lossless) or payload (lossy)
    20      8     payload_len
    28      ...   payload
"""

import logging
import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum

from errors import (
    BadMagic,
    ChecksumMismatch,
    TruncatedContainer,
    UnsupportedVersion,
)

logger = logging.getLogger(__name__)

MAGIC = b"SQZ1"
VERSION = 1
FLAG_LOSSY = 0x01

_HEADER = struct.Struct("<4sBBBBQIQ")
HEADER_SIZE = _HEADER.size  # 28


class Algo(IntEnum):
    RLE = 0
    LZW = 1
    LZSS = 2
    LZAR = 3
    PREDICTIVE = 4
    WAVELET = 5
    HYBRID = 6

    @property
    def lossy(self):
        return self in (Algo.WAVELET, Algo.HYBRID)

    @classmethod
    def parse(cls, name):
        try:
            return cls[str(name).upper()]
        except KeyError:
            raise ValueError(f"unknown algorithm {name!r}") from None


def crc32(data):
    """CRC-32, polynomial 0x04C11DB7 reflected, init and final xor 0xFFFFFFFF"""
    return zlib.crc32(data) & 0xFFFFFFFF


@dataclass(frozen=True)
class Codestream:
    algo: Algo
    flags: int
    original_len: int
    integrity: int
    payload: bytes

    def __post_init__(self):
        object.__setattr__(self, 'algo', Algo(self.algo))
        object.__setattr__(self, 'payload', bytes(self.payload))
        if bool(self.flags & FLAG_LOSSY) != self.algo.lossy:
            raise ValueError(f"lossy flag does not match algorithm {self.algo.name}")

    @property
    def lossy(self):
        return bool(self.flags & FLAG_LOSSY)

    def to_bytes(self):
        header = _HEADER.pack(MAGIC, VERSION, int(self.algo), self.flags, 0,
                              self.original_len, self.integrity, len(self.payload))
        return header + self.payload

    def verify_source(self, data):
        """Check decoded bytes of a lossless stream against length and CRC"""
        if len(data) != self.original_len or crc32(data) != self.integrity:
            raise ChecksumMismatch(
                f"{self.algo.name} stream does not reproduce its source "
                f"({len(data)} of {self.original_len} bytes)"
            )


def make_codestream(algo, payload, original_len, source=None):
    """Build a Codestream, choosing the integrity field by the algorithm's lossiness"""
    algo = Algo(algo)
    if algo.lossy:
        return Codestream(algo, FLAG_LOSSY, original_len, crc32(payload), payload)
    if source is None:
        raise ValueError("lossless streams need the source bytes for their CRC")
    return Codestream(algo, 0, original_len, crc32(source), payload)


def wrap(algo, flags, original, payload):
    algo = Algo(algo)
    integrity = crc32(payload) if algo.lossy else crc32(original)
    return Codestream(algo, flags, len(original), integrity, payload).to_bytes()


def unwrap(blob):
    blob = bytes(blob)
    if len(blob) < HEADER_SIZE:
        if blob[:len(MAGIC)] != MAGIC[:len(blob)]:
            raise BadMagic("not an SQZ1 container")
        raise TruncatedContainer(f"{len(blob)} bytes is shorter than the header")

    magic, version, algo, flags, _reserved, original_len, integrity, payload_len = \
        _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagic("not an SQZ1 container")
    if version != VERSION:
        raise UnsupportedVersion(f"container version {version} is not supported")
    if len(blob) != HEADER_SIZE + payload_len:
        raise TruncatedContainer(
            f"payload is {len(blob) - HEADER_SIZE} bytes, header says {payload_len}"
        )
    try:
        algo = Algo(algo)
    except ValueError:
        raise UnsupportedVersion(f"unknown algorithm id {algo}") from None
    if bool(flags & FLAG_LOSSY) != algo.lossy:
        raise ChecksumMismatch("lossy flag disagrees with the algorithm")

    payload = blob[HEADER_SIZE:]
    if algo.lossy and crc32(payload) != integrity:
        raise ChecksumMismatch(f"{algo.name} payload CRC mismatch")
    logger.debug("unwrapped %s container, %d payload bytes", algo.name, payload_len)
    return Codestream(algo, flags, original_len, integrity, payload)
