"""
Lossless byte codecs: RLE, LZW, LZSS and LZAR.

Every encoder returns a Codestream; every decoder takes one and checks the
decoded bytes against the stream's length and CRC before returning them.

Formats
  RLE   (count 1..255, value) byte pairs, maximal runs split at 255.
  LZW   9..12-bit codes, MSB first. 256 = CLEAR, 257 = END. Code width is
        min(12, bit_length(258 + codes written since the last CLEAR)).
        CLEAR is re-sent when the dictionary reaches 4096 entries.
  LZSS  4096-byte zero-filled ring, matches of 3..18 bytes. Groups of up to
        8 tokens behind a control byte (bit k set: token k is a literal).
        A match is two bytes: (offset-1) >> 4, ((offset-1) & 0xF) << 4 | length-3.
  LZAR  the LZSS token stream through an adaptive order-0 arithmetic coder
        over 272 symbols (256 literals, 16 match lengths). An offset is sent as
        the bit length of offset-1 through a second adaptive model over 13
        classes, then the bits below its leading one, uniformly.
"""

import itertools
import logging
from collections import defaultdict
from typing import NamedTuple

from bitstring import Bits, ConstBitStream, ReadError

from container import Algo, make_codestream
from errors import CorruptStream

logger = logging.getLogger(__name__)


class BitWriter:
    """Packs variable-width values most-significant-bit first"""

    def __init__(self):
        self.chunks = []

    def write(self, value, width):
        self.chunks.append(Bits(uint=value, length=width))

    def getvalue(self):
        return Bits().join(self.chunks).tobytes()


class BitReader:
    """Reads values written by BitWriter"""

    def __init__(self, data):
        self.stream = ConstBitStream(bytes(data))

    def read(self, width):
        try:
            return self.stream.read(f'uint:{width}')
        except ReadError:
            raise CorruptStream("bit stream ended early") from None

    def read_bit_or_zero(self):
        """Next bit, or 0 once the data is exhausted"""
        if self.stream.pos >= self.stream.len:
            return 0
        return self.stream.read('uint:1')

    def exhausted_cleanly(self):
        """True when only zero padding bits remain"""
        rest = self.stream.len - self.stream.pos
        return rest < 8 and (rest == 0 or self.stream.peek(f'uint:{rest}') == 0)


def _expect(c, algo):
    if c.algo != algo:
        raise CorruptStream(f"expected a {algo.name} stream, got {c.algo.name}")


# RLE

def _rle_pack(data):
    out = bytearray()
    for value, run in itertools.groupby(data):
        count = sum(1 for _ in run)
        while count > 0:
            chunk = min(count, 255)
            out.append(chunk)
            out.append(value)
            count -= chunk
    return bytes(out)


def _rle_unpack(payload, original_len):
    if len(payload) % 2:
        raise CorruptStream("RLE payload has odd length")
    out = bytearray()
    for i in range(0, len(payload), 2):
        count, value = payload[i], payload[i + 1]
        if count == 0:
            raise CorruptStream("RLE run of zero length")
        out += bytes([value]) * count
    if len(out) != original_len:
        raise CorruptStream(f"RLE decoded {len(out)} bytes, expected {original_len}")
    return bytes(out)


def rle_encode(data):
    data = bytes(data)
    return make_codestream(Algo.RLE, _rle_pack(data), len(data), source=data)


def rle_decode(c):
    _expect(c, Algo.RLE)
    data = _rle_unpack(c.payload, c.original_len)
    c.verify_source(data)
    if _rle_pack(data) != c.payload:
        raise CorruptStream("RLE runs are not maximal")
    return data


# LZW

LZW_CLEAR = 256
LZW_END = 257
LZW_FIRST_CODE = 258
LZW_MAX_BITS = 12
LZW_MAX_ENTRIES = 1 << LZW_MAX_BITS


def _lzw_width(written):
    return min(LZW_MAX_BITS, (LZW_FIRST_CODE + written).bit_length())


def _lzw_pack(data):
    writer = BitWriter()
    table = {}
    next_code = LZW_FIRST_CODE
    written = 0
    writer.write(LZW_CLEAR, _lzw_width(written))

    w = -1
    for byte in data:
        if w < 0:
            w = byte
            continue
        key = (w << 8) | byte
        code = table.get(key)
        if code is not None:
            w = code
            continue
        writer.write(w, _lzw_width(written))
        written += 1
        table[key] = next_code
        next_code += 1
        w = byte
        if next_code == LZW_MAX_ENTRIES:
            writer.write(LZW_CLEAR, _lzw_width(written))
            table.clear()
            next_code = LZW_FIRST_CODE
            written = 0

    if w >= 0:
        writer.write(w, _lzw_width(written))
        written += 1
    writer.write(LZW_END, _lzw_width(written))
    return writer.getvalue()


def _fresh_lzw_entries():
    return [bytes([i]) for i in range(256)] + [b'', b'']


def _lzw_unpack(payload, trace=None):
    """Expand an LZW payload; `trace` collects (code, dictionary size) pairs"""
    reader = BitReader(payload)
    if reader.read(_lzw_width(0)) != LZW_CLEAR:
        raise CorruptStream("LZW stream must start with CLEAR")

    entries = _fresh_lzw_entries()
    written = 0
    prev = None
    out = bytearray()
    while True:
        code = reader.read(_lzw_width(written))
        if trace is not None:
            trace.append((code, len(entries)))
        if code == LZW_CLEAR:
            entries = _fresh_lzw_entries()
            written = 0
            prev = None
            continue
        if code == LZW_END:
            break

        next_code = len(entries)
        if prev is None:
            if code >= 256:
                raise CorruptStream(f"LZW code {code} cannot follow CLEAR")
            entry = entries[code]
        else:
            if code < next_code:
                entry = entries[code]
            elif code == next_code:
                entry = prev + prev[:1]
            else:
                raise CorruptStream(f"LZW code {code} is beyond the dictionary ({next_code})")
            if next_code >= LZW_MAX_ENTRIES:
                raise CorruptStream("LZW dictionary overflow without CLEAR")
            entries.append(prev + entry[:1])
        out += entry
        prev = entry
        written += 1

    if not reader.exhausted_cleanly():
        raise CorruptStream("LZW stream has data after END")
    return bytes(out)


def lzw_encode(data):
    data = bytes(data)
    return make_codestream(Algo.LZW, _lzw_pack(data), len(data), source=data)


def lzw_decode(c):
    _expect(c, Algo.LZW)
    data = _lzw_unpack(c.payload)
    if len(data) != c.original_len:
        raise CorruptStream(f"LZW decoded {len(data)} bytes, expected {c.original_len}")
    c.verify_source(data)
    if _lzw_pack(data) != c.payload:
        raise CorruptStream("LZW stream is not the canonical encoding of its output")
    return data


def lzw_compress_bytes(data):
    """Bare LZW payload, for coders that embed it in their own payload"""
    return _lzw_pack(bytes(data))


def lzw_expand_bytes(payload):
    return _lzw_unpack(bytes(payload))


def lzw_code_trace(payload):
    """(code, dictionary size when read) for every code in an LZW payload"""
    trace = []
    _lzw_unpack(bytes(payload), trace)
    return trace


# LZSS

LZSS_WINDOW = 4096
LZSS_MIN_MATCH = 3
LZSS_MAX_MATCH = 18


class Literal(NamedTuple):
    value: int


class Match(NamedTuple):
    offset: int
    length: int


def lzss_tokenize(data):
    """Greedy longest match against a zero-filled window, ties to the smallest offset"""
    buf = bytes(LZSS_WINDOW) + bytes(data)
    n = len(buf)
    chains = defaultdict(list)
    # window starts below WINDOW - MAX_MATCH see only zeros within a match
    # and lose every tie to the one at WINDOW - MAX_MATCH
    inserted = LZSS_WINDOW - LZSS_MAX_MATCH
    tokens = []

    p = LZSS_WINDOW
    while p < n:
        while inserted < p and inserted + LZSS_MIN_MATCH <= n:
            chains[buf[inserted:inserted + LZSS_MIN_MATCH]].append(inserted)
            inserted += 1

        max_len = min(LZSS_MAX_MATCH, n - p)
        best_len, best_offset = 0, 0
        if max_len >= LZSS_MIN_MATCH:
            lowest = p - LZSS_WINDOW
            for q in reversed(chains.get(buf[p:p + LZSS_MIN_MATCH], ())):
                if q < lowest:
                    break
                length = LZSS_MIN_MATCH
                while length < max_len and buf[q + length] == buf[p + length]:
                    length += 1
                if length > best_len:
                    best_len, best_offset = length, p - q
                    if length == max_len:
                        break

        if best_len >= LZSS_MIN_MATCH:
            tokens.append(Match(best_offset, best_len))
            p += best_len
        else:
            tokens.append(Literal(buf[p]))
            p += 1
    return tokens


def _lzss_serialize(tokens):
    out = bytearray()
    for start in range(0, len(tokens), 8):
        control = 0
        body = bytearray()
        for k, token in enumerate(tokens[start:start + 8]):
            if isinstance(token, Literal):
                control |= 1 << k
                body.append(token.value)
            else:
                raw = token.offset - 1
                body.append(raw >> 4)
                body.append(((raw & 0xF) << 4) | (token.length - LZSS_MIN_MATCH))
        out.append(control)
        out += body
    return bytes(out)


def _copy_match(buf, offset, length):
    start = len(buf) - offset
    for j in range(length):
        buf.append(buf[start + j])


def _lzss_unpack(payload, original_len):
    buf = bytearray(LZSS_WINDOW)
    target = LZSS_WINDOW + original_len
    pos = 0
    while len(buf) < target:
        if pos >= len(payload):
            raise CorruptStream("LZSS token group truncated")
        control = payload[pos]
        pos += 1
        for k in range(8):
            if len(buf) == target:
                if control >> k:
                    raise CorruptStream("LZSS control byte flags tokens past the end")
                break
            if control & (1 << k):
                if pos >= len(payload):
                    raise CorruptStream("LZSS literal truncated")
                buf.append(payload[pos])
                pos += 1
            else:
                if pos + 2 > len(payload):
                    raise CorruptStream("LZSS match truncated")
                raw = (payload[pos] << 4) | (payload[pos + 1] >> 4)
                length = (payload[pos + 1] & 0xF) + LZSS_MIN_MATCH
                pos += 2
                if len(buf) + length > target:
                    raise CorruptStream("LZSS match runs past the original length")
                _copy_match(buf, raw + 1, length)
    if pos != len(payload):
        raise CorruptStream("LZSS payload has trailing bytes")
    return bytes(buf[LZSS_WINDOW:])


def _lzss_pack(data):
    return _lzss_serialize(lzss_tokenize(data))


def lzss_encode(data):
    data = bytes(data)
    tokens = lzss_tokenize(data)
    logger.debug("lzss: %d bytes -> %d tokens", len(data), len(tokens))
    return make_codestream(Algo.LZSS, _lzss_serialize(tokens), len(data), source=data)


def lzss_decode(c):
    _expect(c, Algo.LZSS)
    data = _lzss_unpack(c.payload, c.original_len)
    c.verify_source(data)
    if _lzss_pack(data) != c.payload:
        raise CorruptStream("LZSS stream is not the canonical encoding of its output")
    return data


# LZAR: adaptive arithmetic coding of the LZSS tokens

LZAR_SYMBOLS = 256 + (LZSS_MAX_MATCH - LZSS_MIN_MATCH + 1)  # 272
LZAR_INCREMENT = 32
LZAR_LIMIT = 1 << 14

CODE_BITS = 32
FULL = (1 << CODE_BITS) - 1
HALF = 1 << (CODE_BITS - 1)
QUARTER = 1 << (CODE_BITS - 2)
THREE_QUARTERS = 3 * QUARTER


class FrequencyModel:
    """Adaptive order-0 frequencies over a Fenwick tree"""

    def __init__(self, size, increment=LZAR_INCREMENT, limit=LZAR_LIMIT):
        self.size = size
        self.increment = increment
        self.limit = limit
        self.freq = [1] * size
        self._rebuild()

    def _rebuild(self):
        tree = [0] * (self.size + 1)
        for i, f in enumerate(self.freq):
            j = i + 1
            tree[j] += f
            parent = j + (j & -j)
            if parent <= self.size:
                tree[parent] += tree[j]
        self.tree = tree
        self.total = sum(self.freq)

    def cumulative(self, symbol):
        j, s = symbol, 0
        while j > 0:
            s += self.tree[j]
            j -= j & -j
        return s

    def interval(self, symbol):
        low = self.cumulative(symbol)
        return low, low + self.freq[symbol]

    def find(self, target):
        """Symbol whose interval contains target"""
        pos, rest = 0, target
        step = 1 << (self.size.bit_length() - 1)
        while step:
            nxt = pos + step
            if nxt <= self.size and self.tree[nxt] <= rest:
                pos = nxt
                rest -= self.tree[nxt]
            step >>= 1
        return pos

    def update(self, symbol):
        self.freq[symbol] += self.increment
        j = symbol + 1
        while j <= self.size:
            self.tree[j] += self.increment
            j += j & -j
        self.total += self.increment
        if self.total > self.limit:
            self.freq = [(f + 1) // 2 for f in self.freq]
            self._rebuild()


class ArithmeticEncoder:
    """32-bit Witten-Neal-Cleary coder; pending bits carry unresolved straddles"""

    def __init__(self):
        self.low = 0
        self.high = FULL
        self.pending = 0
        self.bits = BitWriter()

    def _emit(self, bit):
        # the bit, then `pending` copies of its complement
        tail = 0 if bit else (1 << self.pending) - 1
        self.bits.write((bit << self.pending) | tail, self.pending + 1)
        self.pending = 0

    def encode(self, low_count, high_count, total):
        span = self.high - self.low + 1
        self.high = self.low + span * high_count // total - 1
        self.low = self.low + span * low_count // total
        while True:
            if self.high < HALF:
                self._emit(0)
            elif self.low >= HALF:
                self._emit(1)
                self.low -= HALF
                self.high -= HALF
            elif self.low >= QUARTER and self.high < THREE_QUARTERS:
                self.pending += 1
                self.low -= QUARTER
                self.high -= QUARTER
            else:
                break
            self.low <<= 1
            self.high = (self.high << 1) | 1

    def finish(self):
        self.pending += 1
        self._emit(0 if self.low < QUARTER else 1)
        return self.bits.getvalue()


class ArithmeticDecoder:

    def __init__(self, data):
        self.reader = BitReader(data)
        self.low = 0
        self.high = FULL
        self.value = 0
        for _ in range(CODE_BITS):
            self.value = (self.value << 1) | self.reader.read_bit_or_zero()

    def target(self, total):
        span = self.high - self.low + 1
        t = ((self.value - self.low + 1) * total - 1) // span
        if not 0 <= t < total:
            raise CorruptStream("arithmetic decoder lost synchronization")
        return t

    def consume(self, low_count, high_count, total):
        span = self.high - self.low + 1
        self.high = self.low + span * high_count // total - 1
        self.low = self.low + span * low_count // total
        while True:
            if self.high < HALF:
                pass
            elif self.low >= HALF:
                self.low -= HALF
                self.high -= HALF
                self.value -= HALF
            elif self.low >= QUARTER and self.high < THREE_QUARTERS:
                self.low -= QUARTER
                self.high -= QUARTER
                self.value -= QUARTER
            else:
                break
            self.low <<= 1
            self.high = (self.high << 1) | 1
            self.value = (self.value << 1) | self.reader.read_bit_or_zero()


LZAR_OFFSET_CLASSES = LZSS_WINDOW.bit_length()  # 13


def _offset_class(offset):
    """Bit length of offset - 1, and the bits below its leading one"""
    raw = offset - 1
    cls = raw.bit_length()
    if cls < 2:
        return cls, 0, 1
    span = 1 << (cls - 1)
    return cls, raw - span, span


def _class_offset(cls, low_bits):
    if cls < 2:
        return cls + 1
    return (1 << (cls - 1)) + low_bits + 1


def _lzar_pack(data):
    model = FrequencyModel(LZAR_SYMBOLS)
    classes = FrequencyModel(LZAR_OFFSET_CLASSES)
    encoder = ArithmeticEncoder()
    for token in lzss_tokenize(data):
        if isinstance(token, Literal):
            symbol = token.value
        else:
            symbol = 256 + token.length - LZSS_MIN_MATCH
        low, high = model.interval(symbol)
        encoder.encode(low, high, model.total)
        model.update(symbol)
        if isinstance(token, Match):
            cls, low_bits, span = _offset_class(token.offset)
            low, high = classes.interval(cls)
            encoder.encode(low, high, classes.total)
            classes.update(cls)
            if span > 1:
                encoder.encode(low_bits, low_bits + 1, span)
    return encoder.finish()


def _lzar_unpack(payload, original_len):
    model = FrequencyModel(LZAR_SYMBOLS)
    classes = FrequencyModel(LZAR_OFFSET_CLASSES)
    decoder = ArithmeticDecoder(payload)
    buf = bytearray(LZSS_WINDOW)
    target = LZSS_WINDOW + original_len
    while len(buf) < target:
        total = model.total
        symbol = model.find(decoder.target(total))
        if symbol >= LZAR_SYMBOLS:
            raise CorruptStream("LZAR symbol out of range")
        low, high = model.interval(symbol)
        decoder.consume(low, high, total)
        model.update(symbol)
        if symbol < 256:
            buf.append(symbol)
            continue
        length = symbol - 256 + LZSS_MIN_MATCH

        total = classes.total
        cls = classes.find(decoder.target(total))
        if cls >= LZAR_OFFSET_CLASSES:
            raise CorruptStream("LZAR offset class out of range")
        low, high = classes.interval(cls)
        decoder.consume(low, high, total)
        classes.update(cls)
        low_bits = 0
        if cls >= 2:
            span = 1 << (cls - 1)
            low_bits = decoder.target(span)
            decoder.consume(low_bits, low_bits + 1, span)
        if len(buf) + length > target:
            raise CorruptStream("LZAR match runs past the original length")
        _copy_match(buf, _class_offset(cls, low_bits), length)
    return bytes(buf[LZSS_WINDOW:])


def lzar_encode(data):
    data = bytes(data)
    return make_codestream(Algo.LZAR, _lzar_pack(data), len(data), source=data)


def lzar_decode(c):
    _expect(c, Algo.LZAR)
    data = _lzar_unpack(c.payload, c.original_len)
    c.verify_source(data)
    if _lzar_pack(data) != c.payload:
        raise CorruptStream("LZAR stream is not the canonical encoding of its output")
    return data


# Dispatch

ENCODERS = {
    Algo.RLE: rle_encode,
    Algo.LZW: lzw_encode,
    Algo.LZSS: lzss_encode,
    Algo.LZAR: lzar_encode,
}

DECODERS = {
    Algo.RLE: rle_decode,
    Algo.LZW: lzw_decode,
    Algo.LZSS: lzss_decode,
    Algo.LZAR: lzar_decode,
}

_PACKERS = {
    Algo.RLE: _rle_pack,
    Algo.LZW: _lzw_pack,
    Algo.LZSS: _lzss_pack,
    Algo.LZAR: _lzar_pack,
}

LOSSLESS_ALGOS = tuple(ENCODERS)


def encode(algo, data):
    return ENCODERS[Algo(algo)](data)


def decode(c):
    try:
        decoder = DECODERS[c.algo]
    except KeyError:
        raise CorruptStream(f"{c.algo.name} is not a byte codec") from None
    return decoder(c)


def compress_payload(algo, data):
    """Bare payload of a byte codec, without container or CRC"""
    return _PACKERS[Algo(algo)](bytes(data))


def expand_payload(algo, payload, original_len):
    algo = Algo(algo)
    if algo is Algo.RLE:
        return _rle_unpack(payload, original_len)
    if algo is Algo.LZW:
        data = _lzw_unpack(payload)
        if len(data) != original_len:
            raise CorruptStream(f"LZW decoded {len(data)} bytes, expected {original_len}")
        return data
    if algo is Algo.LZSS:
        return _lzss_unpack(payload, original_len)
    if algo is Algo.LZAR:
        return _lzar_unpack(payload, original_len)
    raise CorruptStream(f"{algo.name} is not a byte codec")


def compare_codecs(data, algos=LOSSLESS_ALGOS):
    """Payload size and ratio of each byte codec on the same input"""
    data = bytes(data)
    rows = []
    for algo in algos:
        payload = compress_payload(algo, data)
        rows.append({
            'algo': Algo(algo).name,
            'original_bytes': len(data),
            'payload_bytes': len(payload),
            'ratio': len(data) / len(payload) if payload else float('inf'),
        })
    return rows
