"""Bit-exact packet construction, flitization and parsing.

Wire layout of the 8-bit header (MSB first)::

    7 6 5 | 4 3  | 2 1 0
      id  | port | int_length

Flit-switched packets are ``header, body..., tail`` where the tail word is the
constant ``0xFF``.  Header and tail are 8-bit patterns zero-extended to the
flit width.  Packet-switched (version 1) words are a single atomic word with
the header in the top byte and the data field below it.
"""

from __future__ import annotations

import enum
import numbers
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

FLIT_WIDTHS = (8, 16, 32, 64)
HEADER_BITS = 8
TAIL = 0xFF

ID_BITS, PORT_BITS, INT_LENGTH_BITS = 3, 2, 3
MAX_ID = (1 << ID_BITS) - 1
MAX_PORT = (1 << PORT_BITS) - 1
MAX_INT_LENGTH = (1 << INT_LENGTH_BITS) - 1

V1_WIDTH = 24
V1_DATA_BITS = V1_WIDTH - HEADER_BITS


class CodecError(ValueError):
    """Raised for malformed headers, packets or flit sequences."""


class FlitKind(enum.Enum):
    HEADER = "header"
    BODY = "body"
    TAIL = "tail"


@dataclass(frozen=True)
class Header:
    id: int = 0
    port: int = 0
    int_length: int = 0

    def encode(self) -> int:
        return encode_header(self)


@dataclass(frozen=True)
class Packet:
    """A header plus an ``n_bits`` payload held MSB-first in an int."""

    header: Header
    payload: int
    n_bits: int

    def __post_init__(self):
        if self.n_bits < 1:
            raise CodecError(f"payload length must be >= 1 bit, got {self.n_bits}")
        if not 0 <= self.payload < (1 << self.n_bits):
            raise CodecError(f"payload does not fit in {self.n_bits} bits")

    @property
    def tail(self) -> int:
        return TAIL


@dataclass(frozen=True, slots=True)
class Flit:
    kind: FlitKind
    word: int
    packet_id: int = 0
    seq: int = 0
    # version-1 words are switched whole: a header that also closes the packet
    atomic: bool = False

    @property
    def opens(self) -> bool:
        return self.kind is FlitKind.HEADER

    @property
    def closes(self) -> bool:
        return self.kind is FlitKind.TAIL or self.atomic


def check_flit_width(w: int) -> int:
    if w not in FLIT_WIDTHS:
        raise CodecError(f"flit width must be one of {FLIT_WIDTHS}, got {w!r}")
    return w


def _check_field(name: str, value: int, max_value: int) -> None:
    if not isinstance(value, numbers.Integral) or not 0 <= value <= max_value:
        raise CodecError(f"header field {name}={value!r} out of range (max {max_value})")


def encode_header(h: Header) -> int:
    _check_field("id", h.id, MAX_ID)
    _check_field("port", h.port, MAX_PORT)
    _check_field("int_length", h.int_length, MAX_INT_LENGTH)
    byte = (int(h.id) << 5) | (int(h.port) << 3) | int(h.int_length)
    if byte == TAIL:
        raise CodecError("header id=7, port=3, int_length=7 encodes to 0xFF, "
                         "which is reserved for the tail flit")
    return byte


def decode_header(w: int) -> Header:
    if not 0 <= w <= 0xFF:
        raise CodecError(f"header word {w:#x} wider than 8 bits")
    if w == TAIL:
        raise CodecError("0xFF is the tail sentinel, not a header")
    return Header(id=w >> 5, port=(w >> 3) & MAX_PORT, int_length=w & MAX_INT_LENGTH)


def body_count(n_bits: int, w: int) -> int:
    return -(-n_bits // w)


def flit_count(n_bits: int, w: int) -> int:
    """Header + ceil(n_bits / w) body flits + tail."""
    if n_bits < 1:
        raise CodecError("payload length must be >= 1 bit")
    return 2 + body_count(n_bits, check_flit_width(w))


def flitize(p: Packet, w: int, packet_id: int = 0) -> list[Flit]:
    check_flit_width(w)
    nb = body_count(p.n_bits, w)
    padded = p.payload << (nb * w - p.n_bits)
    mask = (1 << w) - 1
    flits = [Flit(FlitKind.HEADER, encode_header(p.header), packet_id, 0)]
    for i in range(nb):
        word = (padded >> ((nb - 1 - i) * w)) & mask
        flits.append(Flit(FlitKind.BODY, word, packet_id, i + 1))
    flits.append(Flit(FlitKind.TAIL, TAIL, packet_id, nb + 1))
    return flits


def deflitize(flits: Sequence[Flit], w: int, n_bits: int | Mapping[int, int]) -> Packet:
    """Reassemble a packet.

    ``n_bits`` is the payload length, either directly or as a mapping from
    header id to declared length (the wire does not carry it).
    """
    check_flit_width(w)
    if len(flits) < 3:
        raise CodecError(f"sequence of {len(flits)} flits is too short "
                         "(need header, body, tail)")
    first, last = flits[0], flits[-1]
    if first.kind is not FlitKind.HEADER:
        raise CodecError(f"first flit is {first.kind.value}, expected header")
    if last.kind is not FlitKind.TAIL:
        raise CodecError(f"last flit is {last.kind.value}, expected tail (missing tail)")
    pid = first.packet_id
    for i, f in enumerate(flits):
        if f.packet_id != pid:
            raise CodecError(f"flit {i} belongs to packet {f.packet_id}, "
                             f"interleaved into packet {pid}")
        if 0 < i < len(flits) - 1 and f.kind is not FlitKind.BODY:
            raise CodecError(f"flit {i} is {f.kind.value} inside the body")
    if last.word != TAIL:
        raise CodecError(f"tail word {last.word:#x} != 0xFF")
    header = decode_header(first.word)
    if isinstance(n_bits, Mapping):
        try:
            n = n_bits[header.id]
        except KeyError:
            raise CodecError(f"no declared payload length for data id {header.id}") from None
    else:
        n = n_bits
    body = flits[1:-1]
    nb = body_count(n, w)
    if len(body) != nb:
        raise CodecError(f"{len(body)} body flits, expected {nb} for {n} bits at width {w}")
    acc = 0
    for f in body:
        if not 0 <= f.word < (1 << w):
            raise CodecError(f"body word {f.word:#x} wider than {w} bits")
        acc = (acc << w) | f.word
    pad = nb * w - n
    if acc & ((1 << pad) - 1):
        raise CodecError("nonzero padding bits in the last body flit")
    return Packet(header, acc >> pad, n)


# -- version 1: atomic words ---------------------------------------------------

def encode_word(header: Header, data: int, width: int = V1_WIDTH) -> int:
    data_bits = width - HEADER_BITS
    if data_bits < 1:
        raise CodecError(f"packet width {width} leaves no room for data")
    if not 0 <= data < (1 << data_bits):
        raise CodecError(f"data {data:#x} does not fit in {data_bits} bits")
    return (encode_header(header) << data_bits) | data


def decode_word(word: int, width: int = V1_WIDTH) -> tuple[Header, int]:
    data_bits = width - HEADER_BITS
    if not 0 <= word < (1 << width):
        raise CodecError(f"word {word:#x} wider than {width} bits")
    return decode_header(word >> data_bits), word & ((1 << data_bits) - 1)


def encode_v1(header: Header, data16: int) -> int:
    return encode_word(header, data16, V1_WIDTH)


def decode_v1(word: int) -> tuple[Header, int]:
    return decode_word(word, V1_WIDTH)


def fragment_count(n_bits: int, width: int) -> int:
    return body_count(n_bits, width - HEADER_BITS)


def fragment(p: Packet, width: int, first_id: int = 0) -> list[Flit]:
    """Split a payload over atomic ``width``-bit words, one header per word.

    Consecutive words get consecutive packet ids starting at ``first_id``.
    The last data field is zero-padded in its low bits.
    """
    data_bits = width - HEADER_BITS
    nb = fragment_count(p.n_bits, width)
    padded = p.payload << (nb * data_bits - p.n_bits)
    mask = (1 << data_bits) - 1
    return [
        Flit(FlitKind.HEADER,
             encode_word(p.header, (padded >> ((nb - 1 - i) * data_bits)) & mask, width),
             first_id + i, 0, atomic=True)
        for i in range(nb)
    ]


def defragment(words: Sequence[int], width: int, n_bits: int) -> Packet:
    data_bits = width - HEADER_BITS
    if len(words) != fragment_count(n_bits, width):
        raise CodecError(f"{len(words)} words, expected {fragment_count(n_bits, width)}")
    header = None
    acc = 0
    for word in words:
        h, data = decode_word(word, width)
        if header is not None and h != header:
            raise CodecError("fragments carry different headers")
        header = h
        acc = (acc << data_bits) | data
    pad = len(words) * data_bits - n_bits
    if acc & ((1 << pad) - 1):
        raise CodecError("nonzero padding bits in the last fragment")
    return Packet(header, acc >> pad, n_bits)


# -- debug text ---------------------------------------------------------------

def format_flits(flits: Iterable[Flit], w: int) -> str:
    digits = -(-w // 4)
    return "".join(f"{f.kind.value}:{f.word:0{digits}x}\n" for f in flits)


def parse_flits(text: str, packet_id: int = 0) -> list[Flit]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        kind, sep, word = line.partition(":")
        if not sep:
            raise CodecError(f"line {lineno}: expected '<kind>:<hex word>'")
        try:
            out.append(Flit(FlitKind(kind), int(word, 16), packet_id, len(out)))
        except ValueError as exc:
            raise CodecError(f"line {lineno}: {exc}") from None
    return out
