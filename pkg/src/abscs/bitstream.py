"""Bit-exact serialization of encoded frames (``.acsf`` files).

Layout: a 30-octet big-endian header followed by the payload, MSB first::

    magic "ACSF" | version u8 | scheme u8 | m u32 | n u32 | k u32 |
    total_bits u32 | codebook_id 8 octets

The payload holds, in order, the 2 flag bits (adaptive frames), the support
positions (support-set payloads) and one index per channel at its allocated
width, then zero bits up to ``total_bits`` and up to the next octet.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

from .codebook import CodebookBank
from .model import InvalidParameterError
from .quantizers import (
    ADAPTIVE_CANDIDATES,
    FLAG_BITS,
    EncodedFrame,
    Scheme,
    frame_layout,
)

MAGIC = b"ACSF"
VERSION = 1
_HEADER = struct.Struct(">4sBBIIII8s")
HEADER_SIZE = _HEADER.size

SCHEME_CODES = {
    Scheme.NN: 0,
    Scheme.ABS_SEQ: 1,
    Scheme.ABS_NONSEQ: 2,
    Scheme.JOINT: 3,
    Scheme.DIRECT: 4,
    Scheme.SUPPORT_SET: 5,
    Scheme.ADAPTIVE: 6,
}
_SCHEMES_BY_CODE = {v: k for k, v in SCHEME_CODES.items()}


class InvalidFrameError(ValueError):
    """Frame cannot be serialized as given."""


class CorruptStreamError(ValueError):
    """Octet stream is not a valid frame; ``offset`` is the octet where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at octet {offset})")
        self.offset = offset


class CodebookMismatchError(ValueError):
    """Frame was encoded with different codebooks than the ones supplied."""


@dataclass(frozen=True)
class FrameHeader:
    scheme: Scheme
    m: int
    n: int
    k: int
    total_bits: int
    codebook_id: bytes = bytes(8)
    version: int = VERSION
    magic: bytes = MAGIC

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if min(self.m, self.n, self.k) <= 0 or self.total_bits < 0:
            raise InvalidParameterError("header counts must be positive")
        if len(self.codebook_id) != 8:
            raise InvalidParameterError("codebook_id must be 8 octets")

    def pack(self) -> bytes:
        return _HEADER.pack(
            self.magic, self.version, SCHEME_CODES[self.scheme],
            self.m, self.n, self.k, self.total_bits, bytes(self.codebook_id),
        )


class _BitWriter:
    def __init__(self):
        self.value = 0
        self.length = 0

    def write(self, v: int, width: int):
        if width == 0:
            return
        if not 0 <= v < (1 << width):
            raise InvalidFrameError(f"value {v} does not fit in {width} bits")
        self.value = (self.value << width) | v
        self.length += width

    def to_bytes(self) -> bytes:
        pad = -self.length % 8
        return (self.value << pad).to_bytes((self.length + pad) // 8, "big")


class _BitReader:
    def __init__(self, data: bytes, n_bits: int):
        self.value = int.from_bytes(data, "big")
        self.total = len(data) * 8
        self.limit = n_bits
        self.pos = 0

    def read(self, width: int) -> int:
        if width == 0:
            return 0
        if self.pos + width > self.limit:
            raise CorruptStreamError("payload shorter than its layout", HEADER_SIZE + self.pos // 8)
        shift = self.total - self.pos - width
        self.pos += width
        return (self.value >> shift) & ((1 << width) - 1)

    def rest_is_zero(self) -> bool:
        return self.value & ((1 << (self.total - self.pos)) - 1) == 0


def header_for(frame: EncodedFrame, m: int, n: int, k: int, bank: CodebookBank | None = None) -> FrameHeader:
    return FrameHeader(frame.scheme, m, n, k, frame.total_bits, bank.digest() if bank else bytes(8))


def pack_frame(frame: EncodedFrame, header: FrameHeader) -> bytes:
    if header.scheme is not frame.scheme or header.total_bits != frame.total_bits:
        raise InvalidFrameError("header does not describe this frame")
    try:
        layout = frame_layout(frame.scheme, header.m, header.n, header.k, header.total_bits, frame.flag_bits)
    except InvalidParameterError as exc:
        raise InvalidFrameError(str(exc)) from None
    if layout.allocation != frame.allocation or (
        frame.support_positions is not None and layout.position_bits != frame.position_bits
    ):
        raise InvalidFrameError("frame allocation disagrees with the header's layout")

    w = _BitWriter()
    if frame.flag_bits is not None:
        w.write(frame.flag_bits, FLAG_BITS)
    if frame.support_positions is not None:
        positions = list(frame.support_positions)
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise InvalidFrameError("support positions must be strictly increasing")
        if len(positions) > len(frame.indices) or any(not 0 <= p < header.m for p in positions):
            raise InvalidFrameError("support positions do not fit the frame")
        if frame.indices and not positions:
            raise InvalidFrameError("a support-set payload with slots needs at least one position")
        positions += [0] * (len(frame.indices) - len(positions))
        for p in positions:
            w.write(p, frame.position_bits)
    for b, i in zip(frame.allocation.per_entry_bits, frame.indices):
        w.write(i, b)
    w.write(0, frame.total_bits - w.length)
    return header.pack() + w.to_bytes()


def unpack_frame(data: bytes) -> tuple[FrameHeader, EncodedFrame]:
    data = bytes(data)
    if len(data) < HEADER_SIZE:
        raise CorruptStreamError("stream shorter than the frame header", len(data))
    magic, version, code, m, n, k, total, cb_id = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CorruptStreamError("bad magic", 0)
    if version != VERSION:
        raise CorruptStreamError(f"unsupported version {version}", 4)
    if code not in _SCHEMES_BY_CODE:
        raise CorruptStreamError(f"unknown scheme code {code}", 5)
    try:
        header = FrameHeader(_SCHEMES_BY_CODE[code], m, n, k, total, cb_id)
    except InvalidParameterError as exc:
        raise CorruptStreamError(str(exc), 6) from None
    need = HEADER_SIZE + (total + 7) // 8
    if len(data) < need:
        raise CorruptStreamError(f"truncated payload: {len(data)} of {need} octets", len(data))
    if len(data) > need:
        raise CorruptStreamError("trailing octets after payload", need)

    r = _BitReader(data[HEADER_SIZE:], total)
    flag = None
    if header.scheme is Scheme.ADAPTIVE:
        flag = r.read(FLAG_BITS)
        if flag >= len(ADAPTIVE_CANDIDATES):
            raise CorruptStreamError("bad adaptive flag", HEADER_SIZE)
    try:
        layout = frame_layout(header.scheme, m, n, k, total, flag)
    except InvalidParameterError as exc:
        raise CorruptStreamError(str(exc), HEADER_SIZE) from None
    payload_scheme = ADAPTIVE_CANDIDATES[flag] if flag is not None else header.scheme

    positions = None
    if payload_scheme is Scheme.SUPPORT_SET:
        raw = [r.read(layout.position_bits) for _ in range(len(layout.allocation))]
        positions = []
        for p in raw:
            if positions and p <= positions[-1]:
                break
            positions.append(p)
        if raw and any(p != 0 for p in raw[len(positions):]):
            raise CorruptStreamError("support slots after the end marker must be 0", HEADER_SIZE)
        if any(p >= m for p in positions):
            raise CorruptStreamError("support position outside the signal", HEADER_SIZE)
    indices = [r.read(b) for b in layout.allocation.per_entry_bits]
    if not r.rest_is_zero():
        raise CorruptStreamError("non-zero padding", HEADER_SIZE + r.pos // 8)
    try:
        frame = EncodedFrame(
            header.scheme,
            tuple(indices),
            layout.allocation,
            total,
            support_positions=tuple(positions) if positions is not None else None,
            flag_bits=flag,
            position_bits=layout.position_bits if positions is not None else 0,
        )
    except InvalidParameterError as exc:
        raise CorruptStreamError(str(exc), HEADER_SIZE) from None
    return header, frame


def check_codebooks(header: FrameHeader, bank: CodebookBank) -> None:
    """Raise :class:`CodebookMismatchError` unless ``bank`` produced the frame."""
    if header.codebook_id != bank.digest():
        raise CodebookMismatchError(
            f"frame codebook id {header.codebook_id.hex()} != supplied {bank.digest().hex()}"
        )


def write_frame(path, frame: EncodedFrame, header: FrameHeader) -> None:
    Path(path).write_bytes(pack_frame(frame, header))


def read_frame(path, bank: CodebookBank | None = None) -> tuple[FrameHeader, EncodedFrame]:
    header, frame = unpack_frame(Path(path).read_bytes())
    if bank is not None:
        check_codebooks(header, bank)
    return header, frame
