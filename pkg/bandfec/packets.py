"""Symbol packet wire format.

    magic "BFEC" | version u8 | family u8 | k u32 | n u32 | symbol_size u32 |
    esi u32 | spec_hash 8 bytes | payload (symbol_size bytes)

Integers are big-endian. The packet with esi 0xFFFFFFFF is the trailer: its
payload starts with the padding length as a u32.
"""

import logging
import struct
from dataclasses import dataclass
from typing import BinaryIO, Iterator

from bandfec.errors import PacketError
from bandfec.schemas import CodeFamily

logger = logging.getLogger(__name__)

MAGIC = b"BFEC"
VERSION = 1
TRAILER_ESI = 0xFFFFFFFF
HEADER = struct.Struct(">4sBBIIII8s")

FAMILY_CODES = {CodeFamily.BAND: 1, CodeFamily.STAIRCASE: 2, CodeFamily.WINDOWED: 3}
FAMILIES = {code: family for family, code in FAMILY_CODES.items()}


@dataclass(frozen=True)
class SymbolPacket:
    family: CodeFamily
    k: int
    n: int
    symbol_size: int
    esi: int
    spec_hash: bytes
    payload: bytes

    @property
    def is_trailer(self) -> bool:
        return self.esi == TRAILER_ESI

    @property
    def padding(self) -> int:
        if not self.is_trailer:
            raise ValueError("Only the trailer packet carries a padding length")
        return struct.unpack(">I", self.payload[:4])[0]

    def pack(self) -> bytes:
        if len(self.payload) != self.symbol_size:
            raise ValueError(f"Payload of {len(self.payload)} bytes, expected {self.symbol_size}")
        if len(self.spec_hash) != 8:
            raise ValueError("spec_hash must be 8 bytes")
        header = HEADER.pack(
            MAGIC, VERSION, FAMILY_CODES[self.family], self.k, self.n, self.symbol_size, self.esi, self.spec_hash
        )
        return header + self.payload


def trailer(family: CodeFamily, k: int, n: int, symbol_size: int, spec_hash: bytes, padding: int) -> SymbolPacket:
    payload = struct.pack(">I", padding).ljust(symbol_size, b"\0")[:symbol_size]
    return SymbolPacket(family, k, n, symbol_size, TRAILER_ESI, spec_hash, payload)


def parse_packet(data: bytes) -> SymbolPacket:
    """Parse exactly one packet"""
    if len(data) < HEADER.size:
        raise PacketError(f"Truncated header: {len(data)} of {HEADER.size} bytes")
    magic, version, family, k, n, size, esi, spec_hash = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise PacketError(f"Bad magic {magic!r}")
    if version != VERSION:
        raise PacketError(f"Unsupported packet version {version}")
    if family not in FAMILIES:
        raise PacketError(f"Unknown code family id {family}")
    if esi != TRAILER_ESI and esi >= n:
        raise PacketError(f"ESI {esi} outside [0, {n})")
    if size < 4 and esi == TRAILER_ESI:
        raise PacketError("Trailer payload too short for a padding length")
    payload = data[HEADER.size:]
    if len(payload) != size:
        raise PacketError(f"Payload of {len(payload)} bytes, header says {size}")
    return SymbolPacket(FAMILIES[family], k, n, size, esi, spec_hash, bytes(payload))


def iter_packets(stream: BinaryIO) -> Iterator[SymbolPacket]:
    """
    Read packets until end of stream.

    A packet that fails to parse is skipped and reading resumes at the next
    occurrence of the magic bytes.
    """
    buffer = stream.read()
    pos = 0
    while pos + HEADER.size <= len(buffer):
        if buffer[pos:pos + 4] != MAGIC:
            nxt = buffer.find(MAGIC, pos + 1)
            logger.warning("Skipping %d bytes without packet magic at offset %d", (nxt if nxt >= 0 else len(buffer)) - pos, pos)
            if nxt < 0:
                return
            pos = nxt
            continue
        size = HEADER.unpack_from(buffer, pos)[5]
        end = pos + HEADER.size + size
        try:
            packet = parse_packet(buffer[pos:end])
        except PacketError as e:
            logger.warning("Rejected packet at offset %d: %s", pos, e)
            nxt = buffer.find(MAGIC, pos + 1)
            if nxt < 0:
                return
            pos = nxt
            continue
        yield packet
        pos = end
