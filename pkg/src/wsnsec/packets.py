"""Typed, byte-framed radio messages.

Wire layout, big-endian multi-octet fields::

    [type:1][src:2][dst:2][len:1][payload:len][mac:8]

``dst`` 0xFFFF addresses every listener in range. The mac trailer is
all-zero on unauthenticated frames (plain HELLO beacons).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .crypto import MAC_SIZE

BROADCAST = 0xFFFF
MAX_PAYLOAD = 64
HEADER_SIZE = 6
MAX_FRAME = HEADER_SIZE + MAX_PAYLOAD + MAC_SIZE  # 78 octets

ZERO_MAC = b"\x00" * MAC_SIZE


class PacketType(enum.IntEnum):
    HELLO = 0x01
    ACK = 0x02
    CLUSTER_KEY = 0x03
    DATA = 0x04
    HELP = 0x05
    ALERT = 0x06
    REPORT = 0x07
    GLOBAL_REKEY = 0x08


class FrameError(ValueError):
    """Raised when octets do not decode to a well-formed frame."""


@dataclass(frozen=True)
class Packet:
    ptype: PacketType
    src: int
    dst: int
    payload: bytes = b""
    mac: bytes = field(default=ZERO_MAC)

    def __post_init__(self) -> None:
        if not 0 <= self.src <= 0xFFFF or not 0 <= self.dst <= 0xFFFF:
            raise FrameError("src/dst out of 16-bit range")
        if len(self.payload) > MAX_PAYLOAD:
            raise FrameError(f"payload exceeds {MAX_PAYLOAD} octets")
        if len(self.mac) != MAC_SIZE:
            raise FrameError(f"mac must be {MAC_SIZE} octets")

    @property
    def is_broadcast(self) -> bool:
        return self.dst == BROADCAST

    def header_and_payload(self) -> bytes:
        """The authenticated portion of the frame (everything but the mac)."""
        return (
            bytes([self.ptype])
            + self.src.to_bytes(2, "big")
            + self.dst.to_bytes(2, "big")
            + bytes([len(self.payload)])
            + self.payload
        )

    def encode(self) -> bytes:
        return self.header_and_payload() + self.mac

    def with_mac(self, tag: bytes) -> "Packet":
        return Packet(self.ptype, self.src, self.dst, self.payload, tag)

    def __len__(self) -> int:
        return HEADER_SIZE + len(self.payload) + MAC_SIZE


def decode(data: bytes) -> Packet:
    """Parse one frame; strict, so decode(encode(p)) == p and any octets
    that decode successfully re-encode to the same octets."""
    if len(data) < HEADER_SIZE + MAC_SIZE:
        raise FrameError(f"frame too short: {len(data)} octets")
    try:
        ptype = PacketType(data[0])
    except ValueError as exc:
        raise FrameError(f"unknown packet type 0x{data[0]:02x}") from exc
    src = int.from_bytes(data[1:3], "big")
    dst = int.from_bytes(data[3:5], "big")
    length = data[5]
    if length > MAX_PAYLOAD:
        raise FrameError(f"payload length {length} exceeds {MAX_PAYLOAD}")
    expected = HEADER_SIZE + length + MAC_SIZE
    if len(data) != expected:
        raise FrameError(f"frame is {len(data)} octets, header says {expected}")
    payload = data[HEADER_SIZE:HEADER_SIZE + length]
    tag = data[HEADER_SIZE + length:]
    return Packet(ptype, src, dst, payload, tag)
