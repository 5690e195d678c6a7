import pytest
from hypothesis import given
from hypothesis import strategies as st

from wsnsec.packets import (
    BROADCAST,
    MAX_FRAME,
    MAX_PAYLOAD,
    FrameError,
    Packet,
    PacketType,
    decode,
)


def test_wire_layout_golden():
    pkt = Packet(PacketType.HELLO, 1, BROADCAST, b"\x00\x01")
    assert pkt.encode() == bytes.fromhex("01" "0001" "ffff" "02" "0001" + "00" * 8)


def test_round_trip_every_type():
    for ptype in PacketType:
        pkt = Packet(ptype, 12, 34, b"abc", b"\x11" * 8)
        assert decode(pkt.encode()) == pkt


def test_frame_length_bounds():
    pkt = Packet(PacketType.DATA, 1, 2, b"x" * MAX_PAYLOAD)
    assert len(pkt.encode()) == MAX_FRAME == 78
    with pytest.raises(FrameError):
        Packet(PacketType.DATA, 1, 2, b"x" * (MAX_PAYLOAD + 1))


def test_broadcast_flag():
    assert Packet(PacketType.HELLO, 1, BROADCAST).is_broadcast
    assert not Packet(PacketType.HELLO, 1, 9).is_broadcast


def test_decode_rejects_unknown_type():
    frame = bytearray(Packet(PacketType.HELLO, 1, 2).encode())
    frame[0] = 0x7F
    with pytest.raises(FrameError):
        decode(bytes(frame))


def test_decode_rejects_truncated_and_padded():
    frame = Packet(PacketType.ACK, 1, 2, b"hi").encode()
    with pytest.raises(FrameError):
        decode(frame[:-1])
    with pytest.raises(FrameError):
        decode(frame + b"\x00")


def test_decode_rejects_length_mismatch():
    frame = bytearray(Packet(PacketType.ACK, 1, 2, b"hi").encode())
    frame[5] = 3  # header claims one more payload octet than present
    with pytest.raises(FrameError):
        decode(bytes(frame))


def test_mac_field_zero_by_default():
    assert Packet(PacketType.HELLO, 1, BROADCAST).mac == b"\x00" * 8


packet_strategy = st.builds(
    Packet,
    st.sampled_from(list(PacketType)),
    st.integers(min_value=0, max_value=0xFFFF),
    st.integers(min_value=0, max_value=0xFFFF),
    st.binary(min_size=0, max_size=MAX_PAYLOAD),
    st.binary(min_size=8, max_size=8),
)


@given(packet_strategy)
def test_prop_encode_decode_identity(pkt):
    assert decode(pkt.encode()) == pkt


@given(st.binary(min_size=0, max_size=96))
def test_prop_decode_success_implies_reencode_identity(blob):
    try:
        pkt = decode(blob)
    except FrameError:
        return
    assert pkt.encode() == blob
