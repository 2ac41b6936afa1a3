"""MQTT 3.1.1 subset: packet types, bit-exact codec, topic matching.

Supported packets: CONNECT, CONNACK, PUBLISH (QoS 0 only), SUBSCRIBE
(single filter), SUBACK, PINGREQ, PINGRESP, DISCONNECT. No retained
messages, wills, auth or QoS above 0; clean sessions only.

Wire layout per packet: fixed header (type in the high nibble, flags in
the low nibble), remaining length as a 1-4 byte 7-bit little-endian
varint, then the variable header and payload. Strings are big-endian
uint16 length-prefixed UTF-8.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

MAX_PAYLOAD = 256 * 1024  # artifact cap, bytes
MAX_REMAINING_LENGTH = 268_435_455
# largest frame we are willing to buffer: payload cap + topic + headers
_MAX_FRAME = MAX_PAYLOAD + 65_535 + 16

_TYPE_CONNECT = 1
_TYPE_CONNACK = 2
_TYPE_PUBLISH = 3
_TYPE_SUBSCRIBE = 8
_TYPE_SUBACK = 9
_TYPE_PINGREQ = 12
_TYPE_PINGRESP = 13
_TYPE_DISCONNECT = 14


class PacketError(ValueError):
    """A packet violates its construction/encoding invariants."""


class ProtocolError(Exception):
    """Malformed wire data; the offending connection must be dropped."""


def validate_topic(topic: str) -> None:
    if not isinstance(topic, str) or not topic:
        raise PacketError("topic: must be a non-empty string")
    if "+" in topic or "#" in topic:
        raise PacketError(f"topic: wildcards not allowed in topic name {topic!r}")
    if "\x00" in topic:
        raise PacketError("topic: NUL not allowed")
    if len(topic.encode("utf-8")) > 65_535:
        raise PacketError("topic: longer than 65535 bytes")


def validate_filter(filter_: str) -> None:
    if not isinstance(filter_, str) or not filter_:
        raise PacketError("filter: must be a non-empty string")
    if "\x00" in filter_:
        raise PacketError("filter: NUL not allowed")
    if len(filter_.encode("utf-8")) > 65_535:
        raise PacketError("filter: longer than 65535 bytes")
    levels = filter_.split("/")
    for i, level in enumerate(levels):
        if "#" in level:
            if level != "#" or i != len(levels) - 1:
                raise PacketError(f"filter: '#' must be the whole final level in {filter_!r}")
        if "+" in level and level != "+":
            raise PacketError(f"filter: '+' must occupy a whole level in {filter_!r}")


@dataclass(frozen=True)
class Connect:
    client_id: str

    def __post_init__(self) -> None:
        if not isinstance(self.client_id, str) or not self.client_id:
            raise PacketError("client_id: must be a non-empty string")
        if len(self.client_id.encode("utf-8")) > 65_535:
            raise PacketError("client_id: longer than 65535 bytes")


@dataclass(frozen=True)
class ConnAck:
    pass


@dataclass(frozen=True)
class Publish:
    topic: str
    payload: bytes = b""

    def __post_init__(self) -> None:
        validate_topic(self.topic)
        if not isinstance(self.payload, (bytes, bytearray)):
            raise PacketError("payload: must be bytes")
        if len(self.payload) > MAX_PAYLOAD:
            raise PacketError(f"payload: {len(self.payload)} bytes exceeds cap {MAX_PAYLOAD}")
        object.__setattr__(self, "payload", bytes(self.payload))


@dataclass(frozen=True)
class Subscribe:
    packet_id: int
    filter: str

    def __post_init__(self) -> None:
        if not isinstance(self.packet_id, int) or not 1 <= self.packet_id <= 0xFFFF:
            raise PacketError(f"packet_id: {self.packet_id!r} not in 1..65535")
        validate_filter(self.filter)


@dataclass(frozen=True)
class SubAck:
    packet_id: int

    def __post_init__(self) -> None:
        if not isinstance(self.packet_id, int) or not 1 <= self.packet_id <= 0xFFFF:
            raise PacketError(f"packet_id: {self.packet_id!r} not in 1..65535")


@dataclass(frozen=True)
class PingReq:
    pass


@dataclass(frozen=True)
class PingResp:
    pass


@dataclass(frozen=True)
class Disconnect:
    pass


Packet = Connect | ConnAck | Publish | Subscribe | SubAck | PingReq | PingResp | Disconnect


def encode_remaining_length(n: int) -> bytes:
    """7-bit little-endian varint used for the MQTT remaining length."""
    if not isinstance(n, int) or not 0 <= n <= MAX_REMAINING_LENGTH:
        raise PacketError(f"remaining length {n!r} out of range 0..{MAX_REMAINING_LENGTH}")
    out = bytearray()
    while True:
        byte = n % 128
        n //= 128
        if n:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_remaining_length(buf: bytes, offset: int) -> tuple[int, int] | None:
    """Decode the varint at ``offset``; None if more bytes are needed."""
    value = 0
    shift = 0
    for i in range(4):
        if offset + i >= len(buf):
            return None
        byte = buf[offset + i]
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, i + 1
        shift += 7
    raise ProtocolError("remaining length longer than 4 bytes")


def _encode_string(s: str) -> bytes:
    data = s.encode("utf-8")
    return struct.pack(">H", len(data)) + data


def _read_string(body: bytes, offset: int, what: str) -> tuple[str, int]:
    if offset + 2 > len(body):
        raise ProtocolError(f"{what}: truncated length prefix")
    (length,) = struct.unpack_from(">H", body, offset)
    end = offset + 2 + length
    if end > len(body):
        raise ProtocolError(f"{what}: truncated string")
    try:
        return body[offset + 2 : end].decode("utf-8"), end
    except UnicodeDecodeError as exc:
        raise ProtocolError(f"{what}: invalid UTF-8") from exc


def encode_packet(packet: Packet) -> bytes:
    """Serialize a packet; inverse of :func:`decode_packet`."""
    if isinstance(packet, Connect):
        # protocol name, level 4, connect flags (clean session), keepalive 0
        var = _encode_string("MQTT") + bytes([0x04, 0x02, 0x00, 0x00])
        body = var + _encode_string(packet.client_id)
        head = bytes([_TYPE_CONNECT << 4])
    elif isinstance(packet, ConnAck):
        body = bytes([0x00, 0x00])  # session present 0, return code 0
        head = bytes([_TYPE_CONNACK << 4])
    elif isinstance(packet, Publish):
        body = _encode_string(packet.topic) + packet.payload
        head = bytes([_TYPE_PUBLISH << 4])  # QoS 0, no DUP, no RETAIN
    elif isinstance(packet, Subscribe):
        body = struct.pack(">H", packet.packet_id) + _encode_string(packet.filter) + b"\x00"
        head = bytes([(_TYPE_SUBSCRIBE << 4) | 0x02])
    elif isinstance(packet, SubAck):
        body = struct.pack(">H", packet.packet_id) + b"\x00"  # granted QoS 0
        head = bytes([_TYPE_SUBACK << 4])
    elif isinstance(packet, PingReq):
        body = b""
        head = bytes([_TYPE_PINGREQ << 4])
    elif isinstance(packet, PingResp):
        body = b""
        head = bytes([_TYPE_PINGRESP << 4])
    elif isinstance(packet, Disconnect):
        body = b""
        head = bytes([_TYPE_DISCONNECT << 4])
    else:
        raise PacketError(f"unknown packet {packet!r}")
    return head + encode_remaining_length(len(body)) + body


def _decode_connect(flags: int, body: bytes) -> Connect:
    if flags != 0:
        raise ProtocolError("CONNECT: reserved flags set")
    name, offset = _read_string(body, 0, "CONNECT protocol name")
    if name != "MQTT":
        raise ProtocolError(f"CONNECT: unexpected protocol name {name!r}")
    if offset + 4 > len(body):
        raise ProtocolError("CONNECT: truncated variable header")
    level, connect_flags = body[offset], body[offset + 1]
    if level != 0x04:
        raise ProtocolError(f"CONNECT: unsupported protocol level {level}")
    if connect_flags != 0x02:
        raise ProtocolError("CONNECT: only clean sessions without will/auth are supported")
    client_id, offset = _read_string(body, offset + 4, "CONNECT client id")
    if offset != len(body):
        raise ProtocolError("CONNECT: trailing bytes")
    try:
        return Connect(client_id)
    except PacketError as exc:
        raise ProtocolError(str(exc)) from exc


def _decode_publish(flags: int, body: bytes) -> Publish:
    if flags & 0x06:
        raise ProtocolError("PUBLISH: QoS above 0 is not supported")
    if flags != 0:
        raise ProtocolError("PUBLISH: DUP/RETAIN are not supported")
    topic, offset = _read_string(body, 0, "PUBLISH topic")
    try:
        return Publish(topic, body[offset:])
    except PacketError as exc:
        raise ProtocolError(str(exc)) from exc


def _decode_subscribe(flags: int, body: bytes) -> Subscribe:
    if flags != 0x02:
        raise ProtocolError("SUBSCRIBE: flags must be 0010")
    if len(body) < 2:
        raise ProtocolError("SUBSCRIBE: truncated packet id")
    (packet_id,) = struct.unpack_from(">H", body, 0)
    filter_, offset = _read_string(body, 2, "SUBSCRIBE filter")
    if offset + 1 != len(body):
        raise ProtocolError("SUBSCRIBE: exactly one filter per packet is supported")
    if body[offset] != 0x00:
        raise ProtocolError("SUBSCRIBE: requested QoS must be 0")
    try:
        return Subscribe(packet_id, filter_)
    except PacketError as exc:
        raise ProtocolError(str(exc)) from exc


def _decode_suback(flags: int, body: bytes) -> SubAck:
    if flags != 0:
        raise ProtocolError("SUBACK: reserved flags set")
    if len(body) != 3:
        raise ProtocolError("SUBACK: bad length")
    (packet_id,) = struct.unpack_from(">H", body, 0)
    if body[2] != 0x00:
        raise ProtocolError("SUBACK: unexpected return code")
    try:
        return SubAck(packet_id)
    except PacketError as exc:
        raise ProtocolError(str(exc)) from exc


def _decode_empty(flags: int, body: bytes, packet: Packet, name: str) -> Packet:
    if flags != 0:
        raise ProtocolError(f"{name}: reserved flags set")
    if body:
        raise ProtocolError(f"{name}: unexpected payload")
    return packet


def _decode_connack(flags: int, body: bytes) -> ConnAck:
    if flags != 0:
        raise ProtocolError("CONNACK: reserved flags set")
    if len(body) != 2 or body[1] != 0x00:
        raise ProtocolError("CONNACK: bad acknowledge body")
    return ConnAck()


def decode_packet(buf: bytes) -> tuple[Packet, int] | None:
    """Decode one packet from the head of ``buf``.

    Returns (packet, consumed) leaving trailing bytes alone, or None when
    the buffer does not yet hold a complete packet. Raises ProtocolError
    on malformed data.
    """
    if not buf:
        return None
    ptype = buf[0] >> 4
    flags = buf[0] & 0x0F
    if ptype in (0, 15):
        raise ProtocolError(f"reserved packet type {ptype}")
    decoded = decode_remaining_length(buf, 1)
    if decoded is None:
        return None
    remaining, rl_len = decoded
    if remaining > _MAX_FRAME:
        raise ProtocolError(f"frame of {remaining} bytes exceeds cap")
    total = 1 + rl_len + remaining
    if len(buf) < total:
        return None
    body = bytes(buf[1 + rl_len : total])
    if ptype == _TYPE_CONNECT:
        return _decode_connect(flags, body), total
    if ptype == _TYPE_CONNACK:
        return _decode_connack(flags, body), total
    if ptype == _TYPE_PUBLISH:
        return _decode_publish(flags, body), total
    if ptype == _TYPE_SUBSCRIBE:
        return _decode_subscribe(flags, body), total
    if ptype == _TYPE_SUBACK:
        return _decode_suback(flags, body), total
    if ptype == _TYPE_PINGREQ:
        return _decode_empty(flags, body, PingReq(), "PINGREQ"), total
    if ptype == _TYPE_PINGRESP:
        return _decode_empty(flags, body, PingResp(), "PINGRESP"), total
    if ptype == _TYPE_DISCONNECT:
        return _decode_empty(flags, body, Disconnect(), "DISCONNECT"), total
    raise ProtocolError(f"unsupported packet type {ptype}")


@dataclass
class PacketDecoder:
    """Incremental stream decoder; tolerant of arbitrary byte splits."""

    _buffer: bytearray = field(default_factory=bytearray)

    def feed(self, data: bytes) -> list[Packet]:
        self._buffer.extend(data)
        packets: list[Packet] = []
        while True:
            result = decode_packet(bytes(self._buffer))
            if result is None:
                return packets
            packet, consumed = result
            del self._buffer[:consumed]
            packets.append(packet)

    def pending_bytes(self) -> int:
        return len(self._buffer)


def topic_matches(filter_: str, topic: str) -> bool:
    """Level-wise topic filter match.

    '+' matches exactly one level; a trailing '#' matches zero or more
    remaining levels. Inputs are assumed valid per the packet invariants.
    """
    flevels = filter_.split("/")
    tlevels = topic.split("/")
    for i, flevel in enumerate(flevels):
        if flevel == "#":
            return True
        if i >= len(tlevels):
            return False
        if flevel != "+" and flevel != tlevels[i]:
            return False
    return len(flevels) == len(tlevels)
