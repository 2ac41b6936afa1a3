"""Client session over either an in-process loopback or a TCP socket."""

from __future__ import annotations

import queue
import socket
import threading
from typing import Callable

from wingman.transport.broker import Broker
from wingman.transport.packets import (
    ConnAck,
    Connect,
    Disconnect,
    Packet,
    PacketDecoder,
    PingReq,
    PingResp,
    ProtocolError,
    Publish,
    SubAck,
    Subscribe,
    encode_packet,
)


class TransportClosed(Exception):
    """The underlying link went away."""


class MemoryTransport:
    """In-process duplex link pairing one client with a broker.

    Bytes written by the client are fed to the broker synchronously, and
    broker output is delivered back inline, so deterministic simulations
    need no OS networking (or threads).
    """

    def __init__(self, broker: Broker) -> None:
        self._broker = broker
        self._receiver: Callable[[bytes], None] | None = None
        self._open = True
        self._conn = _MemoryConnection(self)
        broker.register_connection(self._conn)

    def set_receiver(self, callback: Callable[[bytes], None]) -> None:
        self._receiver = callback

    def send(self, data: bytes) -> None:
        if not self._open:
            raise TransportClosed("loopback link is closed")
        self._broker.data_received(self._conn, data)

    def close(self) -> None:
        if self._open:
            self._open = False
            self._broker.connection_lost(self._conn)

    def _deliver(self, data: bytes) -> None:
        if self._receiver is not None:
            self._receiver(data)


class _MemoryConnection:
    """Broker-side half of a :class:`MemoryTransport`."""

    def __init__(self, transport: MemoryTransport) -> None:
        self._transport = transport

    def send(self, data: bytes) -> None:
        self._transport._deliver(data)

    def close(self) -> None:
        self._transport._open = False


class SocketTransport:
    """TCP link with a background reader thread."""

    def __init__(self, host: str, port: int, connect_timeout: float = 5.0) -> None:
        self._sock = socket.create_connection((host, port), timeout=connect_timeout)
        self._sock.settimeout(None)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)  # small frames
        self._receiver: Callable[[bytes], None] | None = None
        self._thread: threading.Thread | None = None
        self._open = True

    def set_receiver(self, callback: Callable[[bytes], None]) -> None:
        self._receiver = callback
        self._thread = threading.Thread(target=self._read_loop, daemon=True, name="mqtt-reader")
        self._thread.start()

    def send(self, data: bytes) -> None:
        if not self._open:
            raise TransportClosed("socket is closed")
        self._sock.sendall(data)

    def close(self) -> None:
        if self._open:
            self._open = False
            try:
                self._sock.shutdown(socket.SHUT_RDWR)
            except OSError:
                pass
            self._sock.close()

    def _read_loop(self) -> None:
        while self._open:
            try:
                data = self._sock.recv(4096)
            except OSError:
                return
            if not data:
                return
            if self._receiver is not None:
                self._receiver(data)


class MqttClient:
    """Minimal QoS-0 session: connect, subscribe, publish, ping.

    ``on_message(topic, payload)`` runs inline on the delivering context:
    the publisher's own call stack for a loopback link, the reader thread
    for a socket.
    """

    def __init__(
        self,
        transport: MemoryTransport | SocketTransport,
        client_id: str,
        on_message: Callable[[str, bytes], None] | None = None,
    ) -> None:
        self.client_id = client_id
        self.on_message = on_message
        self._transport = transport
        self._decoder = PacketDecoder()
        self._acks: queue.Queue[Packet] = queue.Queue()
        self._next_packet_id = 1
        transport.set_receiver(self._on_bytes)

    def connect(self, timeout: float = 5.0) -> None:
        self._transport.send(encode_packet(Connect(self.client_id)))
        ack = self._wait_ack(timeout)
        if not isinstance(ack, ConnAck):
            raise ProtocolError(f"expected CONNACK, got {type(ack).__name__}")

    def subscribe(self, filter_: str, timeout: float = 5.0) -> None:
        packet_id = self._next_packet_id
        self._next_packet_id = packet_id % 0xFFFF + 1
        self._transport.send(encode_packet(Subscribe(packet_id, filter_)))
        ack = self._wait_ack(timeout)
        if not isinstance(ack, SubAck) or ack.packet_id != packet_id:
            raise ProtocolError(f"expected SUBACK {packet_id}, got {ack!r}")

    def publish(self, topic: str, payload: bytes) -> None:
        self._transport.send(encode_packet(Publish(topic, payload)))

    def ping(self, timeout: float = 5.0) -> None:
        self._transport.send(encode_packet(PingReq()))
        ack = self._wait_ack(timeout)
        if not isinstance(ack, PingResp):
            raise ProtocolError(f"expected PINGRESP, got {type(ack).__name__}")

    def disconnect(self) -> None:
        try:
            self._transport.send(encode_packet(Disconnect()))
        except (TransportClosed, OSError):
            pass
        self._transport.close()

    def _wait_ack(self, timeout: float) -> Packet:
        try:
            return self._acks.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no broker response") from None

    def _on_bytes(self, data: bytes) -> None:
        for packet in self._decoder.feed(data):
            if isinstance(packet, Publish):
                if self.on_message is not None:
                    self.on_message(packet.topic, packet.payload)
            elif isinstance(packet, (ConnAck, SubAck, PingResp)):
                self._acks.put(packet)
            else:
                raise ProtocolError(f"broker may not send {type(packet).__name__}")
