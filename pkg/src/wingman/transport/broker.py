"""QoS-0 broker: session registry, topic fan-out, TCP front-end.

The broker core is transport-agnostic: it consumes raw bytes from
connection objects (anything with ``send(bytes)`` and ``close()``) and
writes raw bytes back. ``TcpBrokerServer`` binds it to a stream socket;
the in-process loopback lives in :mod:`wingman.transport.client`.

A protocol violation terminates the offending session only; the broker
survives. Dispatch for a single publish is atomic with respect to
subscription changes.
"""

from __future__ import annotations

import logging
import socket
import threading
from dataclasses import dataclass, field
from typing import Callable, Protocol

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
    topic_matches,
    validate_filter,
)

logger = logging.getLogger(__name__)

DEFAULT_PORT = 1883


class SessionError(Exception):
    """Operation referenced a client id with no live session."""


class Connection(Protocol):
    def send(self, data: bytes) -> None: ...

    def close(self) -> None: ...


@dataclass
class BrokerState:
    """Connected client ids and their subscription filters.

    ``sessions`` is insertion-ordered (dict keyed by client id) so that
    fan-out order is deterministic. Duplicate filters per client collapse.
    """

    sessions: dict[str, None] = field(default_factory=dict)
    subscriptions: dict[str, set[str]] = field(default_factory=dict)

    def add_session(self, client_id: str) -> None:
        self.sessions[client_id] = None

    def remove_session(self, client_id: str) -> None:
        self.sessions.pop(client_id, None)
        self.subscriptions.pop(client_id, None)

    def add_subscription(self, client_id: str, filter_: str) -> None:
        if client_id not in self.sessions:
            raise SessionError(f"unknown client {client_id!r}")
        validate_filter(filter_)
        self.subscriptions.setdefault(client_id, set()).add(filter_)


def broker_dispatch(state: BrokerState, from_id: str, publish: Publish) -> list[tuple[str, Publish]]:
    """Targets for one publish: (client id, packet), deduplicated per client.

    The publisher receives its own message if self-subscribed; with no
    matching subscribers the QoS-0 message is dropped silently.
    """
    if from_id not in state.sessions:
        raise SessionError(f"unknown client {from_id!r}")
    deliveries: list[tuple[str, Publish]] = []
    for client_id in state.sessions:
        filters = state.subscriptions.get(client_id)
        if filters and any(topic_matches(f, publish.topic) for f in filters):
            deliveries.append((client_id, publish))
    return deliveries


class Broker:
    """Transport-agnostic broker core.

    ``on_publish`` (when set) is called exactly once per accepted PUBLISH,
    in dispatch order, under the broker lock - used for trace logging.
    """

    def __init__(self) -> None:
        self.state = BrokerState()
        self.on_publish: Callable[[str, bytes], None] | None = None
        self._lock = threading.RLock()
        self._decoders: dict[int, PacketDecoder] = {}
        self._client_ids: dict[int, str] = {}
        self._connections: dict[str, Connection] = {}

    def register_connection(self, conn: Connection) -> None:
        with self._lock:
            self._decoders[id(conn)] = PacketDecoder()

    def connection_lost(self, conn: Connection) -> None:
        with self._lock:
            self._decoders.pop(id(conn), None)
            client_id = self._client_ids.pop(id(conn), None)
            if client_id is not None and self._connections.get(client_id) is conn:
                self._connections.pop(client_id, None)
                self.state.remove_session(client_id)

    def data_received(self, conn: Connection, data: bytes) -> None:
        with self._lock:
            decoder = self._decoders.get(id(conn))
            if decoder is None:
                return
            try:
                packets = decoder.feed(data)
            except ProtocolError as exc:
                self._terminate(conn, f"codec error: {exc}")
                return
            for packet in packets:
                try:
                    self._handle(conn, packet)
                except ProtocolError as exc:
                    self._terminate(conn, f"protocol error: {exc}")
                    return

    def session_count(self) -> int:
        with self._lock:
            return len(self.state.sessions)

    def _terminate(self, conn: Connection, reason: str) -> None:
        logger.warning("dropping session: %s", reason)
        self.connection_lost(conn)
        try:
            conn.close()
        except OSError:
            pass

    def _handle(self, conn: Connection, packet: Packet) -> None:
        client_id = self._client_ids.get(id(conn))
        if isinstance(packet, Connect):
            if client_id is not None:
                raise ProtocolError("second CONNECT on one connection")
            old = self._connections.get(packet.client_id)
            if old is not None:
                self._terminate(old, f"session taken over by new {packet.client_id!r}")
            self._client_ids[id(conn)] = packet.client_id
            self._connections[packet.client_id] = conn
            self.state.add_session(packet.client_id)
            conn.send(encode_packet(ConnAck()))
            return
        if client_id is None:
            raise ProtocolError("first packet must be CONNECT")
        if isinstance(packet, Subscribe):
            self.state.add_subscription(client_id, packet.filter)
            conn.send(encode_packet(SubAck(packet.packet_id)))
        elif isinstance(packet, Publish):
            if self.on_publish is not None:
                self.on_publish(packet.topic, packet.payload)
            data = encode_packet(packet)
            for target_id, _ in broker_dispatch(self.state, client_id, packet):
                target = self._connections.get(target_id)
                if target is not None:
                    target.send(data)
        elif isinstance(packet, PingReq):
            conn.send(encode_packet(PingResp()))
        elif isinstance(packet, Disconnect):
            self.connection_lost(conn)
            conn.close()
        else:
            raise ProtocolError(f"client may not send {type(packet).__name__}")


class _TcpConnection:
    def __init__(self, sock: socket.socket) -> None:
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)  # small frames
        self._sock = sock
        self._send_lock = threading.Lock()

    def send(self, data: bytes) -> None:
        try:
            with self._send_lock:
                self._sock.sendall(data)
        except OSError:
            pass  # receiver loop will notice the broken pipe

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class TcpBrokerServer:
    """Stream-socket front-end for a :class:`Broker`."""

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: int = DEFAULT_PORT) -> None:
        self.broker = broker
        self.host = host
        self.port = port
        self._listener: socket.socket | None = None
        self._threads: list[threading.Thread] = []
        self._conns: list[_TcpConnection] = []
        self._running = False

    def start(self) -> None:
        """Bind and start accepting; raises OSError if the bind fails."""
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.host, self.port))
        listener.listen(16)
        self.port = listener.getsockname()[1]
        self._listener = listener
        self._running = True
        accept_thread = threading.Thread(target=self._accept_loop, daemon=True, name="broker-accept")
        accept_thread.start()
        self._threads.append(accept_thread)

    def stop(self) -> None:
        self._running = False
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        for conn in self._conns:
            conn.close()  # unblocks the reader threads
        for thread in self._threads:
            thread.join(timeout=2.0)

    def serve_forever(self) -> None:
        self.start()
        try:
            while self._running:
                self._threads[0].join(timeout=0.5)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while self._running:
            try:
                sock, _addr = self._listener.accept()
            except OSError:
                return
            conn = _TcpConnection(sock)
            self.broker.register_connection(conn)
            self._conns.append(conn)
            thread = threading.Thread(
                target=self._recv_loop, args=(sock, conn), daemon=True, name="broker-conn"
            )
            thread.start()
            self._threads.append(thread)

    def _recv_loop(self, sock: socket.socket, conn: _TcpConnection) -> None:
        while True:
            try:
                data = sock.recv(4096)
            except OSError:
                data = b""
            if not data:
                self.broker.connection_lost(conn)
                conn.close()
                return
            self.broker.data_received(conn, data)
