"""TCP wrapper for phone-style clients.

Each connection sends one 2-byte metadata packet, then a stream of
headerless float frames whose size that packet fixes. Every decoded frame
becomes a :class:`StreamElement` tagged with the connection's source id.
"""

from __future__ import annotations

import enum
import itertools
import logging
import socket
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from gsnbridge.datamodel import OutputSchema, create_schema, map_sensor_data
from gsnbridge.errors import FramingError, ValidationError
from gsnbridge.protocol import (
    METADATA_SIZE,
    decode_metadata,
    decode_readings,
    expected_payload_bytes,
)
from gsnbridge.runtime.wrapper import AbstractWrapper, WrapperConnectionRequest

log = logging.getLogger(__name__)

DEFAULT_IDLE_TIMEOUT = 60.0
_ACCEPT_POLL = 0.1


class Phase(str, enum.Enum):
    AWAITING_METADATA = "awaiting-metadata"
    STREAMING = "streaming"
    CLOSED = "closed"


@dataclass
class ClientConnection:
    source_id: str
    peer: tuple
    sock: socket.socket = field(repr=False)
    phase: Phase = Phase.AWAITING_METADATA
    schema: OutputSchema | None = None
    frames: int = 0
    close_reason: str = ""


def recv_exact(sock: socket.socket, n: int) -> bytes:
    """Read exactly ``n`` bytes; fewer only if the peer closed first."""
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            break
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def _now_ms() -> int:
    return time.time_ns() // 1_000_000


class AndroidWrapper(AbstractWrapper):
    """Listens on ``host:port`` (VSD predicates) for phone clients.

    ``port`` 0 binds an ephemeral port; read it back from :attr:`address`.
    """

    wrapper_name = "android"

    def __init__(
        self,
        wcr: WrapperConnectionRequest,
        idle_timeout: float = DEFAULT_IDLE_TIMEOUT,
        clock: Callable[[], int] = _now_ms,
    ):
        super().__init__(wcr)
        self.host = wcr.get("host", "0.0.0.0")
        try:
            self.port = int(wcr.get("port", ""))
        except ValueError:
            self.port = None
        self.idle_timeout = idle_timeout
        self.clock = clock
        self.address: tuple | None = None
        self._listener: socket.socket | None = None
        self._conns: dict[str, ClientConnection] = {}
        self._handlers: list[threading.Thread] = []
        self._conn_lock = threading.Lock()
        self._ids = itertools.count(1)
        self.closed_connections: deque[ClientConnection] = deque(maxlen=256)

    # -- lifecycle hooks ----------------------------------------------
    def setup(self) -> bool:
        if self.port is None or not 0 <= self.port <= 65535:
            log.error("android wrapper needs an integer port predicate, got %r", self.wcr.get("port"))
            return False
        sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        try:
            sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            sock.bind((self.host, self.port))
            sock.listen()
            sock.settimeout(_ACCEPT_POLL)
        except OSError as exc:
            sock.close()
            log.error("android wrapper cannot listen on %s:%s: %s", self.host, self.port, exc)
            return False
        self._listener = sock
        self.address = sock.getsockname()
        log.info("android wrapper listening on %s:%d", *self.address[:2])
        return True

    def teardown(self) -> None:
        self.stopping.set()
        if self._listener is not None:
            self._listener.close()
            self._listener = None
        with self._conn_lock:
            conns = list(self._conns.values())
            handlers = list(self._handlers)
        for conn in conns:
            _shutdown(conn.sock)
        for t in handlers:
            if t is not threading.current_thread():
                t.join(timeout=5)

    def run(self) -> None:
        while not self.stopping.is_set():
            listener = self._listener
            if listener is None:
                return
            try:
                sock, peer = listener.accept()
            except socket.timeout:
                continue
            except OSError:
                if self.stopping.is_set():
                    return
                raise
            t = threading.Thread(
                target=self.handle_connection, args=(sock, peer), daemon=True,
                name=f"android-conn-{peer[1]}",
            )
            with self._conn_lock:
                self._handlers = [h for h in self._handlers if h.is_alive()]
                self._handlers.append(t)
            t.start()

    # -- per connection -----------------------------------------------
    @property
    def open_resources(self) -> int:
        """Listening socket plus live client sockets (for leak accounting)."""
        with self._conn_lock:
            return (self._listener is not None) + len(self._conns)

    @property
    def connections(self) -> list[ClientConnection]:
        with self._conn_lock:
            return list(self._conns.values())

    def handle_connection(self, sock: socket.socket, peer: tuple = ("local", 0)) -> ClientConnection:
        source_id = f"{peer[0]}:{peer[1]}#{next(self._ids)}"
        conn = ClientConnection(source_id, peer, sock)
        with self._conn_lock:
            self._conns[source_id] = conn
        if self.stopping.is_set():
            _shutdown(sock)
        try:
            sock.settimeout(self.idle_timeout)
            self._serve(conn)
        except socket.timeout:
            conn.close_reason = "idle timeout"
            log.info("%s: idle for %.1fs, closing", source_id, self.idle_timeout)
        except OSError as exc:
            conn.close_reason = f"socket error: {exc}"
            log.info("%s: %s", source_id, conn.close_reason)
        finally:
            conn.phase = Phase.CLOSED
            try:
                sock.close()
            finally:
                with self._conn_lock:
                    self._conns.pop(source_id, None)
                    self.closed_connections.append(conn)
        return conn

    def _serve(self, conn: ClientConnection) -> None:
        sock = conn.sock
        head = recv_exact(sock, METADATA_SIZE)
        try:
            packet = decode_metadata(head)
        except (FramingError, ValidationError) as exc:
            conn.close_reason = f"protocol error: {exc}"
            log.warning("%s: bad metadata %s: %s", conn.source_id, head.hex(), exc)
            return
        conn.schema = schema = create_schema(packet)
        conn.phase = Phase.STREAMING
        self.set_output_format(schema)
        frame_size = expected_payload_bytes(packet)
        log.info("%s: handshake ok, %d fields, %d-byte frames", conn.source_id, len(schema), frame_size)

        last_ts = 0
        while not self.stopping.is_set():
            frame = recv_exact(sock, frame_size)
            if len(frame) < frame_size:
                if frame:
                    conn.close_reason = f"truncated frame ({len(frame)}/{frame_size} bytes)"
                    log.warning("%s: %s, discarded", conn.source_id, conn.close_reason)
                else:
                    conn.close_reason = "peer closed"
                return
            groups = decode_readings(packet, frame)
            last_ts = max(last_ts, self.clock())
            self.post_stream_element(map_sensor_data(schema, groups, conn.source_id, last_ts))
            conn.frames += 1
        conn.close_reason = "wrapper finalised"


def _shutdown(sock: socket.socket) -> None:
    try:
        sock.shutdown(socket.SHUT_RDWR)
    except OSError:
        pass
