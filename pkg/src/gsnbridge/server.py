"""Acquisition server: loads virtual sensors and serves a read-only HTTP API.

HTTP endpoints::

    GET /sensors                      -> [{name, fields, count, sources}]
    GET /sensors/<name>/latest?n=N    -> [element, ...] newest first
"""

from __future__ import annotations

import functools
import json
import logging
import threading
from dataclasses import dataclass
from http import HTTPStatus
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, unquote, urlsplit

from gsnbridge.android import DEFAULT_IDLE_TIMEOUT, AndroidWrapper
from gsnbridge.datamodel import ALL_FIELDS
from gsnbridge.runtime import VirtualSensorLoader, WrapperRepository

log = logging.getLogger(__name__)

DEFAULT_LATEST = 10


@dataclass
class ServerConfig:
    vsd_dir: Path | None = None
    http_host: str = "127.0.0.1"
    http_port: int = 8080
    data_dir: Path | None = None
    idle_timeout: float = DEFAULT_IDLE_TIMEOUT
    default_history: int = 1000


def default_repository(idle_timeout: float = DEFAULT_IDLE_TIMEOUT) -> WrapperRepository:
    return WrapperRepository(
        {"android": functools.partial(AndroidWrapper, idle_timeout=idle_timeout)}
    )


class AcquisitionServer:
    def __init__(self, config: ServerConfig, repository: WrapperRepository | None = None):
        self.config = config
        self.repository = repository or default_repository(config.idle_timeout)
        self.loader = VirtualSensorLoader(
            self.repository, config.data_dir, config.default_history
        )
        self.load_failures: dict[str, str] = {}
        self._httpd: ThreadingHTTPServer | None = None
        self._http_thread: threading.Thread | None = None

    # -- startup / shutdown -------------------------------------------
    def start(self) -> AcquisitionServer:
        # bind HTTP first: a taken port is a hard startup error
        self._httpd = ThreadingHTTPServer(
            (self.config.http_host, self.config.http_port), _make_handler(self)
        )
        self._httpd.daemon_threads = True
        if self.config.vsd_dir is not None:
            loaded, self.load_failures = self.loader.load_directory(self.config.vsd_dir)
            log.info("loaded %d virtual sensor(s): %s", len(loaded), ", ".join(loaded) or "-")
        if not self.loader.sensors:
            log.warning("no virtual sensors loaded; serving the HTTP API only")
        self._http_thread = threading.Thread(
            target=self._httpd.serve_forever, kwargs={"poll_interval": 0.1},
            name="http-api", daemon=True,
        )
        self._http_thread.start()
        log.info("HTTP API on http://%s:%d", *self.http_address[:2])
        return self

    @property
    def http_address(self) -> tuple:
        return self._httpd.server_address if self._httpd else None

    def wrapper_for(self, sensor_name: str) -> AndroidWrapper | None:
        """First wrapper feeding ``sensor_name`` (handy for finding its bound port)."""
        sensor = self.loader.get(sensor_name)
        if sensor is None or not sensor.queries:
            return None
        return self.repository.get(sensor.queries[0][1])

    def stop(self) -> None:
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
            self._httpd = None
        self.loader.shutdown()

    def __enter__(self) -> AcquisitionServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()

    # -- API views ----------------------------------------------------
    def list_sensors(self) -> list[dict]:
        out = []
        for name, vs in sorted(self.loader.sensors.items()):
            schemas = vs.buffer.schemas()
            if schemas:
                present = set().union(*(s.names for s in schemas.values()))
                fields = [f for f in ALL_FIELDS if f in present]
            else:
                fields = []
            out.append(
                {
                    "name": name,
                    "fields": fields,
                    "count": len(vs.buffer),
                    "total": vs.buffer.total_appended,
                    "sources": {str(k): list(s.names) for k, s in schemas.items()},
                }
            )
        return out

    def latest(self, name: str, n: int) -> list[dict] | None:
        vs = self.loader.get(name)
        if vs is None:
            return None
        return [e.as_dict() for e in vs.buffer.query_latest(n)]


def serve(config: ServerConfig) -> AcquisitionServer:
    return AcquisitionServer(config).start()


def _make_handler(server: AcquisitionServer):
    class Handler(BaseHTTPRequestHandler):
        server_version = "gsnbridge"

        def do_GET(self) -> None:
            url = urlsplit(self.path)
            parts = [unquote(p) for p in url.path.strip("/").split("/") if p]
            if parts == ["sensors"]:
                return self._send(HTTPStatus.OK, server.list_sensors())
            if len(parts) == 3 and parts[0] == "sensors" and parts[2] == "latest":
                raw = parse_qs(url.query).get("n", [str(DEFAULT_LATEST)])[-1]
                try:
                    n = int(raw)
                    if n < 0:
                        raise ValueError
                except ValueError:
                    return self._send(HTTPStatus.BAD_REQUEST, {"error": f"bad n: {raw!r}"})
                body = server.latest(parts[1], n)
                if body is None:
                    return self._send(HTTPStatus.NOT_FOUND, {"error": f"no sensor {parts[1]!r}"})
                return self._send(HTTPStatus.OK, body)
            self._send(HTTPStatus.NOT_FOUND, {"error": "not found"})

        def _send(self, status: HTTPStatus, payload) -> None:
            body = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt, *args) -> None:
            log.debug("http %s " + fmt, self.client_address[0], *args)

    return Handler
