import socket
import textwrap
import time
from pathlib import Path

import pytest

from gsnbridge.protocol import MetadataPacket
from gsnbridge.server import AcquisitionServer, ServerConfig

# accelerometer, gravity, linear acceleration, rotation vector, magnetic field,
# orientation, proximity, light
FIG4_FLAGS = (True, True, False, True, True, True, True, True, False, True, False, False)


@pytest.fixture
def fig4():
    return MetadataPacket(FIG4_FLAGS)


def vsd_xml(name: str, wrapper: str = "android", port: int | str = 0, extra: str = "", storage: str = "") -> str:
    return textwrap.dedent(
        f"""\
        <virtual-sensor name="{name}">
          {storage}
          <streams>
            <stream name="input">
              <source alias="phone">
                <address wrapper="{wrapper}">
                  <predicate key="host">127.0.0.1</predicate>
                  <predicate key="port">{port}</predicate>
                </address>
              </source>
              {extra}
            </stream>
          </streams>
        </virtual-sensor>
        """
    )


@pytest.fixture
def vsd_dir(tmp_path) -> Path:
    d = tmp_path / "virtual-sensors"
    d.mkdir()
    return d


@pytest.fixture
def make_server(tmp_path):
    servers = []

    def factory(vsd_dir=None, **kw) -> AcquisitionServer:
        kw.setdefault("http_port", 0)
        srv = AcquisitionServer(ServerConfig(vsd_dir=vsd_dir, **kw)).start()
        servers.append(srv)
        return srv

    yield factory
    for srv in servers:
        srv.stop()


@pytest.fixture
def phone_server(make_server, vsd_dir):
    """Server with one android virtual sensor ``phone1`` on an ephemeral port."""
    (vsd_dir / "phone1.xml").write_text(vsd_xml("phone1"))
    srv = make_server(vsd_dir)
    port = srv.wrapper_for("phone1").address[1]
    return srv, port


def connect(port: int) -> socket.socket:
    s = socket.create_connection(("127.0.0.1", port), timeout=5)
    s.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return s


def wait_for(predicate, timeout: float = 5.0, interval: float = 0.01):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        if predicate():
            return True
        time.sleep(interval)
    return predicate()


def source_prefix(report) -> str:
    host, port = report.local_address[:2]
    return f"{host}:{port}#"


# -- acceptance summary: one line per criterion -------------------------------
_criteria: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _criteria[name] = (report.outcome, getattr(report, "duration", 0.0))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria, key=lambda n: int(n.split("_")[2])):
        outcome, dur = _criteria[name]
        mark = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {name} ({dur:.2f}s)")
