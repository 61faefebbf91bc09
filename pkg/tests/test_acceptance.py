"""Exit criteria for the build, one test per criterion.

Run alone with ``pytest tests/test_acceptance.py``; the terminal summary
prints one PASS/FAIL line per criterion.
"""

import socket
import struct
import threading
import time

import numpy as np
import pytest

from gsnbridge.client import Generator, SimulationConfig, generate_samples, run_client, run_clients
from gsnbridge.errors import LoadError
from gsnbridge.energy import DEFAULT_PROFILE, energy_per_minute, ratio_report
from gsnbridge.protocol import (
    MetadataPacket,
    decode_metadata,
    encode_metadata,
    expected_payload_bytes,
)
from gsnbridge.runtime import (
    AcquireOutcome,
    StreamSourceQuery,
    VirtualSensorLoader,
    WrapperConnectionRequest,
    WrapperRepository,
    parse_vsd,
)
from gsnbridge.server import default_repository

from conftest import FIG4_FLAGS, connect, source_prefix, wait_for

pytestmark = pytest.mark.acceptance


def per_source(buffer, report):
    prefix = source_prefix(report)
    return [e for e in buffer.snapshot() if str(e.source_id).startswith(prefix)]


def expected_bits(config) -> list[list[int]]:
    return [row.view(np.uint32).tolist() for row in generate_samples(config)]


def stored_bits(elements) -> list[list[int]]:
    return [e.values.view(np.uint32).tolist() for e in elements]


def test_criterion_1_metadata_codec_exhaustive():
    t0 = time.perf_counter()
    for word in range(1, 1 << 12):
        p = MetadataPacket.from_word(word)
        wire = encode_metadata(p)
        assert len(wire) == 2
        assert decode_metadata(wire) == p
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"round trip of 4095 flag sets took {elapsed:.3f}s"
    assert encode_metadata(MetadataPacket.all_enabled()) == bytes.fromhex("0fff")
    assert encode_metadata(MetadataPacket(FIG4_FLAGS)) == bytes.fromhex("02fb")


def test_criterion_2_payload_bounds():
    sizes = {}
    for word in range(1, 1 << 12):
        p = MetadataPacket.from_word(word)
        sizes[word] = expected_payload_bytes(p)
        assert sizes[word] % 4 == 0
    assert min(sizes.values()) == 4
    assert max(sizes.values()) == 108
    assert [w for w, s in sizes.items() if s == 108] == [0xFFF]
    assert expected_payload_bytes(MetadataPacket(FIG4_FLAGS)) == 84


def test_criterion_3_wrapper_lifecycle():
    repo = default_repository()
    try:
        # created / reused: two VSDs with identical connection requests
        loader = VirtualSensorLoader(repo)
        text = (
            '<virtual-sensor name="{}"><address wrapper="android">'
            '<predicate key="host">127.0.0.1</predicate><predicate key="port">0</predicate>'
            "</address></virtual-sensor>"
        )
        wcr = WrapperConnectionRequest.of("android", host="127.0.0.1", port="0")
        qa = StreamSourceQuery("a", "s", lambda e: None)
        assert repo.acquire(wcr, qa) is AcquireOutcome.CREATED
        assert repo.acquire(wcr, StreamSourceQuery("b", "s", lambda e: None)) is AcquireOutcome.REUSED
        assert repo.acquire(WrapperConnectionRequest.of("mica2"), qa) is AcquireOutcome.UNAVAILABLE
        repo.shutdown()

        loader.load(parse_vsd(text.format("p1")))
        loader.load(parse_vsd(text.format("p2")))
        assert len(repo) == 1
        assert list(repo.registration_counts().values()) == [2]

        # unknown wrapper: load fails, nothing left behind
        before = repo.registration_counts()
        with pytest.raises(LoadError):
            loader.load(parse_vsd('<virtual-sensor name="m"><address wrapper="mica2"/></virtual-sensor>'))
        assert repo.registration_counts() == before
        assert set(loader.sensors) == {"p1", "p2"}
        fresh = WrapperRepository({})
        with pytest.raises(LoadError):
            VirtualSensorLoader(fresh).load(parse_vsd(text.format("p3")))
        assert len(fresh) == 0
        loader.shutdown()
        assert len(repo) == 0
    finally:
        repo.shutdown()


def test_criterion_4_end_to_end_fidelity(phone_server):
    srv, port = phone_server
    config = SimulationConfig(
        "127.0.0.1", port, MetadataPacket.from_names(["accelerometer", "gyroscope", "light"]),
        frequency=20.0, count=200, generator=Generator("noise", (-20.0, 20.0)), seed=42,
    )
    t0 = time.monotonic()
    report = run_client(config)
    buf = srv.loader.get("phone1").buffer
    assert wait_for(lambda: buf.total_appended == 200)
    elapsed = time.monotonic() - t0
    assert report.completed and report.packets_sent == 200
    elements = per_source(buf, report)
    assert len(elements) == 200 == buf.total_appended
    assert stored_bits(elements) == expected_bits(config)
    assert elapsed < 15.0


def test_criterion_5_multi_client_isolation(phone_server):
    srv, port = phone_server
    selections = [
        MetadataPacket.from_names(["light"]),
        MetadataPacket(FIG4_FLAGS),
        MetadataPacket.all_enabled(),
        MetadataPacket.from_names(["rotation_vector", "pressure", "humidity"]),
    ]
    configs = [
        SimulationConfig("127.0.0.1", port, sel, frequency=50.0, count=100,
                         generator=Generator("noise", (-1e3, 1e3)), seed=100 + i)
        for i, sel in enumerate(selections)
    ]
    reports = run_clients(configs)
    buf = srv.loader.get("phone1").buffer
    assert wait_for(lambda: buf.total_appended == 400)
    for config, report in zip(configs, reports):
        assert report.completed, report
        elements = per_source(buf, report)
        assert {e.schema.selection for e in elements} == {config.selection}
        assert stored_bits(elements) == expected_bits(config)


def test_criterion_6_energy_model():
    rows = {r.sensor: r for r in ratio_report(DEFAULT_PROFILE)}
    assert abs(rows["rotation_vector"].vs_low - 21.0) <= 1e-9
    assert abs(rows["rotation_vector"].vs_mid - 5.6) <= 1e-9

    rng = np.random.default_rng(6)
    for _ in range(500):
        word = int(rng.integers(1, 4096))
        p = MetadataPacket.from_word(word)
        f1, f2 = sorted(rng.uniform(0.1, 200.0, size=2))
        if f1 < f2:
            assert energy_per_minute(DEFAULT_PROFILE, p, f1).total_mj < energy_per_minute(DEFAULT_PROFILE, p, f2).total_mj
        bigger = MetadataPacket.from_word(word | 1 << int(rng.integers(0, 12)))
        assert energy_per_minute(DEFAULT_PROFILE, bigger, f1).total_mj >= energy_per_minute(DEFAULT_PROFILE, p, f1).total_mj

    for word in (0x001, 0x200, 0x2FB, 0xFFF):
        for hz in range(1, 101):
            b = energy_per_minute(DEFAULT_PROFILE, MetadataPacket.from_word(word), hz)
            assert b.network_mj > b.cpu_mj


def _closed(sock):
    sock.settimeout(5)
    try:
        return sock.recv(1) == b""
    except ConnectionResetError:
        return True


def test_criterion_7_robustness(phone_server):
    srv, port = phone_server
    good = SimulationConfig(
        "127.0.0.1", port, MetadataPacket(FIG4_FLAGS), frequency=50.0, count=150,
        generator=Generator("noise", (0, 1)), seed=7,
    )
    result = {}
    t = threading.Thread(target=lambda: result.setdefault("r", run_client(good)))
    t.start()
    light = MetadataPacket.from_names(["light"])
    fig4 = MetadataPacket(FIG4_FLAGS)

    # padding bits set
    with connect(port) as s:
        s.sendall(b"\xf0\x01" + struct.pack(">f", 1.0))
        assert _closed(s)
    # truncated frame then EOF
    with connect(port) as s:
        s.sendall(encode_metadata(fig4) + bytes(84) + bytes(40))
    # mid-frame disconnect with RST
    s = connect(port)
    s.sendall(encode_metadata(light) + struct.pack(">f", 2.0) + b"\x00\x00")
    s.setsockopt(socket.SOL_SOCKET, socket.SO_LINGER, struct.pack("ii", 1, 0))
    s.close()
    # metadata cut short
    with connect(port) as s:
        s.sendall(b"\x02")

    t.join(timeout=30)
    report = result["r"]
    buf = srv.loader.get("phone1").buffer
    assert wait_for(lambda: buf.total_appended == 150 + 1 + 1)
    assert report.completed
    assert stored_bits(per_source(buf, report)) == expected_bits(good)
    faulty = [e for e in buf.snapshot() if not str(e.source_id).startswith(source_prefix(report))]
    assert sorted(e.values.tolist() for e in faulty) == [[0.0] * 21, [2.0]]

    # server still healthy afterwards
    after = run_client(SimulationConfig("127.0.0.1", port, light, 50.0, count=3,
                                        generator=Generator("constant", (9.0,))))
    assert after.completed
    assert wait_for(lambda: buf.total_appended == 155)
    assert srv.wrapper_for("phone1").state.value == "running"
