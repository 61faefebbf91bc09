"""Phone client emulator.

Sends one metadata packet, then one data frame per tick at a fixed
sampling frequency. Frame contents come from a seeded generator, so the
byte stream for a given config is reproducible.
"""

from __future__ import annotations

import csv
import logging
import math
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from gsnbridge.errors import ConfigError, ValidationError
from gsnbridge.protocol import (
    SENSORS,
    MetadataPacket,
    encode_metadata,
    expected_payload_bytes,
    lookup_name,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Generator:
    kind: str  # constant | sine | noise | replay
    args: tuple = ()

    @classmethod
    def parse(cls, spec: str) -> Generator:
        """``constant:V``, ``sine:AMPLITUDE:PERIOD``, ``noise:LO:HI``, ``replay:PATH``."""
        kind, _, rest = spec.partition(":")
        kind = kind.strip().lower()
        if kind == "replay":
            if not rest:
                raise ConfigError("replay generator needs a CSV path")
            return cls("replay", (rest,))
        try:
            args = tuple(float(a) for a in rest.split(":")) if rest else ()
        except ValueError:
            raise ConfigError(f"bad generator arguments in {spec!r}") from None
        arity = {"constant": 1, "sine": 2, "noise": 2}
        if kind not in arity:
            raise ConfigError(f"unknown generator {kind!r}")
        if len(args) != arity[kind]:
            raise ConfigError(f"{kind} generator takes {arity[kind]} argument(s), got {len(args)}")
        if kind == "sine" and args[1] <= 0:
            raise ConfigError("sine period must be > 0")
        if kind == "noise" and args[0] > args[1]:
            raise ConfigError("noise bounds must satisfy lo <= hi")
        return cls(kind, args)


@dataclass(frozen=True)
class SimulationConfig:
    host: str
    port: int
    selection: MetadataPacket
    frequency: float
    count: int | None = None
    seconds: float | None = None
    generator: Generator = Generator("constant", (0.0,))
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.frequency > 0 or math.isinf(self.frequency):
            raise ConfigError(f"frequency must be > 0, got {self.frequency}")
        if self.count is None and self.seconds is None:
            raise ConfigError("need a sample count or a duration")
        if self.count is not None and self.count < 0:
            raise ConfigError("count must be >= 0")
        if self.seconds is not None and self.seconds < 0:
            raise ConfigError("duration must be >= 0")

    @property
    def total_samples(self) -> int:
        if self.count is not None:
            return self.count
        return int(math.floor(self.seconds * self.frequency + 1e-9))


@dataclass
class SessionReport:
    packets_sent: int = 0
    bytes_sent: int = 0
    elapsed: float = 0.0
    completed: bool = False
    error: str | None = None
    local_address: tuple | None = None
    send_times: list[float] = field(default_factory=list, repr=False)

    @property
    def mean_frequency(self) -> float:
        if len(self.send_times) < 2:
            return 0.0
        span = self.send_times[-1] - self.send_times[0]
        return (len(self.send_times) - 1) / span if span > 0 else 0.0

    @property
    def mean_interval(self) -> float:
        f = self.mean_frequency
        return 1.0 / f if f else 0.0


def identify_supported_sensors(
    profile: Iterable[str | int], requested: Iterable[str | int]
) -> MetadataPacket:
    """Selection of ``requested`` sensors, each of which must be in the device ``profile``."""
    supported = {_resolve(s) for s in profile}
    wanted = [_resolve(s) for s in requested]
    missing = [SENSORS[i - 1].name for i in wanted if i not in supported]
    if missing:
        raise ConfigError(f"sensor(s) not supported by this device: {', '.join(missing)}")
    if not wanted:
        raise ConfigError("no sensors selected")
    return MetadataPacket.from_indices(wanted)


def _resolve(s: str | int) -> int:
    try:
        return s if isinstance(s, int) else lookup_name(s).index
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def _replay_rows(path: str | Path, width: int) -> list[np.ndarray]:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row or not "".join(row).strip():
                continue
            try:
                values = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise ConfigError(f"{path}:{lineno}: non-numeric value") from None
            if len(values) != width:
                raise ConfigError(
                    f"{path}:{lineno}: {len(values)} columns, selection needs {width}"
                )
            rows.append(np.asarray(values, dtype=np.float32))
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    return rows


def generate_samples(config: SimulationConfig) -> Iterator[np.ndarray]:
    """Flat float32 readings, one array per tick, ``config.total_samples`` of them."""
    width = config.selection.float_count
    gen = config.generator
    n = config.total_samples
    if gen.kind == "constant":
        row = np.full(width, gen.args[0], dtype=np.float32)
        for _ in range(n):
            yield row.copy()
    elif gen.kind == "sine":
        amplitude, period = gen.args
        phase = 2 * np.pi * np.arange(width) / width
        for k in range(n):
            t = k / config.frequency
            yield (amplitude * np.sin(2 * np.pi * t / period + phase)).astype(np.float32)
    elif gen.kind == "noise":
        lo, hi = gen.args
        rng = np.random.default_rng(config.seed)
        for _ in range(n):
            yield rng.uniform(lo, hi, size=width).astype(np.float32)
    elif gen.kind == "replay":
        rows = _replay_rows(gen.args[0], width)
        for k in range(n):
            yield rows[k % len(rows)].copy()
    else:
        raise ConfigError(f"unknown generator {gen.kind!r}")


def frame_bytes(samples: np.ndarray) -> bytes:
    return np.asarray(samples, dtype=np.float32).astype(">f4").tobytes()


def wire_stream(config: SimulationConfig) -> Iterator[bytes]:
    """Metadata packet followed by every data frame, exactly as sent."""
    yield encode_metadata(config.selection)
    size = expected_payload_bytes(config.selection)
    for samples in generate_samples(config):
        frame = frame_bytes(samples)
        assert len(frame) == size
        yield frame


def run_client(
    config: SimulationConfig,
    stop: threading.Event | None = None,
    connect_timeout: float = 5.0,
) -> SessionReport:
    """Stream to the server. Raises ``ConnectionError`` if it cannot connect."""
    report = SessionReport()
    stop = stop or threading.Event()
    sock = socket.create_connection((config.host, config.port), timeout=connect_timeout)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    report.local_address = sock.getsockname()
    period = 1.0 / config.frequency
    stream = wire_stream(config)
    start = time.monotonic()
    try:
        metadata = next(stream)
        sock.sendall(metadata)
        report.bytes_sent += len(metadata)
        for k, frame in enumerate(stream):
            # absolute deadlines: tick k goes out at start + k / f
            delay = start + k * period - time.monotonic()
            if delay > 0 and stop.wait(delay):
                break
            if stop.is_set():
                break
            sock.sendall(frame)
            report.send_times.append(time.monotonic())
            report.packets_sent += 1
            report.bytes_sent += len(frame)
        else:
            report.completed = True
    except OSError as exc:
        report.error = str(exc)
        log.warning("connection lost after %d packets: %s", report.packets_sent, exc)
    finally:
        report.elapsed = time.monotonic() - start
        try:
            sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        sock.close()
    return report


def run_clients(configs: Sequence[SimulationConfig], stop: threading.Event | None = None) -> list:
    """Run several independent sessions concurrently.

    Each result is a :class:`SessionReport` or the exception that session raised.
    """
    results: list = [None] * len(configs)

    def worker(i: int) -> None:
        try:
            results[i] = run_client(configs[i], stop)
        except Exception as exc:
            results[i] = exc

    threads = [threading.Thread(target=worker, args=(i,), daemon=True) for i in range(len(configs))]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    return results
