"""Command line entry point: ``gsnbridge {server,client,energy}``."""

from __future__ import annotations

import argparse
import csv
import logging
import signal
import sys
import threading
from pathlib import Path

from gsnbridge.client import (
    Generator,
    SimulationConfig,
    identify_supported_sensors,
    run_clients,
)
from gsnbridge.energy import DEFAULT_PROFILE, PowerProfile, energy_per_minute
from gsnbridge.errors import ConfigError
from gsnbridge.protocol import SENSORS, MetadataPacket
from gsnbridge.server import AcquisitionServer, ServerConfig

log = logging.getLogger("gsnbridge")

LOG_FORMAT = "%(asctime)s level=%(levelname)s logger=%(name)s msg=%(message)r"


def _split_sensors(text: str) -> list[str]:
    if text.strip().lower() == "all":
        return [s.name for s in SENSORS]
    return [s for s in (p.strip() for p in text.split(",")) if s]


def _hostport(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise argparse.ArgumentTypeError(f"expected host:port, got {text!r}")
    return host or "127.0.0.1", int(port)


def _hz_range(text: str) -> tuple[float, float]:
    lo, sep, hi = text.partition(":")
    try:
        lo_f, hi_f = float(lo), float(hi if sep else lo)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    if lo_f <= 0 or hi_f < lo_f:
        raise argparse.ArgumentTypeError("need 0 < LO <= HI")
    return lo_f, hi_f


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsnbridge", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("server", help="run the acquisition server")
    s.add_argument("--vsd-dir", type=Path, required=True)
    s.add_argument("--http-port", type=int, default=8080)
    s.add_argument("--http-host", default="127.0.0.1")
    s.add_argument("--data-dir", type=Path)
    s.add_argument("--idle-timeout-secs", type=float, default=60.0)

    c = sub.add_parser("client", help="emulate phone clients")
    c.add_argument("--server", type=_hostport, required=True, metavar="HOST:PORT")
    c.add_argument("--sensors", required=True, help="comma separated names/aliases, or 'all'")
    c.add_argument("--hz", type=float, required=True)
    n = c.add_mutually_exclusive_group(required=True)
    n.add_argument("--count", type=int)
    n.add_argument("--secs", type=float)
    c.add_argument("--gen", default="constant:0", help="constant:V | sine:A:P | noise:LO:HI | replay:CSV")
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--clients", type=int, default=1)
    c.add_argument("--profile", default="all", help="'all' or a file listing the device's sensors")

    e = sub.add_parser("energy", help="tabulate the energy model")
    e.add_argument("--sensors", required=True)
    e.add_argument("--hz-range", type=_hz_range, default=(1.0, 50.0))
    e.add_argument("--hz-step", type=float, default=1.0)
    e.add_argument("--profile", default="default", help="'default' or a TOML file")
    e.add_argument("--out", choices=("csv", "table"), default="csv")
    e.add_argument("-o", "--output", type=Path, help="write to file instead of stdout")
    return p


def _device_profile(arg: str) -> list[str]:
    if arg == "all":
        return [s.name for s in SENSORS]
    text = Path(arg).read_text()
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def cmd_server(args) -> int:
    config = ServerConfig(
        vsd_dir=args.vsd_dir,
        http_host=args.http_host,
        http_port=args.http_port,
        data_dir=args.data_dir,
        idle_timeout=args.idle_timeout_secs,
    )
    if not args.vsd_dir.is_dir():
        log.warning("VSD directory %s does not exist", args.vsd_dir)
    done = threading.Event()
    for sig in (signal.SIGINT, signal.SIGTERM):
        signal.signal(sig, lambda *_: done.set())
    try:
        server = AcquisitionServer(config).start()
    except OSError as exc:
        log.error("startup failed: %s", exc)
        return 1
    done.wait()
    log.info("shutting down")
    server.stop()
    return 0


def cmd_client(args) -> int:
    host, port = args.server
    try:
        selection = identify_supported_sensors(
            _device_profile(args.profile), _split_sensors(args.sensors)
        )
        generator = Generator.parse(args.gen)
        if args.clients < 1:
            raise ConfigError("--clients must be >= 1")
        configs = [
            SimulationConfig(host, port, selection, args.hz, args.count, args.secs,
                             generator, args.seed + i)
            for i in range(args.clients)
        ]
    except (ConfigError, OSError) as exc:
        log.error("%s", exc)
        return 2
    stop = threading.Event()
    signal.signal(signal.SIGINT, lambda *_: stop.set())
    status = 0
    for i, result in enumerate(run_clients(configs, stop)):
        if isinstance(result, Exception):
            log.error("client %d: %s", i, result)
            status = 1
            continue
        print(
            f"client={i} packets={result.packets_sent} bytes={result.bytes_sent} "
            f"elapsed={result.elapsed:.3f}s mean_hz={result.mean_frequency:.3f} "
            f"completed={result.completed}"
        )
        if result.error:
            status = 1
    return status


def energy_rows(profile: PowerProfile, selection: MetadataPacket, lo: float, hi: float, step: float):
    if step <= 0:
        raise ConfigError("--hz-step must be > 0")
    k = 0
    while (hz := lo + k * step) <= hi + 1e-9:
        b = energy_per_minute(profile, selection, hz)
        yield hz, b.sensor_mj, b.cpu_mj, b.network_mj, b.total_mj
        k += 1


def cmd_energy(args) -> int:
    try:
        profile = DEFAULT_PROFILE if args.profile == "default" else PowerProfile.load(args.profile)
        selection = MetadataPacket.from_names(_split_sensors(args.sensors))
        rows = list(energy_rows(profile, selection, *args.hz_range, args.hz_step))
    except (ConfigError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2
    fh = args.output.open("w", newline="") if args.output else sys.stdout
    try:
        header = ("hz", "sensor_mJ", "cpu_mJ", "network_mJ", "total_mJ")
        if args.out == "csv":
            w = csv.writer(fh)
            w.writerow(header)
            w.writerows([f"{v:g}" if i == 0 else f"{v:.6f}" for i, v in enumerate(r)] for r in rows)
        else:
            fh.write("".join(f"{h:>12}" for h in header) + "\n")
            for r in rows:
                fh.write("".join(f"{v:>12.3f}" for v in r) + "\n")
    finally:
        if args.output:
            fh.close()
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose > 1 else logging.INFO if args.verbose else logging.WARNING
    if args.command == "server":
        level = min(level, logging.INFO)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr)
    return {"server": cmd_server, "client": cmd_client, "energy": cmd_energy}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
