"""Client-side energy estimate per minute of sensing.

    sensor  = sum(current_mA of enabled sensors) * voltage_V * 60 s
    cpu     = cpu_mJ_per_sample * 60 * f
    network = (radio_mJ_per_packet + radio_mJ_per_byte * frame_bytes) * 60 * f

All results in mJ per minute. Absolute values depend on the hardware; the
defaults are chosen so relative costs and orderings are meaningful.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping

from gsnbridge.errors import ConfigError
from gsnbridge.protocol import SENSORS, MetadataPacket, expected_payload_bytes, lookup_name

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SECONDS_PER_MINUTE = 60.0

DEFAULT_CURRENTS_MA: dict[str, float] = {
    "accelerometer": 0.20,
    "gravity": 0.20,
    "gyroscope": 0.20,  # assumed: motion class, no published figure
    "linear_acceleration": 0.20,
    "rotation_vector": 4.20,
    "magnetic_field": 4.00,
    "orientation": 4.20,
    "proximity": 0.75,
    "temperature": 0.75,  # assumed: environment class
    "light": 0.75,
    "pressure": 0.75,  # assumed
    "humidity": 0.75,  # assumed
}

ASSUMED_CURRENTS = frozenset({"gyroscope", "temperature", "pressure", "humidity"})


@dataclass(frozen=True)
class PowerProfile:
    currents_ma: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_CURRENTS_MA))
    voltage: float = 3.7
    cpu_mj_per_sample: float = 1.0
    radio_mj_per_byte: float = 0.002
    radio_mj_per_packet: float = 5.0

    def __post_init__(self) -> None:
        currents = dict(DEFAULT_CURRENTS_MA)
        for name, value in dict(self.currents_ma).items():
            try:
                currents[lookup_name(name).name] = float(value)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        object.__setattr__(self, "currents_ma", currents)
        for f in fields(self):
            if f.name != "currents_ma" and getattr(self, f.name) < 0:
                raise ConfigError(f"{f.name} must be >= 0")
        for name, value in currents.items():
            if value < 0:
                raise ConfigError(f"current for {name} must be >= 0")

    def current(self, sensor: str | int) -> float:
        name = SENSORS[sensor - 1].name if isinstance(sensor, int) else lookup_name(sensor).name
        return self.currents_ma[name]

    @classmethod
    def from_mapping(cls, data: Mapping) -> PowerProfile:
        data = dict(data)
        currents = data.pop("currents", data.pop("currents_ma", {}))
        known = {f.name for f in fields(cls)} - {"currents_ma"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown profile keys: {', '.join(sorted(unknown))}")
        return replace(cls(currents_ma=currents), **{k: float(v) for k, v in data.items()})

    @classmethod
    def load(cls, path: str | Path) -> PowerProfile:
        """Read overrides from TOML: top-level scalars plus a ``[currents]`` table."""
        with open(path, "rb") as fh:
            try:
                return cls.from_mapping(tomllib.load(fh))
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None


DEFAULT_PROFILE = PowerProfile()


@dataclass(frozen=True)
class EnergyBreakdown:
    sensor_mj: float
    cpu_mj: float
    network_mj: float

    @property
    def total_mj(self) -> float:
        return self.sensor_mj + self.cpu_mj + self.network_mj


def selection_current(profile: PowerProfile, selection: MetadataPacket) -> float:
    return sum(profile.current(i) for i in selection.indices)


def energy_per_minute(
    profile: PowerProfile, selection: MetadataPacket, frequency: float
) -> EnergyBreakdown:
    if not frequency > 0:
        raise ConfigError(f"frequency must be > 0, got {frequency}")
    per_minute = SECONDS_PER_MINUTE * frequency
    sensor = selection_current(profile, selection) * profile.voltage * SECONDS_PER_MINUTE
    cpu = profile.cpu_mj_per_sample * per_minute
    per_packet = profile.radio_mj_per_packet + profile.radio_mj_per_byte * expected_payload_bytes(
        selection
    )
    return EnergyBreakdown(sensor, cpu, per_packet * per_minute)


@dataclass(frozen=True)
class RatioRow:
    sensor: str
    current_ma: float
    vs_low: float
    vs_mid: float


def ratio_report(
    profile: PowerProfile, low: str = "accelerometer", mid: str = "light"
) -> list[RatioRow]:
    """Each sensor's current relative to the 0.20 mA class (``low``) and 0.75 mA class (``mid``)."""
    lo, mi = profile.current(low), profile.current(mid)
    if lo <= 0 or mi <= 0:
        raise ConfigError("ratio baselines must have a nonzero current")
    return [
        RatioRow(s.name, profile.current(s.name), profile.current(s.name) / lo, profile.current(s.name) / mi)
        for s in SENSORS
    ]


def sweep(
    profile: PowerProfile, selection: MetadataPacket, frequencies: Iterable[float]
) -> list[tuple[float, EnergyBreakdown]]:
    return [(f, energy_per_minute(profile, selection, f)) for f in frequencies]
