"""Sensor registry and the two-phase wire codec.

Metadata packet (sent once per connection)::

    2 bytes, big-endian uint16
    bit k (k = 0 is the least significant bit) -> sensor index k + 1, k in 0..11
    bits 12..15 must be zero; at least one of bits 0..11 must be set

Sensor data packet (repeated)::

    N x IEEE-754 binary32, big-endian, no header
    groups in ascending sensor index, each group holding ``components`` floats

See ``docs/wire-format.md`` for worked examples.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

from gsnbridge.errors import FramingError, MalformedPacketError, ValidationError

__all__ = [
    "SENSORS",
    "NUM_SENSORS",
    "METADATA_SIZE",
    "MAX_FLOATS",
    "SensorKind",
    "SensorDescriptor",
    "MetadataPacket",
    "registry_lookup",
    "lookup_name",
    "encode_metadata",
    "decode_metadata",
    "expected_payload_bytes",
    "encode_readings",
    "decode_readings",
]

NUM_SENSORS = 12
METADATA_SIZE = 2
FLOAT_SIZE = 4
_FLAG_MASK = (1 << NUM_SENSORS) - 1


class SensorKind(str, enum.Enum):
    MOTION = "motion"
    POSITION = "position"
    ENVIRONMENT = "environment"


@dataclass(frozen=True)
class SensorDescriptor:
    index: int
    name: str
    kind: SensorKind
    components: int
    unit: str
    aliases: tuple[str, ...] = ()


SENSORS: tuple[SensorDescriptor, ...] = (
    SensorDescriptor(1, "accelerometer", SensorKind.MOTION, 3, "m/s^2", ("accel", "acc")),
    SensorDescriptor(2, "gravity", SensorKind.MOTION, 3, "m/s^2", ("grav",)),
    SensorDescriptor(3, "gyroscope", SensorKind.MOTION, 3, "rad/s", ("gyro",)),
    SensorDescriptor(4, "linear_acceleration", SensorKind.MOTION, 3, "m/s^2", ("linacc", "linear")),
    SensorDescriptor(5, "rotation_vector", SensorKind.MOTION, 4, "unitless", ("rotvec", "rotation")),
    SensorDescriptor(6, "magnetic_field", SensorKind.POSITION, 3, "uT", ("magnetic", "mag")),
    SensorDescriptor(7, "orientation", SensorKind.POSITION, 3, "deg", ("orient",)),
    SensorDescriptor(8, "proximity", SensorKind.POSITION, 1, "cm", ("prox",)),
    SensorDescriptor(9, "temperature", SensorKind.ENVIRONMENT, 1, "degC", ("temp",)),
    SensorDescriptor(10, "light", SensorKind.ENVIRONMENT, 1, "lx", ("lux",)),
    SensorDescriptor(11, "pressure", SensorKind.ENVIRONMENT, 1, "hPa", ("baro",)),
    SensorDescriptor(12, "humidity", SensorKind.ENVIRONMENT, 1, "%", ("hum",)),
)

MAX_FLOATS = sum(s.components for s in SENSORS)

_BY_NAME = {}
for _s in SENSORS:
    _BY_NAME[_s.name] = _s
    _BY_NAME[_s.name.replace("_", " ")] = _s
    _BY_NAME[_s.name.replace("_", "-")] = _s
    for _a in _s.aliases:
        _BY_NAME[_a] = _s
del _s


def registry_lookup(index: int) -> SensorDescriptor:
    if isinstance(index, bool) or not isinstance(index, int) or not 1 <= index <= NUM_SENSORS:
        raise ValidationError(f"sensor index must be in 1..{NUM_SENSORS}, got {index!r}")
    return SENSORS[index - 1]


def lookup_name(name: str) -> SensorDescriptor:
    """Resolve a canonical sensor name or a short alias (``accel``, ``light``...)."""
    try:
        return _BY_NAME[name.strip().lower()]
    except KeyError:
        raise ValidationError(f"unknown sensor {name!r}") from None


@dataclass(frozen=True)
class MetadataPacket:
    """Which of the 12 sensors a client streams. ``flags[i]`` is sensor ``i + 1``."""

    flags: tuple[bool, ...]

    def __post_init__(self) -> None:
        flags = tuple(bool(f) for f in self.flags)
        if len(flags) != NUM_SENSORS:
            raise ValidationError(f"expected {NUM_SENSORS} flags, got {len(flags)}")
        if not any(flags):
            raise ValidationError("metadata packet must enable at least one sensor")
        object.__setattr__(self, "flags", flags)

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> MetadataPacket:
        flags = [False] * NUM_SENSORS
        for i in indices:
            flags[registry_lookup(i).index - 1] = True
        return cls(tuple(flags))

    @classmethod
    def from_names(cls, names: Iterable[str]) -> MetadataPacket:
        return cls.from_indices(lookup_name(n).index for n in names)

    @classmethod
    def from_word(cls, word: int) -> MetadataPacket:
        return cls(tuple(bool(word >> k & 1) for k in range(NUM_SENSORS)))

    @classmethod
    def all_enabled(cls) -> MetadataPacket:
        return cls((True,) * NUM_SENSORS)

    @property
    def word(self) -> int:
        return sum(1 << k for k, f in enumerate(self.flags) if f)

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(k + 1 for k, f in enumerate(self.flags) if f)

    @property
    def sensors(self) -> tuple[SensorDescriptor, ...]:
        return tuple(SENSORS[i - 1] for i in self.indices)

    @property
    def float_count(self) -> int:
        return sum(s.components for s in self.sensors)

    def __contains__(self, index: int) -> bool:
        return 1 <= index <= NUM_SENSORS and self.flags[index - 1]


def encode_metadata(packet: MetadataPacket) -> bytes:
    return struct.pack(">H", packet.word)


def decode_metadata(data: bytes) -> MetadataPacket:
    if len(data) != METADATA_SIZE:
        raise FramingError(f"metadata packet is {METADATA_SIZE} bytes, got {len(data)}")
    (word,) = struct.unpack(">H", data)
    if word & ~_FLAG_MASK:
        raise MalformedPacketError(f"padding bits 12..15 set in metadata word 0x{word:04X}")
    return MetadataPacket.from_word(word)


def expected_payload_bytes(packet: MetadataPacket) -> int:
    return FLOAT_SIZE * packet.float_count


def _frame_struct(packet: MetadataPacket) -> struct.Struct:
    return struct.Struct(f">{packet.float_count}f")


def encode_readings(packet: MetadataPacket, groups: Sequence[Sequence[float]]) -> bytes:
    """Pack one float group per enabled sensor, in ascending index order.

    Values that are already binary32 (``numpy.float32`` or doubles that are
    exactly representable) pack bit-exactly, NaN payloads included.
    """
    sensors = packet.sensors
    if len(groups) != len(sensors):
        raise ValidationError(f"expected {len(sensors)} sensor groups, got {len(groups)}")
    flat: list[float] = []
    for sensor, group in zip(sensors, groups):
        if len(group) != sensor.components:
            raise ValidationError(
                f"{sensor.name} takes {sensor.components} values, got {len(group)}"
            )
        flat.extend(group)
    return _pack_floats(flat)


def _pack_floats(flat: Sequence[float]) -> bytes:
    import numpy as np

    # struct's 'f' quiets signalling NaNs; numpy keeps the payload.
    return np.asarray(flat, dtype=np.float32).astype(">f4").tobytes()


def decode_readings(packet: MetadataPacket, data: bytes) -> list[tuple[float, ...]]:
    expected = expected_payload_bytes(packet)
    if len(data) != expected:
        raise FramingError(f"data packet must be {expected} bytes, got {len(data)}")
    flat = _unpack_floats(data)
    groups = []
    pos = 0
    for sensor in packet.sensors:
        groups.append(tuple(flat[pos : pos + sensor.components]))
        pos += sensor.components
    return groups


def _unpack_floats(data: bytes):
    import numpy as np

    return list(np.frombuffer(data, dtype=">f4").astype(np.float32))
