"""Output schemas, stream elements and per-virtual-sensor storage."""

from __future__ import annotations

import csv
import datetime as dt
import functools
import threading
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np

from gsnbridge.errors import ValidationError
from gsnbridge.protocol import SENSORS, MetadataPacket

_SUFFIXES = ("x", "y", "z", "scalar")


@dataclass(frozen=True)
class DataField:
    name: str
    unit: str
    type: str = "float32"


@dataclass(frozen=True)
class OutputSchema:
    fields: tuple[DataField, ...]
    selection: MetadataPacket

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.fields)

    def __len__(self) -> int:
        return len(self.fields)


def _sensor_fields(sensor) -> tuple[DataField, ...]:
    if sensor.components == 1:
        return (DataField(sensor.name, sensor.unit),)
    return tuple(
        DataField(f"{sensor.name}_{sfx}", sensor.unit)
        for sfx in _SUFFIXES[: sensor.components]
    )


@functools.lru_cache(maxsize=None)
def create_schema(packet: MetadataPacket) -> OutputSchema:
    """Build the output schema for a flag set; cached, so equal packets share one object."""
    fields: list[DataField] = []
    for sensor in packet.sensors:
        fields.extend(_sensor_fields(sensor))
    return OutputSchema(tuple(fields), packet)


#: every field the protocol can produce, in canonical order (CSV header).
ALL_FIELDS: tuple[str, ...] = create_schema(MetadataPacket.all_enabled()).names


@dataclass(frozen=True)
class StreamElement:
    timestamp: int
    values: np.ndarray
    source_id: Hashable
    schema: OutputSchema = field(repr=False)

    @property
    def iso_timestamp(self) -> str:
        return format_timestamp(self.timestamp)

    def as_dict(self) -> dict:
        return {
            "timestamp": self.iso_timestamp,
            "timestamp_ms": self.timestamp,
            "source": str(self.source_id),
            "fields": dict(zip(self.schema.names, (float(v) for v in self.values))),
        }


def format_timestamp(ms: int) -> str:
    return dt.datetime.fromtimestamp(ms / 1000, tz=dt.timezone.utc).isoformat(
        timespec="milliseconds"
    )


def map_sensor_data(
    schema: OutputSchema,
    groups: Sequence[Sequence[float]],
    source_id: Hashable,
    now: int,
) -> StreamElement:
    sensors = schema.selection.sensors
    if len(groups) != len(sensors):
        raise ValidationError(f"expected {len(sensors)} groups, got {len(groups)}")
    for sensor, group in zip(sensors, groups):
        if len(group) != sensor.components:
            raise ValidationError(
                f"{sensor.name} takes {sensor.components} values, got {len(group)}"
            )
    if groups:
        values = np.concatenate([np.asarray(g, dtype=np.float32) for g in groups])
    else:
        values = np.empty(0, dtype=np.float32)
    values.flags.writeable = False
    return StreamElement(int(now), values, source_id, schema)


class StreamBuffer:
    """Bounded ring buffer of stream elements for one virtual sensor.

    Several client sources may feed the same buffer, each with its own
    schema. The first element seen from a source pins that source's
    schema; later elements from it must match.
    """

    def __init__(self, capacity: int = 1000, csv_path: str | Path | None = None):
        if capacity < 1:
            raise ValidationError("buffer capacity must be >= 1")
        self.capacity = capacity
        self._items: deque[StreamElement] = deque(maxlen=capacity)
        self._schemas: dict[Hashable, OutputSchema] = {}
        self._lock = threading.Lock()
        self.total_appended = 0
        self._csv = CsvSink(csv_path) if csv_path is not None else None

    def bind_source(self, source_id: Hashable, schema: OutputSchema) -> None:
        with self._lock:
            self._schemas[source_id] = schema

    def append(self, element: StreamElement) -> None:
        schema = element.schema
        if len(element.values) != len(schema):
            raise ValidationError(
                f"element has {len(element.values)} values, schema has {len(schema)}"
            )
        with self._lock:
            pinned = self._schemas.setdefault(element.source_id, schema)
            if pinned != schema:
                raise ValidationError(f"schema mismatch for source {element.source_id!r}")
            self._items.append(element)
            self.total_appended += 1
            if self._csv is not None:
                self._csv.write(element)

    def query_latest(self, n: int) -> list[StreamElement]:
        if n < 0:
            raise ValidationError("n must be >= 0")
        with self._lock:
            if n == 0:
                return []
            items = list(self._items)
        return items[::-1][:n]

    def snapshot(self) -> list[StreamElement]:
        """All retained elements, oldest first."""
        with self._lock:
            return list(self._items)

    def schemas(self) -> dict[Hashable, OutputSchema]:
        with self._lock:
            return dict(self._schemas)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)

    def close(self) -> None:
        if self._csv is not None:
            self._csv.close()


def store_append(buffer: StreamBuffer, element: StreamElement) -> None:
    buffer.append(element)


def query_latest(buffer: StreamBuffer, n: int) -> list[StreamElement]:
    return buffer.query_latest(n)


class CsvSink:
    """Append-only CSV log: timestamp, source, then every protocol field.

    Fields a source did not enable are left empty so rows from
    heterogeneous clients share one header.
    """

    header = ("timestamp", "source", *ALL_FIELDS)

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        new = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = self.path.open("a", newline="")
        self._writer = csv.writer(self._fh)
        if new:
            self._writer.writerow(self.header)
            self._fh.flush()

    def write(self, element: StreamElement) -> None:
        row = dict(zip(element.schema.names, element.values))
        self._writer.writerow(
            [element.iso_timestamp, element.source_id]
            + [repr(float(row[f])) if f in row else "" for f in ALL_FIELDS]
        )
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()
