"""Virtual sensor loader: turns definitions into live sensors backed by wrappers."""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from pathlib import Path

from gsnbridge.datamodel import StreamBuffer
from gsnbridge.errors import LoadError
from gsnbridge.runtime.repository import AcquireOutcome, WrapperRepository
from gsnbridge.runtime.vsd import VirtualSensorDefinition, load_vsd_file
from gsnbridge.runtime.wrapper import StreamSourceQuery

log = logging.getLogger(__name__)


@dataclass
class VirtualSensor:
    definition: VirtualSensorDefinition
    buffer: StreamBuffer
    queries: list[tuple[StreamSourceQuery, object]] = field(default_factory=list)

    @property
    def name(self) -> str:
        return self.definition.name


class VirtualSensorLoader:
    def __init__(
        self,
        repository: WrapperRepository,
        data_dir: str | Path | None = None,
        default_history: int = 1000,
    ):
        self.repository = repository
        self.data_dir = Path(data_dir) if data_dir is not None else None
        self.default_history = default_history
        self._sensors: dict[str, VirtualSensor] = {}
        self._lock = threading.Lock()

    @property
    def sensors(self) -> dict[str, VirtualSensor]:
        with self._lock:
            return dict(self._sensors)

    def get(self, name: str) -> VirtualSensor | None:
        with self._lock:
            return self._sensors.get(name)

    def load(self, vsd: VirtualSensorDefinition) -> VirtualSensor:
        """Acquire a wrapper for every stream source or load nothing at all."""
        with self._lock:
            if vsd.name in self._sensors:
                raise LoadError(f"virtual sensor {vsd.name!r} already loaded")
            buffer = StreamBuffer(vsd.history_size or self.default_history, self._csv_path(vsd))
            sensor = VirtualSensor(vsd, buffer)
            for src in vsd.sources:
                query = StreamSourceQuery(vsd.name, src.alias, buffer.append)
                outcome = self.repository.acquire(src.address, query)
                if outcome is AcquireOutcome.UNAVAILABLE:
                    self._rollback(sensor)
                    buffer.close()
                    raise LoadError(
                        f"virtual sensor {vsd.name!r}: stream source {src.alias!r} "
                        f"unavailable (wrapper {src.address.wrapper_name!r})"
                    )
                log.info("%s/%s: wrapper %s", vsd.name, src.alias, outcome.value)
                sensor.queries.append((query, src.address))
            self._sensors[vsd.name] = sensor
            return sensor

    def _csv_path(self, vsd: VirtualSensorDefinition) -> Path | None:
        if self.data_dir is None or vsd.persist is False:
            return None
        return self.data_dir / f"{vsd.name}.csv"

    def _rollback(self, sensor: VirtualSensor) -> None:
        for query, wcr in reversed(sensor.queries):
            self.repository.release(wcr, query)
        sensor.queries.clear()

    def unload(self, name: str) -> None:
        with self._lock:
            sensor = self._sensors.pop(name, None)
        if sensor is None:
            raise KeyError(name)
        self._rollback(sensor)
        sensor.buffer.close()

    def load_directory(self, path: str | Path) -> tuple[list[str], dict[str, str]]:
        """Load every ``*.xml`` in ``path``; returns (loaded names, {file: error})."""
        loaded, failed = [], {}
        for file in sorted(Path(path).glob("*.xml")):
            try:
                sensor = self.load(load_vsd_file(file))
            except LoadError as exc:
                log.error("failed to load %s: %s", file.name, exc)
                failed[file.name] = str(exc)
            else:
                loaded.append(sensor.name)
        return loaded, failed

    def shutdown(self) -> None:
        for name in list(self.sensors):
            self.unload(name)
        self.repository.shutdown()


def load_virtual_sensor(loader: VirtualSensorLoader, vsd: VirtualSensorDefinition) -> bool:
    """Non-raising form of :meth:`VirtualSensorLoader.load`."""
    try:
        loader.load(vsd)
    except LoadError as exc:
        log.error("%s", exc)
        return False
    return True
