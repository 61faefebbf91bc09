"""Wrapper repository: find-or-create wrapper instances by connection request."""

from __future__ import annotations

import enum
import logging
import threading
from typing import Callable, Mapping

from gsnbridge.runtime.wrapper import (
    AbstractWrapper,
    StreamSourceQuery,
    WrapperConnectionRequest,
    WrapperState,
)

log = logging.getLogger(__name__)

WrapperFactory = Callable[[WrapperConnectionRequest], AbstractWrapper]


class AcquireOutcome(str, enum.Enum):
    REUSED = "reused"
    CREATED = "created"
    UNAVAILABLE = "unavailable"

    def __bool__(self) -> bool:
        return self is not AcquireOutcome.UNAVAILABLE


class WrapperRepository:
    """Live wrapper instances keyed by their connection request.

    ``kinds`` maps a wrapper name (the VSD ``address/@wrapper`` value) to a
    factory taking the request. All acquire/release calls are serialized.
    """

    def __init__(self, kinds: Mapping[str, WrapperFactory] | None = None):
        self.kinds: dict[str, WrapperFactory] = dict(kinds or {})
        self._instances: dict[WrapperConnectionRequest, AbstractWrapper] = {}
        self._lock = threading.RLock()
        self.failed: list[AbstractWrapper] = []

    def register_kind(self, name: str, factory: WrapperFactory) -> None:
        with self._lock:
            self.kinds[name] = factory

    def acquire(
        self, wcr: WrapperConnectionRequest, query: StreamSourceQuery
    ) -> AcquireOutcome:
        with self._lock:
            wrapper = self._instances.get(wcr)
            if wrapper is not None and wrapper.state in (
                WrapperState.INITIALISED,
                WrapperState.RUNNING,
            ):
                wrapper.register_query(query)
                return AcquireOutcome.REUSED
            if wrapper is not None:
                # dead instance (failed at runtime): drop it and build a fresh one
                self._discard(wcr)

            factory = self.kinds.get(wcr.wrapper_name)
            if factory is None:
                log.warning("no wrapper kind %r registered", wcr.wrapper_name)
                return AcquireOutcome.UNAVAILABLE
            wrapper = factory(wcr)
            if not wrapper.initialise():
                log.error("wrapper %r failed to initialise for %s", wcr.wrapper_name, wcr.params)
                self.failed.append(wrapper)
                return AcquireOutcome.UNAVAILABLE
            self._instances[wcr] = wrapper
            wrapper.register_query(query)
            wrapper.start()
            return AcquireOutcome.CREATED

    def release(self, wcr: WrapperConnectionRequest, query: StreamSourceQuery) -> None:
        """Deregister ``query``; a wrapper left with no queries is finalised and removed."""
        with self._lock:
            wrapper = self._instances.get(wcr)
            if wrapper is None:
                return
            wrapper.deregister_query(query)
            if wrapper.query_count == 0:
                self._discard(wcr)

    def _discard(self, wcr: WrapperConnectionRequest) -> None:
        wrapper = self._instances.pop(wcr)
        wrapper.finalise()

    def get(self, wcr: WrapperConnectionRequest) -> AbstractWrapper | None:
        with self._lock:
            return self._instances.get(wcr)

    def instances(self) -> list[AbstractWrapper]:
        with self._lock:
            return list(self._instances.values())

    def registration_counts(self) -> dict[WrapperConnectionRequest, int]:
        with self._lock:
            return {wcr: w.query_count for wcr, w in self._instances.items()}

    def __len__(self) -> int:
        with self._lock:
            return len(self._instances)

    def shutdown(self) -> None:
        with self._lock:
            for wcr in list(self._instances):
                self._discard(wcr)
