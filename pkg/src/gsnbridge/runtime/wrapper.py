"""Abstract wrapper lifecycle.

Legal transitions: created -> initialised -> running -> finalised, plus
initialised -> finalised (never started) and any state -> failed.
"""

from __future__ import annotations

import abc
import enum
import logging
import threading
from dataclasses import dataclass, field
from typing import Callable

from gsnbridge.datamodel import OutputSchema, StreamElement
from gsnbridge.errors import NotReadyError, WrapperStateError

log = logging.getLogger(__name__)


class WrapperState(str, enum.Enum):
    CREATED = "created"
    INITIALISED = "initialised"
    RUNNING = "running"
    FINALISED = "finalised"
    FAILED = "failed"


@dataclass(frozen=True)
class WrapperConnectionRequest:
    """Wrapper name plus initialisation parameters.

    Equality ignores parameter order but requires identical keys and values.
    """

    wrapper_name: str
    params: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        params = tuple((str(k), str(v)) for k, v in self.params)
        keys = [k for k, _ in params]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate parameter keys in {keys}")
        object.__setattr__(self, "params", params)

    @classmethod
    def of(cls, wrapper_name: str, **params) -> WrapperConnectionRequest:
        return cls(wrapper_name, tuple(params.items()))

    @property
    def key(self) -> tuple[str, frozenset]:
        return (self.wrapper_name, frozenset(self.params))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, WrapperConnectionRequest):
            return NotImplemented
        return self.key == other.key

    def __hash__(self) -> int:
        return hash(self.key)

    def get(self, key: str, default: str | None = None) -> str | None:
        return dict(self.params).get(key, default)


@dataclass(eq=False)
class StreamSourceQuery:
    """A stream source of a virtual sensor registered on a wrapper."""

    virtual_sensor: str
    alias: str
    deliver: Callable[[StreamElement], None] = field(repr=False)


class AbstractWrapper(abc.ABC):
    """Base class for acquisition plugins.

    Subclasses implement :meth:`setup` (acquire every external resource,
    return False on failure), :meth:`teardown` (release all of them),
    :meth:`run` (acquisition loop, should return once :attr:`stopping` is
    set) and :attr:`wrapper_name`. Data is pushed to registered queries
    with :meth:`post_stream_element`.
    """

    wrapper_name: str = ""

    def __init__(self, wcr: WrapperConnectionRequest):
        self.wcr = wcr
        self.state = WrapperState.CREATED
        self.stopping = threading.Event()
        self._queries: list[StreamSourceQuery] = []
        self._lifecycle_lock = threading.RLock()
        self._post_lock = threading.Lock()
        self._thread: threading.Thread | None = None
        self._acquired = False
        self._schema: OutputSchema | None = None

    # -- contract -----------------------------------------------------
    @abc.abstractmethod
    def setup(self) -> bool: ...

    @abc.abstractmethod
    def teardown(self) -> None: ...

    @abc.abstractmethod
    def run(self) -> None: ...

    def get_wrapper_name(self) -> str:
        return self.wrapper_name

    def get_output_format(self) -> OutputSchema:
        if self._schema is None:
            raise NotReadyError(f"{self.wrapper_name}: output format not negotiated yet")
        return self._schema

    def set_output_format(self, schema: OutputSchema) -> None:
        self._schema = schema

    # -- lifecycle ----------------------------------------------------
    def initialise(self) -> bool:
        with self._lifecycle_lock:
            if self.state is not WrapperState.CREATED:
                raise WrapperStateError(f"cannot initialise from {self.state.value}")
            self._acquired = True
            try:
                ok = bool(self.setup())
            except Exception:
                log.exception("%s: initialise raised", self.wrapper_name)
                ok = False
            if not ok:
                self._fail()
                return False
            self.state = WrapperState.INITIALISED
            return True

    def start(self) -> None:
        with self._lifecycle_lock:
            if self.state is not WrapperState.INITIALISED:
                raise WrapperStateError(f"cannot start from {self.state.value}")
            self.state = WrapperState.RUNNING
            self._thread = threading.Thread(
                target=self._run_guarded, name=f"wrapper-{self.wrapper_name}", daemon=True
            )
            self._thread.start()

    def finalise(self) -> None:
        """Release everything :meth:`initialise` acquired. Idempotent."""
        with self._lifecycle_lock:
            if self.state is WrapperState.FINALISED:
                return
            self.stopping.set()
            self._release()
            thread, self._thread = self._thread, None
            if thread is not None and thread is not threading.current_thread():
                thread.join(timeout=5)
            if self.state is not WrapperState.FAILED:
                self.state = WrapperState.FINALISED

    def _release(self) -> None:
        if self._acquired:
            self._acquired = False
            try:
                self.teardown()
            except Exception:
                log.exception("%s: teardown raised", self.wrapper_name)

    def _fail(self) -> None:
        self.state = WrapperState.FAILED
        self.stopping.set()
        self._release()

    def _run_guarded(self) -> None:
        try:
            self.run()
        except Exception:
            if self.stopping.is_set():
                return
            log.exception("%s: run loop crashed", self.wrapper_name)
            with self._lifecycle_lock:
                if self.state is WrapperState.RUNNING:
                    self._fail()

    # -- queries ------------------------------------------------------
    def register_query(self, query: StreamSourceQuery) -> None:
        with self._post_lock:
            self._queries.append(query)

    def deregister_query(self, query: StreamSourceQuery) -> bool:
        with self._post_lock:
            try:
                self._queries.remove(query)
            except ValueError:
                return False
            return True

    @property
    def queries(self) -> tuple[StreamSourceQuery, ...]:
        with self._post_lock:
            return tuple(self._queries)

    @property
    def query_count(self) -> int:
        return len(self.queries)

    def post_stream_element(self, element: StreamElement) -> None:
        # One writer at a time per wrapper, so every query sees the same order.
        with self._post_lock:
            for query in self._queries:
                query.deliver(element)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.wcr.wrapper_name} {self.state.value}>"


