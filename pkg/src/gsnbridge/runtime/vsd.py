"""Virtual sensor definition (VSD) files.

Minimal schema (see ``docs/vsd.md``)::

    <virtual-sensor name="phone1">
      <storage history-size="1000" persist="true"/>
      <streams>
        <stream name="input">
          <source alias="phone">
            <address wrapper="android">
              <predicate key="port">22001</predicate>
            </address>
          </source>
        </stream>
      </streams>
    </virtual-sensor>

Only ``virtual-sensor/@name`` and at least one ``address/@wrapper`` are
required. Every ``address`` element becomes one stream source.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from gsnbridge.errors import LoadError
from gsnbridge.runtime.wrapper import WrapperConnectionRequest


@dataclass(frozen=True)
class StreamSourceDefinition:
    alias: str
    address: WrapperConnectionRequest


@dataclass(frozen=True)
class VirtualSensorDefinition:
    name: str
    sources: tuple[StreamSourceDefinition, ...]
    history_size: int | None = None
    persist: bool | None = None

    @property
    def address(self) -> WrapperConnectionRequest:
        return self.sources[0].address


_TRUE = {"true", "yes", "1", "on"}
_FALSE = {"false", "no", "0", "off"}


def _parse_bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise LoadError(f"{what}: expected a boolean, got {text!r}")


def parse_vsd(text: str | bytes) -> VirtualSensorDefinition:
    try:
        root = ET.fromstring(text)
    except ET.ParseError as exc:
        raise LoadError(f"malformed VSD XML: {exc}") from exc
    if root.tag != "virtual-sensor":
        raise LoadError(f"root element must be <virtual-sensor>, got <{root.tag}>")
    name = (root.get("name") or "").strip()
    if not name:
        raise LoadError("virtual-sensor/@name is missing or empty")

    sources = []
    for i, addr in enumerate(root.iter("address")):
        wrapper = (addr.get("wrapper") or "").strip()
        if not wrapper:
            raise LoadError(f"{name}: address element without a wrapper name")
        params = []
        for pred in addr.findall("predicate"):
            key = pred.get("key")
            if not key:
                raise LoadError(f"{name}: predicate without key")
            params.append((key.strip(), (pred.text or "").strip()))
        try:
            wcr = WrapperConnectionRequest(wrapper, tuple(params))
        except ValueError as exc:
            raise LoadError(f"{name}: {exc}") from exc
        sources.append(StreamSourceDefinition(_source_alias(root, addr, i), wcr))
    if not sources:
        raise LoadError(f"{name}: no address element")

    history_size = persist = None
    storage = root.find("storage")
    if storage is not None:
        if storage.get("history-size") is not None:
            try:
                history_size = int(storage.get("history-size"))
            except ValueError:
                raise LoadError(f"{name}: history-size must be an integer") from None
            if history_size < 1:
                raise LoadError(f"{name}: history-size must be >= 1")
        if storage.get("persist") is not None:
            persist = _parse_bool(storage.get("persist"), f"{name}: storage/@persist")
    return VirtualSensorDefinition(name, tuple(sources), history_size, persist)


def _source_alias(root: ET.Element, addr: ET.Element, i: int) -> str:
    for src in root.iter("source"):
        if addr in list(src) and src.get("alias"):
            return src.get("alias")
    return f"source{i}"


def load_vsd_file(path: str | Path) -> VirtualSensorDefinition:
    path = Path(path)
    try:
        return parse_vsd(path.read_bytes())
    except LoadError as exc:
        raise LoadError(f"{path.name}: {exc}") from exc
