from gsnbridge.runtime.loader import VirtualSensor, VirtualSensorLoader, load_virtual_sensor
from gsnbridge.runtime.repository import AcquireOutcome, WrapperRepository
from gsnbridge.runtime.vsd import (
    StreamSourceDefinition,
    VirtualSensorDefinition,
    load_vsd_file,
    parse_vsd,
)
from gsnbridge.runtime.wrapper import (
    AbstractWrapper,
    StreamSourceQuery,
    WrapperConnectionRequest,
    WrapperState,
)

__all__ = [
    "AbstractWrapper",
    "AcquireOutcome",
    "StreamSourceDefinition",
    "StreamSourceQuery",
    "VirtualSensor",
    "VirtualSensorDefinition",
    "VirtualSensorLoader",
    "WrapperConnectionRequest",
    "WrapperRepository",
    "WrapperState",
    "load_virtual_sensor",
    "load_vsd_file",
    "parse_vsd",
]
