"""Sensor acquisition middleware for phone-style sensor streams."""

from gsnbridge.protocol import (
    MetadataPacket,
    SensorDescriptor,
    decode_metadata,
    decode_readings,
    encode_metadata,
    encode_readings,
    expected_payload_bytes,
    registry_lookup,
)

__version__ = "0.1.0"

__all__ = [
    "MetadataPacket",
    "SensorDescriptor",
    "decode_metadata",
    "decode_readings",
    "encode_metadata",
    "encode_readings",
    "expected_payload_bytes",
    "registry_lookup",
]
