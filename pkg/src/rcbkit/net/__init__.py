# service and client import the runtime; import them from their modules
from .crc import crc32, crc32_bitwise, verify
from .events import Event, EventDispatcher
from .frame import (
    ErrorCode,
    Frame,
    FrameError,
    IntegrityError,
    MsgType,
    decode_frame,
    encode_frame,
    read_frame,
)
from .telemetry import Telemetry

__all__ = [
    "crc32",
    "crc32_bitwise",
    "verify",
    "Event",
    "EventDispatcher",
    "ErrorCode",
    "Frame",
    "FrameError",
    "IntegrityError",
    "MsgType",
    "decode_frame",
    "encode_frame",
    "read_frame",
    "Telemetry",
]
