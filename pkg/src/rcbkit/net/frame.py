"""
CRC-protected message frames.

Layout (little-endian): magic u32, msg_type u16, flags u16, payload_len u32,
payload, crc u32. The CRC covers everything after the magic up to the end of
the payload, so a reader that lost sync can scan for the next magic.

Classes
-------
MsgType: Message types.
ErrorCode: NACK error codes.
Frame: One message.
FrameError, IntegrityError: Errors.

Functions
---------
encode_frame, decode_frame: Codec for a complete frame buffer.
read_frame: Read one frame from a stream, resynchronising on bad magic.
"""

import struct
from dataclasses import dataclass
from enum import IntEnum

from .._errors import RcbkitError
from .crc import crc32

FRAME_MAGIC = 0x31474541  # "AEG1"
MAX_PAYLOAD = 16 * 1024 * 1024

_HEADER = struct.Struct("<IHHI")
_CRC = struct.Struct("<I")
HEADER_SIZE = _HEADER.size
_MAGIC_BYTES = FRAME_MAGIC.to_bytes(4, "little")


class MsgType(IntEnum):
    LOAD_IMAGE = 1
    LOAD_PLAN = 2
    RUN = 3
    RESULT = 4
    TELEMETRY_REQ = 5
    TELEMETRY = 6
    ACK = 7
    NACK = 8


class ErrorCode(IntEnum):
    OK = 0
    NOT_PROVISIONED = 1
    INTEGRITY = 2
    MALFORMED_FRAME = 3
    UNSUPPORTED_TYPE = 4
    IMAGE = 5
    PLAN = 6
    EXEC = 7
    INPUT_SIZE = 8


class FrameError(RcbkitError):
    """
    A frame could not be decoded.

    ``kind`` is ``Magic``, ``TooLarge``, ``Truncated``, ``Type`` or ``Integrity``.
    """

    def __init__(self, kind: str, detail: str = ""):
        self.kind = kind
        super().__init__(f"{kind}{': ' + detail if detail else ''}")


class IntegrityError(FrameError):
    def __init__(self, expected: int, actual: int, msg_type: int | None = None):
        self.expected = expected
        self.actual = actual
        self.msg_type = msg_type
        super().__init__("Integrity", f"crc {actual:#010x} != {expected:#010x}")


@dataclass(frozen=True)
class Frame:
    msg_type: MsgType
    payload: bytes = b""
    flags: int = 0

    def __repr__(self) -> str:
        return f"Frame({MsgType(self.msg_type).name}, flags={self.flags}, payload={len(self.payload)}B)"

    @property
    def error_code(self) -> int | None:
        """Error code of a NACK frame."""
        if self.msg_type != MsgType.NACK or len(self.payload) < 4:
            return None
        return _CRC.unpack_from(self.payload)[0]


def ack() -> Frame:
    return Frame(MsgType.ACK)


def nack(code: int) -> Frame:
    return Frame(MsgType.NACK, _CRC.pack(int(code)))


def encode_frame(frame: Frame) -> bytes:
    """Serialise a frame; raises FrameError(TooLarge) above ``MAX_PAYLOAD``."""
    payload = bytes(frame.payload)
    if len(payload) > MAX_PAYLOAD:
        raise FrameError("TooLarge", f"{len(payload)} bytes")
    head = _HEADER.pack(FRAME_MAGIC, frame.msg_type, frame.flags, len(payload))
    return head + payload + _CRC.pack(crc32(head[4:] + payload))


def _check_header(head: bytes) -> tuple[int, int, int]:
    magic, msg_type, flags, length = _HEADER.unpack(head)
    if magic != FRAME_MAGIC:
        raise FrameError("Magic", f"{magic:#010x}")
    if length > MAX_PAYLOAD:
        raise FrameError("TooLarge", f"{length} bytes")
    return msg_type, flags, length


def _finish(head: bytes, payload: bytes, crc_bytes: bytes, msg_type: int, flags: int) -> Frame:
    (actual,) = _CRC.unpack(crc_bytes)
    expected = crc32(head[4:] + payload)
    if actual != expected:
        raise IntegrityError(expected, actual, msg_type)
    try:
        kind = MsgType(msg_type)
    except ValueError:
        raise FrameError("Type", f"unknown message type {msg_type}") from None
    return Frame(kind, payload, flags)


def decode_frame(buf) -> Frame:
    """
    Decode exactly one frame.

    Raises
    ------
    FrameError
        ``Magic``, ``TooLarge``, ``Truncated`` (short buffer or trailing bytes)
        or ``Type`` for an unknown message type with a valid CRC.
    IntegrityError
        When the CRC does not match.
    """
    buf = bytes(buf)
    if len(buf) < HEADER_SIZE + _CRC.size:
        raise FrameError("Truncated", f"{len(buf)} bytes")
    head = buf[:HEADER_SIZE]
    msg_type, flags, length = _check_header(head)
    if len(buf) != HEADER_SIZE + length + _CRC.size:
        raise FrameError("Truncated", f"declared {length} payload bytes, buffer holds {len(buf)}")
    payload = buf[HEADER_SIZE : HEADER_SIZE + length]
    return _finish(head, payload, buf[HEADER_SIZE + length :], msg_type, flags)


def _read_exact(stream, n: int) -> bytes:
    data = bytearray()
    while len(data) < n:
        chunk = stream.read(n - len(data))
        if not chunk:
            raise EOFError(f"stream closed after {len(data)} of {n} bytes")
        data += chunk
    return bytes(data)


def _discard(stream, n: int, chunk: int = 1 << 16) -> None:
    while n > 0:
        n -= len(_read_exact(stream, min(n, chunk)))


def read_frame(stream) -> tuple[Frame, int]:
    """
    Read one frame from a binary stream.

    Bytes before the next magic are skipped.

    Returns
    -------
    tuple[Frame, int]
        The frame and the number of bytes skipped to find it.

    Raises
    ------
    EOFError
        If the stream ends.
    FrameError, IntegrityError
        As ``decode_frame``; the offending frame has been consumed, including
        the declared payload of a TooLarge frame.
    """
    skipped = 0
    window = _read_exact(stream, 4)
    while window != _MAGIC_BYTES:
        window = window[1:] + _read_exact(stream, 1)
        skipped += 1
    head = window + _read_exact(stream, HEADER_SIZE - 4)
    try:
        msg_type, flags, length = _check_header(head)
    except FrameError as exc:
        if exc.kind == "TooLarge":
            _discard(stream, _HEADER.unpack(head)[3] + _CRC.size)
        raise
    payload = _read_exact(stream, length)
    crc_bytes = _read_exact(stream, _CRC.size)
    return _finish(head, payload, crc_bytes, msg_type, flags), skipped


def write_frame(stream, frame: Frame) -> None:
    stream.write(encode_frame(frame))
    stream.flush()
