"""
Host side of the inference protocol.
"""

import socket

from .._errors import RcbkitError
from .frame import ErrorCode, Frame, MsgType, read_frame, write_frame
from .telemetry import Telemetry


class RemoteError(RcbkitError):
    """The service answered with a NACK."""

    def __init__(self, code: int, request: MsgType):
        self.code = code
        self.request = request
        try:
            name = ErrorCode(code).name
        except ValueError:
            name = str(code)
        super().__init__(f"{request.name} rejected: {name}")


class InferenceClient:
    """
    A connection to an inference service.

    Examples
    --------
    >>> with InferenceClient("127.0.0.1", 7410) as client:  # doctest: +SKIP
    ...     client.load_model(model)
    ...     out = client.run(data)
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 7410, timeout: float | None = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._stream = self._sock.makefile("rwb")

    def __repr__(self) -> str:
        return f"InferenceClient(peer={self._sock.getpeername()})"

    def close(self) -> None:
        self._stream.close()
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def request(self, frame: Frame) -> Frame:
        """Send one frame and return the reply, whatever its type."""
        write_frame(self._stream, frame)
        reply, _ = read_frame(self._stream)
        return reply

    def send_raw(self, data: bytes) -> Frame:
        """Send pre-encoded (possibly corrupt) bytes and return the reply."""
        self._stream.write(data)
        self._stream.flush()
        reply, _ = read_frame(self._stream)
        return reply

    def _expect(self, frame: Frame, want: MsgType) -> Frame:
        reply = self.request(frame)
        if reply.msg_type == MsgType.NACK:
            raise RemoteError(reply.error_code, MsgType(frame.msg_type))
        if reply.msg_type != want:
            raise RcbkitError(f"expected {want.name}, got {MsgType(reply.msg_type).name}")
        return reply

    def load_image(self, image: bytes) -> None:
        self._expect(Frame(MsgType.LOAD_IMAGE, image), MsgType.ACK)

    def load_plan(self, bundle: bytes) -> None:
        self._expect(Frame(MsgType.LOAD_PLAN, bundle), MsgType.ACK)

    def load_model(self, model) -> None:
        """Provision a CompiledModel: its image, then its plan bundle."""
        self.load_image(model.image)
        self.load_plan(model.plan_bundle())

    def run(self, data: bytes) -> bytes:
        return self._expect(Frame(MsgType.RUN, data), MsgType.RESULT).payload

    def telemetry(self) -> Telemetry:
        return Telemetry.unpack(self._expect(Frame(MsgType.TELEMETRY_REQ), MsgType.TELEMETRY).payload)
