"""
Inference service: the request/response state machine and its TCP loop.

Classes
-------
Session: Maps request frames to response frames against one Runtime.
InferenceServer: Accepts one connection at a time and runs a Session over it.

Functions
---------
serve: Bind and serve until interrupted or ``max_connections`` is reached.
"""

import socket

from .._errors import RcbkitError
from .._logging import get_logger
from ..compiler.pack import PackError, decode_plan_bundle
from ..rimfs.image import MountError
from ..runtime.binding import PlanError
from ..runtime.context import InputSizeError, NotProvisioned, ProvisionError, Runtime
from ..runtime.executor import ExecError, PipelineError
from .frame import ErrorCode, Frame, FrameError, IntegrityError, MsgType, ack, nack, read_frame, write_frame

logger = get_logger(__name__)


class Session:
    """
    Handle requests for one runtime.

    ``LOAD_IMAGE`` and ``LOAD_PLAN`` provision the runtime and answer ACK;
    ``RUN`` answers RESULT; ``TELEMETRY_REQ`` answers TELEMETRY. Every failure
    is answered with a NACK carrying an ``ErrorCode`` and the session stays
    usable; failures outside the library errors answer ``EXEC``.
    """

    def __init__(self, runtime: Runtime):
        self.runtime = runtime
        self.requests = 0

    def __repr__(self) -> str:
        return f"Session(requests={self.requests}, runtime={self.runtime!r})"

    def _nack(self, code: ErrorCode, exc) -> Frame:
        logger.bind(code=code.name).warning("%s", exc)
        self.runtime.telemetry.record_error(code)
        return nack(code)

    def reject(self, exc: FrameError) -> Frame:
        """Response to a frame that could not be decoded."""
        if isinstance(exc, IntegrityError):
            return self._nack(ErrorCode.INTEGRITY, exc)
        if exc.kind == "Type":
            return self._nack(ErrorCode.UNSUPPORTED_TYPE, exc)
        return self._nack(ErrorCode.MALFORMED_FRAME, exc)

    def handle(self, frame: Frame) -> Frame:
        self.requests += 1
        kind = frame.msg_type
        try:
            if kind == MsgType.LOAD_IMAGE:
                return self._load_image(frame.payload)
            if kind == MsgType.LOAD_PLAN:
                return self._load_plan(frame.payload)
            if kind == MsgType.RUN:
                return self._run(frame.payload)
            if kind == MsgType.TELEMETRY_REQ:
                return Frame(MsgType.TELEMETRY, self.runtime.snapshot().pack())
        except NotProvisioned as exc:
            return self._nack(ErrorCode.NOT_PROVISIONED, exc)
        except Exception as exc:
            logger.exception("internal error handling %s", MsgType(kind).name)
            return self._nack(ErrorCode.EXEC, exc)
        return self._nack(ErrorCode.UNSUPPORTED_TYPE, f"unexpected {MsgType(kind).name} request")

    def _load_image(self, payload) -> Frame:
        try:
            self.runtime.load_image(payload)
        except (ProvisionError, MountError) as exc:
            return self._nack(ErrorCode.IMAGE, exc)
        return ack()

    def _load_plan(self, payload) -> Frame:
        try:
            rcbs, manifest = decode_plan_bundle(payload)
            self.runtime.load_plan(rcbs, manifest)
        except NotProvisioned:
            raise
        except (PackError, PlanError, RcbkitError) as exc:
            return self._nack(ErrorCode.PLAN, exc)
        return ack()

    def _run(self, payload) -> Frame:
        try:
            result = self.runtime.run(payload)
        except NotProvisioned:
            raise
        except InputSizeError as exc:
            return self._nack(ErrorCode.INPUT_SIZE, exc)
        except (ExecError, PipelineError, RcbkitError) as exc:
            return self._nack(ErrorCode.EXEC, exc)
        return Frame(MsgType.RESULT, result)


class InferenceServer:
    """
    A blocking TCP server handling one client at a time.

    Parameters
    ----------
    runtime : Runtime
        Shared by every connection, so provisioning survives reconnects.
    host, port : str, int
        Listen address; port 0 picks a free port (see ``address``).
    """

    def __init__(self, runtime: Runtime, host: str = "127.0.0.1", port: int = 0):
        self.runtime = runtime
        self.session = Session(runtime)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self._sock.bind((host, port))
        except OSError:
            self._sock.close()
            raise
        self._sock.listen(1)
        self.connections = 0

    def __repr__(self) -> str:
        return f"InferenceServer(address={self.address}, connections={self.connections})"

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def handle_connection(self, conn) -> None:
        """Serve frames on one connection until the peer closes it."""
        stream = conn.makefile("rwb")
        try:
            while True:
                try:
                    frame, skipped = read_frame(stream)
                except EOFError:
                    return
                except FrameError as exc:
                    write_frame(stream, self.session.reject(exc))
                    continue
                if skipped:
                    logger.warning("skipped %d bytes to resynchronise", skipped)
                write_frame(stream, self.session.handle(frame))
        finally:
            stream.close()

    def serve(self, max_connections: int | None = None) -> None:
        logger.info("listening on %s:%d", *self.address)
        while max_connections is None or self.connections < max_connections:
            conn, peer = self._sock.accept()
            self.connections += 1
            log = logger.bind(peer=f"{peer[0]}:{peer[1]}")
            log.info("connected")
            with conn:
                try:
                    self.handle_connection(conn)
                except OSError as exc:
                    log.warning("connection dropped: %s", exc)
            log.info("disconnected")


def serve(runtime: Runtime, host: str = "127.0.0.1", port: int = 7410, max_connections: int | None = None):
    """Serve ``runtime`` on ``host:port``; raises OSError if the port is in use."""
    with InferenceServer(runtime, host, port) as server:
        server.serve(max_connections)
