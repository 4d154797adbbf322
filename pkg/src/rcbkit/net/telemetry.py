"""
Runtime telemetry counters and their TELEMETRY payload encoding.
"""

import struct
from dataclasses import astuple, dataclass

_PAYLOAD = struct.Struct("<QQQQQQI")


@dataclass
class Telemetry:
    """Monotone counters of the inference service."""

    inferences: int = 0
    input_ticks: int = 0
    compute_ticks: int = 0
    output_ticks: int = 0
    kernels_completed: int = 0
    unknown_events: int = 0
    last_error: int = 0

    def record_run(self, stages: dict) -> None:
        """Count one successful inference and add its per-stage ticks."""
        self.inferences += 1
        self.input_ticks += stages.get("input", 0)
        self.compute_ticks += stages.get("compute", 0)
        self.output_ticks += stages.get("output", 0)

    def record_error(self, code: int) -> None:
        self.last_error = int(code)

    def pack(self) -> bytes:
        return _PAYLOAD.pack(*astuple(self))

    @classmethod
    def unpack(cls, payload: bytes) -> "Telemetry":
        if len(payload) != _PAYLOAD.size:
            raise ValueError(f"telemetry payload must be {_PAYLOAD.size} bytes, got {len(payload)}")
        return cls(*_PAYLOAD.unpack(payload))
