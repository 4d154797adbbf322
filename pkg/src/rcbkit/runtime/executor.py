"""
Fetch-decode-dispatch executor.

Walks the operations of a resolved RCB in order, invokes the matching
hardware primitive for each and records an execution trace.

Classes
-------
ExecRecord: One executed operation.
ExecTrace: Records and REG_READ capture slots of one block.
PipelineResult: Outputs and traces of a pipeline run.
ExecError, PipelineError: Errors.

Functions
---------
execute: Run one resolved RCB.
execute_pipeline: Run a resolved pipeline in order and collect its outputs.
stage_ticks: Split trace time into input transfer, compute and output transfer.
"""

from dataclasses import dataclass, field
from typing import NoReturn

from .._errors import RcbkitError
from .._logging import get_logger
from ..hal.driver import DmaDescriptor, HalDriver, HalFault
from ..rcb.format import (
    FLAG_ASYNC,
    CacheFlush,
    CacheInvalidate,
    Direction,
    DmaTrigger,
    PollMask,
    Rcb,
    RegRead,
    RegWrite,
    WaitEvent,
    WriteBlock,
    iter_addrs,
)
from .binding import AllocationPlan, is_resolved, release_after

logger = get_logger(__name__)

STAGES = ("input", "compute", "output")


@dataclass(frozen=True)
class ExecRecord:
    index: int
    opcode: str
    addrs: tuple
    outcome: str
    start: int
    tick: int
    stage: str = "compute"

    def to_line(self) -> str:
        addr = ",".join(f"{a:#x}" for a in self.addrs) or "-"
        return f"{self.index} {self.opcode} {addr} {self.outcome} {self.tick}"


@dataclass
class ExecTrace:
    records: list = field(default_factory=list)
    slots: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    def __repr__(self) -> str:
        end = self.records[-1].tick if self.records else 0
        return f"ExecTrace(records={len(self.records)}, slots={len(self.slots)}, end_tick={end})"

    def to_lines(self) -> list[str]:
        return [r.to_line() for r in self.records]


class ExecError(RcbkitError):
    """
    Execution stopped at an operation.

    Attributes
    ----------
    kind : str
        ``Timeout``, ``Fault``, ``Event`` or ``Unresolved``.
    op_index : int
        Index of the failing operation.
    trace : ExecTrace or None
        Records up to and including the failing operation.
    """

    def __init__(self, kind: str, op_index: int, detail: str = "", trace=None):
        self.kind = kind
        self.op_index = op_index
        self.trace = trace
        super().__init__(f"{kind} at op {op_index}{': ' + detail if detail else ''}")


class PipelineError(RcbkitError):
    pass


def _stage_of(op) -> str:
    if isinstance(op, DmaTrigger):
        return "input" if op.direction == Direction.TO_DEVICE else "output"
    if isinstance(op, CacheFlush):
        return "input"
    if isinstance(op, CacheInvalidate):
        return "output"
    return "compute"


def _record(index, op, outcome, start, tick) -> ExecRecord:
    addrs = tuple(ref.address for _, ref, _ in iter_addrs(op))
    return ExecRecord(index, op.opcode.name, addrs, outcome, start, tick, _stage_of(op))


def _fail(trace, hal, index, op, start, kind, outcome, detail, cause=None) -> NoReturn:
    trace.records.append(_record(index, op, outcome, start, hal.now()))
    exc = ExecError(kind, index, detail, trace)
    exc.__cause__ = cause
    logger.bind(op=index).raise_error(exc)


def execute(rcb: Rcb, hal: HalDriver, events=None) -> ExecTrace:
    """
    Execute the operations of a resolved RCB in order.

    DMA transfers are awaited before the next operation unless they carry
    ``FLAG_ASYNC``, in which case the wait is deferred until the next
    non-DMA operation or the end of the block.

    Parameters
    ----------
    rcb : Rcb
        A block whose addresses are all absolute.
    hal : HalDriver
        The backend.
    events : EventDispatcher, optional
        Required by WAIT_EVENT operations.

    Returns
    -------
    ExecTrace

    Raises
    ------
    ExecError
        At the first failing operation, carrying the partial trace.
    """
    trace = ExecTrace()
    if not is_resolved(rcb):
        raise ExecError("Unresolved", 0, "block holds non-absolute addresses", trace)

    pending = []

    def drain():
        while pending:
            hal.wait_dma(pending.pop(0))

    for i, op in enumerate(rcb.ops):
        start = hal.now()
        try:
            if not isinstance(op, DmaTrigger):
                drain()
            if isinstance(op, RegWrite):
                hal.write32(op.addr.address, op.value)
            elif isinstance(op, RegRead):
                trace.slots[op.capture_slot] = hal.read32(op.addr.address)
            elif isinstance(op, WriteBlock):
                hal.write_block(op.addr.address, op.data)
            elif isinstance(op, DmaTrigger):
                handle = hal.initiate_dma(
                    DmaDescriptor(op.direction, op.src.address, op.dst.address, op.length)
                )
                if op.flags & FLAG_ASYNC:
                    pending.append(handle)
                else:
                    hal.wait_dma(handle)
            elif isinstance(op, PollMask):
                if not hal.poll_register_masked(
                    op.addr.address, op.mask, op.expected, op.timeout_us
                ):
                    detail = f"{op.addr.address:#x} & {op.mask:#x} != {op.expected:#x}"
                    _fail(trace, hal, i, op, start, "Timeout", "TIMEOUT", detail)
            elif isinstance(op, CacheFlush):
                hal.flush_cache(op.addr.address, op.length)
            elif isinstance(op, CacheInvalidate):
                hal.invalidate_cache(op.addr.address, op.length)
            elif isinstance(op, WaitEvent):
                if events is None:
                    detail = "WAIT_EVENT without an event dispatcher"
                    _fail(trace, hal, i, op, start, "Event", "NOEVENTS", detail)
                if not events.wait_for(op.event_id, idle=hal.idle):
                    detail = f"event {op.event_id:#x} never arrived"
                    _fail(trace, hal, i, op, start, "Timeout", "TIMEOUT", detail)
        except HalFault as exc:
            name = type(exc).__name__
            _fail(
                trace, hal, i, op, start, "Fault", f"FAULT:{name}", f"{name}: {exc}", cause=exc
            )

        trace.records.append(_record(i, op, "OK", start, hal.now()))

    try:
        drain()
    except HalFault as exc:
        raise ExecError("Fault", len(rcb.ops) - 1, str(exc), trace) from exc
    return trace


@dataclass
class PipelineResult:
    outputs: dict = field(default_factory=dict)
    traces: list = field(default_factory=list)

    def __repr__(self) -> str:
        return f"PipelineResult(outputs={sorted(self.outputs)}, traces={len(self.traces)})"


def _read_words(hal: HalDriver, addr: int, size: int) -> bytes:
    out = bytearray()
    for off in range(0, size, 4):
        out += hal.read32(addr + off).to_bytes(4, "little")
    return bytes(out[:size])


def execute_pipeline(
    rcbs,
    plan: AllocationPlan | None,
    hal: HalDriver,
    events=None,
    outputs: dict | None = None,
    memory=None,
    on_release=None,
) -> PipelineResult:
    """
    Execute resolved RCBs in pipeline order.

    Parameters
    ----------
    rcbs : list[Rcb]
        Resolved blocks; block ``i`` may only depend on blocks ``< i``.
    plan : AllocationPlan, optional
        Used to report buffers released after each block.
    hal : HalDriver
        The backend.
    events : EventDispatcher, optional
        Passed on to ``execute``.
    outputs : dict[int, tuple[int, int]], optional
        Buffer ID to ``(address, size)`` of the outputs to read back.
    memory : object, optional
        Provides ``host_read(addr, size)``; otherwise outputs are read with ``read32``.
    on_release : callable, optional
        Called with the list of buffer IDs released after each block.

    Raises
    ------
    PipelineError
        If a block depends on itself or on a later block.
    ExecError
        Propagated from ``execute``.
    """
    rcbs = list(rcbs)
    for idx, rcb in enumerate(rcbs):
        bad = [d for d in rcb.deps if d >= idx]
        if bad:
            raise PipelineError(f"block {idx} depends on blocks {bad} that do not precede it")

    result = PipelineResult()
    for idx, rcb in enumerate(rcbs):
        result.traces.append(execute(rcb, hal, events))
        if plan is not None:
            released = release_after(plan, idx)
            if released and on_release is not None:
                on_release(released)

    for buffer_id, (addr, size) in (outputs or {}).items():
        hal.invalidate_cache(addr, size)
        if memory is not None:
            result.outputs[buffer_id] = memory.host_read(addr, size)
        else:
            result.outputs[buffer_id] = _read_words(hal, addr, size)
    return result


def stage_ticks(traces) -> dict:
    """Total ticks per stage (``input``, ``compute``, ``output``) over traces."""
    totals = dict.fromkeys(STAGES, 0)
    for trace in traces:
        for record in trace.records:
            totals[record.stage] += record.tick - record.start
    return totals
