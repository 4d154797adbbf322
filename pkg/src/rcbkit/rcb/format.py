"""
Runtime Control Block (RCB) binary format.

An RCB is not code but data: a header, a dependency list and an ordered stream
of low-level hardware operations that a generic executor walks. This module
holds the in-memory types together with the bit-exact encoder, decoder and
validator. All multi-byte fields are little-endian.

Classes
-------
OpCode, BlockType, AddrKind, Direction: Enumerations used on the wire.
Absolute, RelativeTile, Symbolic: Address references.
RegWrite, RegRead, WriteBlock, DmaTrigger, PollMask, CacheFlush,
CacheInvalidate, WaitEvent: Operations.
Rcb: A decoded command block.
Violation: One finding of ``validate_rcb``.
FormatError: Raised by ``decode_rcb`` and ``encode_rcb``.

Functions
---------
encode_rcb: Serialise an Rcb.
decode_rcb: Parse and validate an encoded Rcb.
validate_rcb: List every invariant violation of an Rcb.
op_size: Encoded size of one operation.
iter_addrs: Address references of an operation with their access lengths.
"""

import struct
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import ClassVar, Union

from .._errors import RcbkitError

RCB_MAGIC = 0x31424352  # "RCB1"
RCB_VERSION = 1
HEADER_SIZE = 20
ADDR_SIZE = 12

FLAG_ASYNC = 0x0001

_HEADER = struct.Struct("<IHHIIHH")
_OP_HEAD = struct.Struct("<HH")
_ADDR_ABS = struct.Struct("<BBQH")
_ADDR_TILE = struct.Struct("<BBHHIH")
_ADDR_SYM = struct.Struct("<BBIIH")
_U32 = struct.Struct("<I")
_U32X2 = struct.Struct("<II")
_U32X3 = struct.Struct("<III")
_DIR = struct.Struct("<B3x")

U16 = 0xFFFF
U32 = 0xFFFF_FFFF
U64 = 0xFFFF_FFFF_FFFF_FFFF


class OpCode(IntEnum):
    REG_WRITE = 0x01
    REG_READ = 0x02
    WRITE_BLOCK = 0x03
    DMA_TRIGGER = 0x04
    POLL_MASK = 0x05
    CACHE_FLUSH = 0x06
    CACHE_INVALIDATE = 0x07
    WAIT_EVENT = 0x08


class BlockType(IntEnum):
    COMPUTE = 0
    TRANSFER = 1
    CONFIG = 2


class AddrKind(IntEnum):
    ABSOLUTE = 0
    RELATIVE_TILE = 1
    SYMBOLIC = 2


class Direction(IntEnum):
    TO_DEVICE = 0
    FROM_DEVICE = 1


class FormatError(RcbkitError):
    """An encoded block is malformed.

    Attributes
    ----------
    kind : str
        ``Truncated``, ``Magic``, ``Version``, ``BlockType``, ``Reserved``,
        ``Opcode``, ``AddrKind``, ``Direction``, ``Trailing`` or ``Invalid``.
    offset : int or None
        Absolute byte offset of the offending field.
    """

    def __init__(self, kind: str, offset: int | None = None, detail: str = ""):
        self.kind = kind
        self.offset = offset
        where = f" at offset {offset}" if offset is not None else ""
        super().__init__(f"{kind}{where}{': ' + detail if detail else ''}")


# -- address references -------------------------------------------------------


@dataclass(frozen=True)
class Absolute:
    address: int
    kind: ClassVar[AddrKind] = AddrKind.ABSOLUTE


@dataclass(frozen=True)
class RelativeTile:
    col: int
    row: int
    offset: int
    kind: ClassVar[AddrKind] = AddrKind.RELATIVE_TILE


@dataclass(frozen=True)
class Symbolic:
    buffer_id: int
    offset: int = 0
    kind: ClassVar[AddrKind] = AddrKind.SYMBOLIC


AddrRef = Union[Absolute, RelativeTile, Symbolic]


# -- operations ---------------------------------------------------------------


@dataclass(frozen=True)
class RegWrite:
    addr: AddrRef
    value: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.REG_WRITE


@dataclass(frozen=True)
class RegRead:
    addr: AddrRef
    capture_slot: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.REG_READ


@dataclass(frozen=True)
class WriteBlock:
    addr: AddrRef
    data: bytes
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.WRITE_BLOCK


@dataclass(frozen=True)
class DmaTrigger:
    direction: Direction
    src: AddrRef
    dst: AddrRef
    length: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.DMA_TRIGGER


@dataclass(frozen=True)
class PollMask:
    addr: AddrRef
    mask: int
    expected: int
    timeout_us: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.POLL_MASK


@dataclass(frozen=True)
class CacheFlush:
    addr: AddrRef
    length: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.CACHE_FLUSH


@dataclass(frozen=True)
class CacheInvalidate:
    addr: AddrRef
    length: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.CACHE_INVALIDATE


@dataclass(frozen=True)
class WaitEvent:
    event_id: int
    flags: int = 0
    opcode: ClassVar[OpCode] = OpCode.WAIT_EVENT


Operation = Union[
    RegWrite,
    RegRead,
    WriteBlock,
    DmaTrigger,
    PollMask,
    CacheFlush,
    CacheInvalidate,
    WaitEvent,
]


@dataclass(frozen=True)
class Rcb:
    """A Runtime Control Block.

    Parameters
    ----------
    block_type : BlockType
        COMPUTE, TRANSFER or CONFIG.
    ops : tuple[Operation, ...]
        The ordered operation payload.
    deps : tuple[int, ...]
        IDs (pipeline positions) of blocks that must complete first.
    version : int
        Format version, always 1 for blocks this module can encode.
    """

    block_type: BlockType
    ops: tuple = ()
    deps: tuple = ()
    version: int = RCB_VERSION

    def __post_init__(self):
        if not isinstance(self.block_type, BlockType) and self.block_type in set(BlockType):
            object.__setattr__(self, "block_type", BlockType(self.block_type))
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "deps", tuple(self.deps))

    def __repr__(self) -> str:
        return (
            f"{type(self).__name__}(block_type={self.block_type.name}, "
            f"ops={len(self.ops)}, deps={list(self.deps)})"
        )

    def with_ops(self, ops) -> "Rcb":
        return replace(self, ops=tuple(ops))


@dataclass(frozen=True)
class Violation:
    """One invariant violation; ``op_index`` is None for header-level findings."""

    op_index: int | None
    field: str
    message: str

    def __str__(self) -> str:
        where = "header" if self.op_index is None else f"op {self.op_index}"
        return f"{where}: {self.field}: {self.message}"


# -- sizes and address iteration ---------------------------------------------


def _pad4(n: int) -> int:
    return (n + 3) & ~3


def op_size(op: Operation) -> int:
    """Encoded size in bytes of one operation, including opcode and flags."""
    if isinstance(op, RegWrite | RegRead | CacheFlush | CacheInvalidate):
        return 4 + ADDR_SIZE + 4
    if isinstance(op, WriteBlock):
        return 4 + ADDR_SIZE + 4 + _pad4(len(op.data))
    if isinstance(op, DmaTrigger):
        return 4 + 4 + 2 * ADDR_SIZE + 4
    if isinstance(op, PollMask):
        return 4 + ADDR_SIZE + 12
    if isinstance(op, WaitEvent):
        return 4 + 8
    raise TypeError(f"not an operation: {op!r}")


def iter_addrs(op: Operation) -> list[tuple[str, AddrRef, int]]:
    """Return ``(field name, address, access length)`` for every address of ``op``."""
    if isinstance(op, RegWrite | RegRead | PollMask):
        return [("addr", op.addr, 4)]
    if isinstance(op, WriteBlock):
        return [("addr", op.addr, len(op.data))]
    if isinstance(op, CacheFlush | CacheInvalidate):
        return [("addr", op.addr, op.length)]
    if isinstance(op, DmaTrigger):
        return [("src", op.src, op.length), ("dst", op.dst, op.length)]
    return []


# -- validation ---------------------------------------------------------------


def _check_addr(ref, where, name, out):
    if isinstance(ref, Absolute):
        if not 0 <= ref.address <= U64:
            out.append(Violation(where, name, f"address {ref.address:#x} exceeds 64 bits"))
    elif isinstance(ref, RelativeTile):
        if not (0 <= ref.col <= U16 and 0 <= ref.row <= U16):
            out.append(Violation(where, name, "tile coordinates exceed 16 bits"))
        if not 0 <= ref.offset <= U32:
            out.append(Violation(where, name, "tile offset exceeds 32 bits"))
    elif isinstance(ref, Symbolic):
        if not (0 <= ref.buffer_id <= U32 and 0 <= ref.offset <= U32):
            out.append(Violation(where, name, "symbolic id/offset exceed 32 bits"))
    else:
        out.append(Violation(where, name, f"not an address reference: {ref!r}"))


def _check_u32(value, where, name, out):
    if not 0 <= value <= U32:
        out.append(Violation(where, name, f"{value} is not a 32-bit unsigned value"))


def validate_rcb(rcb: Rcb) -> list[Violation]:
    """
    Check every structural invariant of an RCB.

    Parameters
    ----------
    rcb : Rcb
        The block to check.

    Returns
    -------
    list[Violation]
        Empty iff the block is valid; otherwise one entry per violation.
    """
    out: list[Violation] = []
    if not isinstance(rcb.block_type, BlockType):
        out.append(Violation(None, "block_type", f"unknown block type {rcb.block_type!r}"))
    if rcb.version != RCB_VERSION:
        out.append(Violation(None, "version", f"unsupported version {rcb.version}"))
    if rcb.block_type in (BlockType.COMPUTE, BlockType.TRANSFER) and not rcb.ops:
        out.append(Violation(None, "ops", f"{rcb.block_type.name} block has no operations"))
    if len(set(rcb.deps)) != len(rcb.deps):
        out.append(Violation(None, "deps", f"duplicate dependency IDs {list(rcb.deps)}"))
    if len(rcb.deps) > U16:
        out.append(Violation(None, "deps", "more than 65535 dependencies"))
    for dep in rcb.deps:
        _check_u32(dep, None, "deps", out)

    for i, op in enumerate(rcb.ops):
        if not isinstance(getattr(op, "opcode", None), OpCode):
            out.append(Violation(i, "opcode", f"not an operation: {op!r}"))
            continue
        if not 0 <= op.flags <= U16:
            out.append(Violation(i, "flags", "flags exceed 16 bits"))
        for name, ref, _ in iter_addrs(op):
            _check_addr(ref, i, name, out)
        if isinstance(op, RegWrite):
            _check_u32(op.value, i, "value", out)
        elif isinstance(op, RegRead):
            _check_u32(op.capture_slot, i, "capture_slot", out)
        elif isinstance(op, WriteBlock):
            if len(op.data) == 0:
                out.append(Violation(i, "data", "WRITE_BLOCK data is empty"))
            _check_u32(len(op.data), i, "data", out)
        elif isinstance(op, DmaTrigger):
            if not isinstance(op.direction, Direction):
                out.append(Violation(i, "direction", f"unknown direction {op.direction!r}"))
            if op.length <= 0:
                out.append(Violation(i, "length", "DMA length must be > 0"))
            _check_u32(op.length, i, "length", out)
        elif isinstance(op, PollMask):
            _check_u32(op.mask, i, "mask", out)
            _check_u32(op.expected, i, "expected", out)
            if op.timeout_us <= 0:
                out.append(Violation(i, "timeout_us", "poll timeout must be > 0"))
            _check_u32(op.timeout_us, i, "timeout_us", out)
        elif isinstance(op, CacheFlush | CacheInvalidate):
            _check_u32(op.length, i, "length", out)
        elif isinstance(op, WaitEvent):
            _check_u32(op.event_id, i, "event_id", out)
    return out


# -- encoding -----------------------------------------------------------------


def _encode_addr(ref: AddrRef) -> bytes:
    if isinstance(ref, Absolute):
        return _ADDR_ABS.pack(AddrKind.ABSOLUTE, 0, ref.address, 0)
    if isinstance(ref, RelativeTile):
        return _ADDR_TILE.pack(AddrKind.RELATIVE_TILE, 0, ref.col, ref.row, ref.offset, 0)
    return _ADDR_SYM.pack(AddrKind.SYMBOLIC, 0, ref.buffer_id, ref.offset, 0)


def _encode_op(op: Operation) -> bytes:
    head = _OP_HEAD.pack(op.opcode, op.flags)
    if isinstance(op, RegWrite):
        return head + _encode_addr(op.addr) + _U32.pack(op.value)
    if isinstance(op, RegRead):
        return head + _encode_addr(op.addr) + _U32.pack(op.capture_slot)
    if isinstance(op, WriteBlock):
        pad = b"\0" * (_pad4(len(op.data)) - len(op.data))
        return head + _encode_addr(op.addr) + _U32.pack(len(op.data)) + bytes(op.data) + pad
    if isinstance(op, DmaTrigger):
        return (
            head
            + _DIR.pack(op.direction)
            + _encode_addr(op.src)
            + _encode_addr(op.dst)
            + _U32.pack(op.length)
        )
    if isinstance(op, PollMask):
        return head + _encode_addr(op.addr) + _U32X3.pack(op.mask, op.expected, op.timeout_us)
    if isinstance(op, CacheFlush | CacheInvalidate):
        return head + _encode_addr(op.addr) + _U32.pack(op.length)
    return head + _U32X2.pack(op.event_id, 0)


def encode_rcb(rcb: Rcb) -> bytes:
    """
    Serialise an RCB into its bit-exact binary layout.

    Parameters
    ----------
    rcb : Rcb
        A block that passes ``validate_rcb``.

    Returns
    -------
    bytes
        ``20 + 4 * len(deps) + sum(op_size(op))`` bytes.

    Raises
    ------
    FormatError
        ``Invalid`` if the block has violations; nothing is emitted.
    """
    violations = validate_rcb(rcb)
    if violations:
        raise FormatError("Invalid", detail="; ".join(map(str, violations)))
    payload = b"".join(_encode_op(op) for op in rcb.ops)
    header = _HEADER.pack(
        RCB_MAGIC,
        rcb.version,
        rcb.block_type,
        len(rcb.ops),
        len(payload),
        len(rcb.deps),
        0,
    )
    deps = struct.pack(f"<{len(rcb.deps)}I", *rcb.deps)
    return header + deps + payload


# -- decoding -----------------------------------------------------------------


@dataclass
class _Reader:
    buf: memoryview
    pos: int
    end: int

    def take(self, st: struct.Struct) -> tuple:
        if self.pos + st.size > self.end:
            raise FormatError("Truncated", self.pos, "operation runs past payload")
        values = st.unpack_from(self.buf, self.pos)
        self.pos += st.size
        return values

    def take_bytes(self, n: int) -> bytes:
        if self.pos + n > self.end:
            raise FormatError("Truncated", self.pos, "inline data runs past payload")
        data = bytes(self.buf[self.pos : self.pos + n])
        self.pos += n
        return data


def _decode_addr(r: _Reader) -> AddrRef:
    at = r.pos
    if at + ADDR_SIZE > r.end:
        raise FormatError("Truncated", at, "address runs past payload")
    kind = r.buf[at]
    if kind == AddrKind.ABSOLUTE:
        _, _, address, _ = r.take(_ADDR_ABS)
        return Absolute(address)
    if kind == AddrKind.RELATIVE_TILE:
        _, _, col, row, offset, _ = r.take(_ADDR_TILE)
        return RelativeTile(col, row, offset)
    if kind == AddrKind.SYMBOLIC:
        _, _, buffer_id, offset, _ = r.take(_ADDR_SYM)
        return Symbolic(buffer_id, offset)
    raise FormatError("AddrKind", at, f"unknown address kind {kind}")


def _decode_op(r: _Reader) -> Operation:
    at = r.pos
    code, flags = r.take(_OP_HEAD)
    try:
        opcode = OpCode(code)
    except ValueError:
        raise FormatError("Opcode", at, f"unknown opcode {code:#06x}") from None

    if opcode is OpCode.REG_WRITE:
        addr = _decode_addr(r)
        (value,) = r.take(_U32)
        return RegWrite(addr, value, flags)
    if opcode is OpCode.REG_READ:
        addr = _decode_addr(r)
        (slot,) = r.take(_U32)
        return RegRead(addr, slot, flags)
    if opcode is OpCode.WRITE_BLOCK:
        addr = _decode_addr(r)
        (length,) = r.take(_U32)
        data = r.take_bytes(length)
        r.take_bytes(_pad4(length) - length)
        return WriteBlock(addr, data, flags)
    if opcode is OpCode.DMA_TRIGGER:
        dir_at = r.pos
        (raw_dir,) = r.take(_DIR)
        try:
            direction = Direction(raw_dir)
        except ValueError:
            raise FormatError("Direction", dir_at, f"unknown direction {raw_dir}") from None
        src = _decode_addr(r)
        dst = _decode_addr(r)
        (length,) = r.take(_U32)
        return DmaTrigger(direction, src, dst, length, flags)
    if opcode is OpCode.POLL_MASK:
        addr = _decode_addr(r)
        mask, expected, timeout = r.take(_U32X3)
        return PollMask(addr, mask, expected, timeout, flags)
    if opcode in (OpCode.CACHE_FLUSH, OpCode.CACHE_INVALIDATE):
        addr = _decode_addr(r)
        (length,) = r.take(_U32)
        cls = CacheFlush if opcode is OpCode.CACHE_FLUSH else CacheInvalidate
        return cls(addr, length, flags)
    event_id, _ = r.take(_U32X2)
    return WaitEvent(event_id, flags)


def decode_rcb(buf) -> Rcb:
    """
    Parse an encoded RCB.

    Parameters
    ----------
    buf : bytes-like
        Exactly one encoded block; trailing bytes are an error.

    Returns
    -------
    Rcb
        A block that passes ``validate_rcb``.

    Raises
    ------
    FormatError
        On any malformation, with the byte offset of the offending field.
    """
    view = memoryview(buf).cast("B")
    if len(view) < HEADER_SIZE:
        raise FormatError("Truncated", len(view), "buffer shorter than header")
    magic, version, block_type, op_count, payload_size, dep_count, reserved = (
        _HEADER.unpack_from(view, 0)
    )
    if magic != RCB_MAGIC:
        raise FormatError("Magic", 0, f"bad magic {magic:#010x}")
    if version != RCB_VERSION:
        raise FormatError("Version", 4, f"unsupported version {version}")
    try:
        block = BlockType(block_type)
    except ValueError:
        raise FormatError("BlockType", 6, f"unknown block type {block_type}") from None
    if reserved != 0:
        raise FormatError("Reserved", 18, "reserved field must be zero")

    deps_end = HEADER_SIZE + 4 * dep_count
    total = deps_end + payload_size
    if len(view) < total:
        raise FormatError("Truncated", len(view), f"expected {total} bytes")
    if len(view) > total:
        raise FormatError("Trailing", total, f"{len(view) - total} bytes after payload")
    deps = struct.unpack_from(f"<{dep_count}I", view, HEADER_SIZE)

    reader = _Reader(view, deps_end, total)
    ops = [_decode_op(reader) for _ in range(op_count)]
    if reader.pos != total:
        raise FormatError("Trailing", reader.pos, "payload_size exceeds operations")

    rcb = Rcb(block, tuple(ops), tuple(deps), version)
    violations = validate_rcb(rcb)
    if violations:
        raise FormatError("Invalid", detail="; ".join(map(str, violations)))
    return rcb
