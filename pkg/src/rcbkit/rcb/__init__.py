from .format import (
    FLAG_ASYNC,
    HEADER_SIZE,
    RCB_MAGIC,
    Absolute,
    AddrKind,
    BlockType,
    CacheFlush,
    CacheInvalidate,
    Direction,
    DmaTrigger,
    FormatError,
    OpCode,
    PollMask,
    Rcb,
    RegRead,
    RegWrite,
    RelativeTile,
    Symbolic,
    Violation,
    WaitEvent,
    WriteBlock,
    decode_rcb,
    encode_rcb,
    iter_addrs,
    op_size,
    validate_rcb,
)

__all__ = [
    "FLAG_ASYNC",
    "HEADER_SIZE",
    "RCB_MAGIC",
    "Absolute",
    "AddrKind",
    "BlockType",
    "CacheFlush",
    "CacheInvalidate",
    "Direction",
    "DmaTrigger",
    "FormatError",
    "OpCode",
    "PollMask",
    "Rcb",
    "RegRead",
    "RegWrite",
    "RelativeTile",
    "Symbolic",
    "Violation",
    "WaitEvent",
    "WriteBlock",
    "decode_rcb",
    "encode_rcb",
    "iter_addrs",
    "op_size",
    "validate_rcb",
]
