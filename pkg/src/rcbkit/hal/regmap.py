"""
Device address map of the simulated tile array.

Every tile owns a ``TILE_STRIDE`` window starting at ``TILE_REGION_BASE``: a
small register file at the bottom and its local memory at ``LOCAL_MEM_OFFSET``.
External DRAM is a flat window at ``GLOBAL_BASE``.
"""

TILE_REGION_BASE = 0x1000_0000
TILE_STRIDE = 0x2_0000
LOCAL_MEM_OFFSET = 0x1000
GLOBAL_BASE = 0x8000_0000

# register offsets inside a tile window
CTRL = 0x00
STATUS = 0x04
KERNEL_ID = 0x08
PARAM0 = 0x10
NUM_PARAMS = 8
REG_FILE_END = PARAM0 + 4 * NUM_PARAMS

CTRL_START = 0x1

STATUS_DONE = 0x1
STATUS_ERROR = 0x2
STATUS_BUSY = 0x4
STATUS_DEVICE_OWNED = STATUS_DONE | STATUS_ERROR | STATUS_BUSY

EVENT_KERNEL_DONE = 0x1000
EVENT_KERNEL_ERROR = 0x2000


def param(i: int) -> int:
    """Offset of PARAM register ``i``."""
    if not 0 <= i < NUM_PARAMS:
        raise IndexError(f"PARAM{i} does not exist")
    return PARAM0 + 4 * i


def tile_index(col: int, row: int, cols: int) -> int:
    return row * cols + col


def tile_base(col: int, row: int, cols: int) -> int:
    """Base address of the tile window at ``(col, row)`` in a ``cols``-wide grid."""
    return TILE_REGION_BASE + tile_index(col, row, cols) * TILE_STRIDE


def local_base(col: int, row: int, cols: int) -> int:
    return tile_base(col, row, cols) + LOCAL_MEM_OFFSET


def done_event(index: int) -> int:
    return EVENT_KERNEL_DONE | index


def error_event(index: int) -> int:
    return EVENT_KERNEL_ERROR | index
