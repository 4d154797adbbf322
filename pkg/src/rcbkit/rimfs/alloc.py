"""
Aligned region allocator with buffer ownership stages.

Classes
-------
Stage: Ownership stage of a region.
Region: One allocated block.
Arena: First-fit free-list allocator over a fixed address range.
OutOfMemory, StageError: Errors.

Functions
---------
advance_stage: Move a region to the next ownership stage.
"""

from dataclasses import dataclass, field
from enum import Enum

from .._errors import RcbkitError


class OutOfMemory(RcbkitError):
    pass


class StageError(RcbkitError):
    pass


class Stage(Enum):
    FREE = "free"
    RECEIVE = "receive"
    COMPUTE = "compute"
    SEND = "send"

    @property
    def successor(self) -> "Stage":
        return _SUCCESSOR[self]


_SUCCESSOR = {
    Stage.FREE: Stage.RECEIVE,
    Stage.RECEIVE: Stage.COMPUTE,
    Stage.COMPUTE: Stage.SEND,
    Stage.SEND: Stage.FREE,
}


@dataclass(eq=False)
class Region:
    address: int
    size: int
    alignment: int
    stage: Stage = Stage.FREE
    live: bool = field(default=True, repr=False)

    @property
    def end(self) -> int:
        return self.address + self.size


def advance_stage(region: Region, target: Stage | None = None) -> Region:
    """
    Advance a region along FREE -> RECEIVE -> COMPUTE -> SEND -> FREE.

    Parameters
    ----------
    region : Region
        A live region.
    target : Stage, optional
        The expected next stage; defaults to the successor.

    Raises
    ------
    StageError
        If ``target`` is not the successor or the region was released.
    """
    if not region.live:
        raise StageError(f"region at {region.address:#x} was released")
    nxt = region.stage.successor
    if target is not None and Stage(target) is not nxt:
        raise StageError(
            f"illegal transition {region.stage.name} -> {Stage(target).name}, "
            f"expected {nxt.name}"
        )
    region.stage = nxt
    return region


class Arena:
    """
    First-fit allocator over ``[base, base + size)``.

    Free blocks are kept sorted by address and coalesced on release.
    """

    def __init__(self, base: int, size: int):
        if size <= 0:
            raise ValueError(f"arena size must be positive, got {size}")
        self.base = base
        self.size = size
        self.free_list: list[tuple[int, int]] = [(base, size)]
        self.live: set[Region] = set()
        self.peak_live_bytes = 0

    def __repr__(self) -> str:
        return (
            f"Arena(base={self.base:#x}, size={self.size}, live={len(self.live)}, "
            f"free_bytes={self.free_bytes})"
        )

    @property
    def live_bytes(self) -> int:
        return sum(r.size for r in self.live)

    @property
    def free_bytes(self) -> int:
        return sum(size for _, size in self.free_list)

    def alloc_region(self, size: int, alignment: int = 64) -> Region:
        """
        Allocate ``size`` bytes at an address that is a multiple of ``alignment``.

        Raises
        ------
        ValueError
            If ``size`` is not positive or ``alignment`` is not a power of two.
        OutOfMemory
            If no free block can hold the aligned request.
        """
        if size <= 0:
            raise ValueError(f"region size must be positive, got {size}")
        if alignment <= 0 or alignment & (alignment - 1):
            raise ValueError(f"alignment must be a power of two, got {alignment}")

        for i, (start, length) in enumerate(self.free_list):
            addr = -(-start // alignment) * alignment
            if addr + size > start + length:
                continue
            pieces = [(start, addr - start), (addr + size, start + length - addr - size)]
            self.free_list[i : i + 1] = [p for p in pieces if p[1] > 0]
            region = Region(addr, size, alignment)
            self.live.add(region)
            self.peak_live_bytes = max(self.peak_live_bytes, self.live_bytes)
            return region
        raise OutOfMemory(
            f"cannot allocate {size} bytes aligned to {alignment}: "
            f"{self.free_bytes} bytes free in {len(self.free_list)} blocks"
        )

    def release(self, region: Region) -> None:
        """Return a region to the free list regardless of its stage."""
        if region not in self.live:
            raise StageError(f"region at {region.address:#x} is not live in this arena")
        self.live.remove(region)
        region.live = False
        region.stage = Stage.FREE

        blocks = sorted([*self.free_list, (region.address, region.size)])
        merged = [blocks[0]]
        for start, length in blocks[1:]:
            last_start, last_len = merged[-1]
            if last_start + last_len == start:
                merged[-1] = (last_start, last_len + length)
            else:
                merged.append((start, length))
        self.free_list = merged

    def release_all(self) -> None:
        for region in list(self.live):
            self.release(region)
