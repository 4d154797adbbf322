"""
Hardware primitive interface.

Classes
-------
HalDriver: The eight primitives every hardware backend implements.
DmaDescriptor: One programmed data movement.
HalFault: Root of hardware faults.
AddressFault, DmaFault, HandleFault: Specific faults.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

from .._errors import RcbkitError
from ..rcb.format import Direction


class HalFault(RcbkitError):
    """A hardware primitive was asked to do something the device cannot."""


class AddressFault(HalFault):
    def __init__(self, addr: int, detail: str = "unmapped address"):
        self.addr = addr
        super().__init__(f"{detail}: {addr:#x}")


class DmaFault(HalFault):
    pass


class HandleFault(HalFault):
    def __init__(self, handle):
        self.handle = handle
        super().__init__(f"unknown DMA handle {handle!r}")


@dataclass(frozen=True)
class DmaDescriptor:
    """A resolved data movement between global memory and one tile's local memory."""

    direction: Direction
    src: int
    dst: int
    length: int

    def __repr__(self) -> str:
        return (
            f"DmaDescriptor({Direction(self.direction).name}, "
            f"src={self.src:#x}, dst={self.dst:#x}, length={self.length})"
        )


class HalDriver(ABC):
    """Abstract dispatch table of hardware primitives.

    Implementations must be total over the device address map: any access
    outside it raises ``AddressFault`` rather than being ignored.
    """

    @abstractmethod
    def write32(self, addr: int, value: int) -> None:
        """Write a 32-bit word to a register or local-memory address."""

    @abstractmethod
    def read32(self, addr: int) -> int:
        """Read a 32-bit word from a register or local-memory address."""

    @abstractmethod
    def write_block(self, addr: int, data: bytes) -> None:
        """Write a byte block, word by word when it lands in register space."""

    @abstractmethod
    def initiate_dma(self, desc: DmaDescriptor):
        """Start a transfer and return an opaque handle for ``wait_dma``."""

    @abstractmethod
    def wait_dma(self, handle) -> None:
        """Block until the transfer behind ``handle`` has landed."""

    @abstractmethod
    def poll_register_masked(
        self, addr: int, mask: int, expected: int, timeout_us: int
    ) -> bool:
        """Return True once ``read32(addr) & mask == expected``, False on timeout."""

    @abstractmethod
    def flush_cache(self, addr: int, length: int) -> None:
        """Publish host writes in the range to the DMA-visible copy."""

    @abstractmethod
    def invalidate_cache(self, addr: int, length: int) -> None:
        """Drop the host view of the range so it rereads DMA-written data."""

    def now(self) -> int:
        """Virtual clock in ticks; backends without one report 0."""
        return 0

    def idle(self) -> bool:
        """Advance to the next pending completion. Returns False if nothing is pending."""
        return False
