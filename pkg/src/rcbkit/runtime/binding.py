"""
Runtime binding layer.

Resolves symbolic buffer IDs and tile-relative register references in RCBs to
absolute device addresses, and plans how intermediate buffers share arena
memory across a pipeline.

Classes
-------
Binding: Where one buffer ID lives.
BindingTable: Buffer ID to Binding map.
ResolvedRcb: An Rcb whose every address is absolute.
BufferLifetime, Slot, AllocationPlan: The result of ``plan_buffers``.

Functions
---------
bind: Resolve an Rcb against a table and grid.
is_resolved: Whether an Rcb holds only absolute addresses.
plan_buffers: Compute lifetimes and slot reuse over a pipeline.
release_after: Buffer IDs whose last use is a given RCB.
"""

from dataclasses import dataclass, field, replace

from .._errors import RcbkitError
from ..compiler.manifest import MappingDescriptor, TensorClass
from ..hal import regmap
from ..rcb.format import Absolute, Rcb, RelativeTile, Symbolic, iter_addrs
from ..rimfs.alloc import Arena, OutOfMemory, Region


class UnresolvedSymbol(RcbkitError):
    def __init__(self, missing):
        self.missing = sorted(set(missing))
        super().__init__(f"unresolved buffer ids {self.missing}")


class RangeError(RcbkitError):
    pass


class PlanError(RcbkitError):
    pass


@dataclass(frozen=True)
class Binding:
    source: str  # "rimfs" or "region"
    address: int
    size: int


class BindingTable:
    """Map of buffer ID to resolved address and size."""

    def __init__(self, entries: dict | None = None):
        self._entries: dict[int, Binding] = dict(entries or {})
        self.frozen = False

    def __repr__(self) -> str:
        return f"BindingTable({len(self._entries)} ids, frozen={self.frozen})"

    def __contains__(self, buffer_id) -> bool:
        return buffer_id in self._entries

    def __getitem__(self, buffer_id) -> Binding:
        return self._entries[buffer_id]

    def __len__(self) -> int:
        return len(self._entries)

    def bind(self, buffer_id: int, address: int, size: int, source: str = "region"):
        if self.frozen:
            raise RcbkitError("binding table is frozen")
        if buffer_id in self._entries:
            raise RcbkitError(f"buffer id {buffer_id:#x} is already bound")
        if size < 0:
            raise RcbkitError(f"buffer id {buffer_id:#x} has negative size")
        self._entries[buffer_id] = Binding(source, address, size)

    def bind_file(self, image, file_id: int):
        address, size = image.lookup(file_id)
        self.bind(file_id, address, size, source="rimfs")

    def bind_region(self, buffer_id: int, region: Region):
        self.bind(buffer_id, region.address, region.size, source="region")

    def freeze(self) -> "BindingTable":
        self.frozen = True
        return self

    def extended(self, entries: dict) -> "BindingTable":
        """A new unfrozen table holding these bindings plus ``entries``."""
        table = BindingTable(self._entries)
        for buffer_id, binding in entries.items():
            table.bind(buffer_id, binding.address, binding.size, binding.source)
        return table


@dataclass(frozen=True, repr=False)
class ResolvedRcb(Rcb):
    pass


def is_resolved(rcb: Rcb) -> bool:
    return all(
        isinstance(ref, Absolute) for op in rcb.ops for _, ref, _ in iter_addrs(op)
    )


def _symbol_ids(rcb: Rcb):
    for op in rcb.ops:
        for _, ref, _ in iter_addrs(op):
            if isinstance(ref, Symbolic):
                yield ref.buffer_id


def bind(rcb: Rcb, table: BindingTable, grid) -> ResolvedRcb:
    """
    Resolve every SYMBOLIC and RELATIVE_TILE reference of an RCB.

    Parameters
    ----------
    rcb : Rcb
        A valid block.
    table : BindingTable
        Buffer bindings.
    grid : object
        Anything with ``cols`` and ``rows`` attributes, e.g. a DeviceConfig.

    Returns
    -------
    ResolvedRcb
        The same block with absolute addresses; ``rcb`` itself if it holds
        only absolute addresses already, so binding is idempotent.

    Raises
    ------
    UnresolvedSymbol
        Listing every buffer ID missing from the table.
    RangeError
        If an access runs past its buffer or a tile lies outside the grid.
    """
    if isinstance(rcb, ResolvedRcb) or is_resolved(rcb):
        return rcb
    missing = [bid for bid in _symbol_ids(rcb) if bid not in table]
    if missing:
        raise UnresolvedSymbol(missing)

    def resolve(ref, length, where):
        if isinstance(ref, Symbolic):
            entry = table[ref.buffer_id]
            if ref.offset + length > entry.size:
                raise RangeError(
                    f"{where}: buffer {ref.buffer_id:#x} access {ref.offset}+{length} "
                    f"exceeds its {entry.size} bytes"
                )
            return Absolute(entry.address + ref.offset)
        if isinstance(ref, RelativeTile):
            if ref.col >= grid.cols or ref.row >= grid.rows:
                raise RangeError(
                    f"{where}: tile ({ref.col},{ref.row}) outside {grid.cols}x{grid.rows} grid"
                )
            if ref.offset + length > regmap.TILE_STRIDE:
                raise RangeError(f"{where}: tile offset {ref.offset:#x} outside the tile window")
            return Absolute(regmap.tile_base(ref.col, ref.row, grid.cols) + ref.offset)
        return ref

    ops = []
    for i, op in enumerate(rcb.ops):
        changes = {
            name: resolve(ref, length, f"op {i} {name}")
            for name, ref, length in iter_addrs(op)
        }
        ops.append(replace(op, **changes) if changes else op)
    return ResolvedRcb(rcb.block_type, tuple(ops), rcb.deps, rcb.version)


# -- buffer planning ----------------------------------------------------------


@dataclass
class BufferLifetime:
    buffer_id: int
    first: int
    last: int
    size: int
    cls: TensorClass
    slot: int | None = None

    def overlaps(self, other: "BufferLifetime") -> bool:
        return self.first <= other.last and other.first <= self.last


@dataclass
class Slot:
    index: int
    size: int
    alignment: int
    last: int
    region: Region | None = None


@dataclass
class AllocationPlan:
    """
    Lifetimes and arena slots of every buffer a pipeline refers to.

    Weight buffers keep a lifetime entry but no slot: they bind to the image.
    """

    lifetimes: dict = field(default_factory=dict)
    slots: list = field(default_factory=list)
    peak_live_bytes: int = 0
    length: int = 0

    def __repr__(self) -> str:
        return (
            f"AllocationPlan(buffers={len(self.lifetimes)}, slots={len(self.slots)}, "
            f"peak_live_bytes={self.peak_live_bytes})"
        )

    @property
    def slot_bytes(self) -> int:
        return sum(s.size for s in self.slots)

    def region_of(self, buffer_id: int) -> Region | None:
        slot = self.lifetimes[buffer_id].slot
        return None if slot is None else self.slots[slot].region

    def materialize(self, arena: Arena) -> dict:
        """
        Allocate one region per slot.

        Returns
        -------
        dict[int, Region]
            Region of every non-weight buffer.

        Raises
        ------
        PlanError
            If the arena cannot hold the slots.
        """
        try:
            for slot in self.slots:
                slot.region = arena.alloc_region(slot.size, slot.alignment)
        except OutOfMemory as exc:
            for slot in self.slots:
                if slot.region is not None and slot.region.live:
                    arena.release(slot.region)
                slot.region = None
            raise PlanError(f"plan does not fit the arena: {exc}") from exc
        return {
            bid: self.slots[lt.slot].region
            for bid, lt in self.lifetimes.items()
            if lt.slot is not None
        }

    def bindings(self) -> dict:
        """Region bindings of every materialized non-weight buffer."""
        return {
            bid: Binding("region", region.address, self.lifetimes[bid].size)
            for bid in self.lifetimes
            if (region := self.region_of(bid)) is not None
        }


def _manifest_info(manifest, buffer_id):
    if isinstance(manifest, MappingDescriptor):
        info = manifest[buffer_id]
        return info.size, info.alignment, info.cls
    return int(manifest[buffer_id]), 64, TensorClass.ACTIVATION


def plan_buffers(pipeline, manifest, arena: Arena | None = None) -> AllocationPlan:
    """
    Compute buffer lifetimes over a pipeline and assign reusable arena slots.

    A buffer lives from the first to the last RCB that references it. Graph
    inputs are live from the start (the host writes them before the first
    block runs) and graph outputs until the end (the host reads them after the
    last block). Non-weight buffers are visited in order of first use and take
    the smallest free slot that fits; a slot is free once its previous
    occupant's last use is strictly earlier.

    Parameters
    ----------
    pipeline : list[Rcb]
        The ordered blocks.
    manifest : MappingDescriptor or dict[int, int]
        Tensor sizes (a plain dict treats every buffer as an activation).
    arena : Arena, optional
        If given, the slots must fit its size.

    Raises
    ------
    PlanError
        If a referenced ID is missing from the manifest, a buffer has no
        bytes or a bad alignment, or the slots do not fit.
    """
    pipeline = list(pipeline)
    uses: dict[int, list[int]] = {}
    for idx, rcb in enumerate(pipeline):
        for bid in _symbol_ids(rcb):
            span = uses.setdefault(bid, [idx, idx])
            span[1] = idx
    gaps = sorted(bid for bid in uses if bid not in manifest)
    if gaps:
        raise PlanError(f"buffer ids missing from manifest: {[hex(b) for b in gaps]}")

    end = max(len(pipeline) - 1, 0)
    plan = AllocationPlan(length=len(pipeline))
    for bid, (first, last) in uses.items():
        size, alignment, cls = _manifest_info(manifest, bid)
        if cls is not TensorClass.WEIGHT:
            if size <= 0:
                raise PlanError(f"buffer {bid:#x} has size {size}")
            if alignment <= 0 or alignment & (alignment - 1):
                raise PlanError(f"buffer {bid:#x} alignment {alignment} is not a power of two")
        if cls is TensorClass.INPUT:
            first = 0
        elif cls is TensorClass.OUTPUT:
            last = end
        plan.lifetimes[bid] = BufferLifetime(bid, first, last, size, cls)

    for lt in sorted(plan.lifetimes.values(), key=lambda lt: (lt.first, lt.buffer_id)):
        if lt.cls is TensorClass.WEIGHT:
            continue
        alignment = _manifest_info(manifest, lt.buffer_id)[1]
        free = [s for s in plan.slots if s.last < lt.first and s.size >= lt.size]
        if free:
            slot = min(free, key=lambda s: (s.size, s.index))
            slot.alignment = max(slot.alignment, alignment)
        else:
            slot = Slot(len(plan.slots), lt.size, alignment, lt.last)
            plan.slots.append(slot)
        slot.last = lt.last
        lt.slot = slot.index

    for idx in range(len(pipeline)):
        live = sum(
            lt.size
            for lt in plan.lifetimes.values()
            if lt.cls is not TensorClass.WEIGHT and lt.first <= idx <= lt.last
        )
        plan.peak_live_bytes = max(plan.peak_live_bytes, live)

    if arena is not None:
        need = sum(-(-s.size // s.alignment) * s.alignment for s in plan.slots)
        if need > arena.size:
            raise PlanError(f"plan needs {need} bytes, arena holds {arena.size}")
    return plan


def release_after(plan: AllocationPlan, index: int) -> list[int]:
    """Non-weight buffer IDs whose last use is RCB ``index``."""
    return sorted(
        bid
        for bid, lt in plan.lifetimes.items()
        if lt.last == index and lt.cls is not TensorClass.WEIGHT
    )
