"""
Register-mapped tile-array accelerator simulator.

The device is a ``cols x rows`` grid of tiles, each with a small register file
and a local memory, plus a flat external DRAM. Time is a virtual tick counter:
DMA transfers and kernels are scheduled as completions on that clock and take
effect when the clock reaches them, so identical command sequences always end
on identical clock values.

Classes
-------
CacheModel: Host-cache behaviour towards DMA.
SimDevice: The simulator, a HalDriver backend.
"""

import heapq
import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .._logging import get_logger
from ..config.schema import DeviceConfig
from ..rcb.format import Direction
from . import regmap
from .driver import AddressFault, DmaDescriptor, DmaFault, HalDriver, HandleFault
from .kernels import get_kernel, kernel_layout, layout_end

logger = get_logger(__name__)


class CacheModel(str, Enum):
    OFF = "off"
    STALE_UNTIL_FLUSH = "stale_until_flush"


@dataclass
class _Transfer:
    handle: int
    tile: int
    done: int
    desc: DmaDescriptor
    data: bytes
    landed: bool = False


class SimDevice(HalDriver):
    """
    Simulated accelerator.

    Parameters
    ----------
    config : DeviceConfig, optional
        Geometry, memory sizes, cost model and cache model.
    event_sink : callable, optional
        Called with the event ID of every kernel completion or kernel error.
    """

    def __init__(self, config: DeviceConfig | None = None, event_sink=None):
        self.config = config or DeviceConfig()
        self.cols = self.config.cols
        self.rows = self.config.rows
        self.ntiles = self.cols * self.rows
        if self.ntiles * regmap.TILE_STRIDE > regmap.GLOBAL_BASE - regmap.TILE_REGION_BASE:
            raise ValueError(f"grid {self.cols}x{self.rows} does not fit the address map")
        if regmap.LOCAL_MEM_OFFSET + self.config.local_mem_size > regmap.TILE_STRIDE:
            raise ValueError("local memory does not fit the tile window")
        self.cache_model = CacheModel(self.config.cache_model)
        self.event_sink = event_sink

        self.regs = np.zeros((self.ntiles, regmap.REG_FILE_END // 4), dtype=np.uint32)
        self.local = np.zeros((self.ntiles, self.config.local_mem_size), dtype=np.uint8)
        self.dram = np.zeros(self.config.global_mem_size, dtype=np.uint8)
        if self.cache_model is CacheModel.STALE_UNTIL_FLUSH:
            self.host = self.dram.copy()
        else:
            self.host = self.dram

        self.clock = 0
        self.kernels_completed = 0
        self._pending = []  # heap of (tick, seq, kind, payload)
        self._seq = itertools.count()
        self._handles = itertools.count(1)
        self._transfers: dict[int, _Transfer] = {}
        self._channels: dict[int, _Transfer] = {}
        self._launched: dict[int, tuple] = {}

    def __repr__(self) -> str:
        return (
            f"SimDevice(grid={self.cols}x{self.rows}, clock={self.clock}, "
            f"cache_model={self.cache_model.value})"
        )

    # -- address decoding ---------------------------------------------------

    def tile_base(self, col: int, row: int) -> int:
        return regmap.tile_base(col, row, self.cols)

    def local_base(self, col: int, row: int) -> int:
        return regmap.local_base(col, row, self.cols)

    def tile_coords(self, index: int) -> tuple[int, int]:
        return index % self.cols, index // self.cols

    def _global_range(self, addr: int, length: int) -> int | None:
        off = addr - regmap.GLOBAL_BASE
        if 0 <= off and off + length <= self.config.global_mem_size:
            return off
        return None

    def _decode(self, addr: int, length: int):
        """Return ``(region, tile, offset)`` for an access of ``length`` bytes."""
        goff = self._global_range(addr, length)
        if goff is not None:
            return "global", None, goff
        rel = addr - regmap.TILE_REGION_BASE
        if 0 <= rel < self.ntiles * regmap.TILE_STRIDE:
            tile, off = divmod(rel, regmap.TILE_STRIDE)
            if off < regmap.REG_FILE_END:
                if off % 4 or length % 4 or off + length > regmap.REG_FILE_END:
                    raise AddressFault(addr, "unaligned register access")
                if off <= 0x0C < off + length:
                    raise AddressFault(addr - off + 0x0C, "reserved register")
                return "reg", tile, off
            loff = off - regmap.LOCAL_MEM_OFFSET
            if 0 <= loff and loff + length <= self.config.local_mem_size:
                return "local", tile, loff
        raise AddressFault(addr)

    # -- clock and completions ---------------------------------------------

    def now(self) -> int:
        return self.clock

    def _charge(self, ticks: int):
        self._advance_to(self.clock + ticks)

    def _schedule(self, tick: int, kind: str, payload):
        heapq.heappush(self._pending, (tick, next(self._seq), kind, payload))

    def _next_tick(self) -> int | None:
        return self._pending[0][0] if self._pending else None

    def _advance_to(self, tick: int):
        while self._pending and self._pending[0][0] <= tick:
            when, _, kind, payload = heapq.heappop(self._pending)
            self.clock = max(self.clock, when)
            if kind == "dma":
                self._land(payload)
            else:
                self._complete_kernel(payload)
        self.clock = max(self.clock, tick)

    def idle(self) -> bool:
        nxt = self._next_tick()
        if nxt is None:
            return False
        self._advance_to(nxt)
        return True

    def _post(self, event_id: int):
        if self.event_sink is not None:
            self.event_sink(event_id)

    # -- registers ----------------------------------------------------------

    def _load32(self, addr: int) -> int:
        region, tile, off = self._decode(addr, 4)
        if region == "reg":
            return int(self.regs[tile, off // 4])
        mem = self.local[tile] if region == "local" else self.host
        return int.from_bytes(mem[off : off + 4].tobytes(), "little")

    def _store32(self, addr: int, value: int):
        value &= 0xFFFF_FFFF
        region, tile, off = self._decode(addr, 4)
        if region != "reg":
            mem = self.local[tile] if region == "local" else self.host
            mem[off : off + 4] = np.frombuffer(value.to_bytes(4, "little"), dtype=np.uint8)
            return
        if off == regmap.STATUS:
            owned = int(self.regs[tile, off // 4]) & regmap.STATUS_DEVICE_OWNED
            self.regs[tile, off // 4] = (value & ~regmap.STATUS_DEVICE_OWNED) | owned
        elif off == regmap.CTRL:
            self.regs[tile, off // 4] = value & ~regmap.CTRL_START
            if value & regmap.CTRL_START:
                self._launch(tile)
        else:
            self.regs[tile, off // 4] = value

    def write32(self, addr: int, value: int) -> None:
        self._store32(addr, value)
        self._charge(self.config.reg_access_ticks)

    def read32(self, addr: int) -> int:
        value = self._load32(addr)
        self._charge(self.config.reg_access_ticks)
        return value

    def write_block(self, addr: int, data: bytes) -> None:
        data = bytes(data)
        region, tile, off = self._decode(addr, len(data))
        if region == "reg":
            for i in range(0, len(data), 4):
                self._store32(addr + i, int.from_bytes(data[i : i + 4], "little"))
        else:
            mem = self.local[tile] if region == "local" else self.host
            mem[off : off + len(data)] = np.frombuffer(data, dtype=np.uint8)
        self._charge(self.config.reg_access_ticks)

    def poll_register_masked(
        self, addr: int, mask: int, expected: int, timeout_us: int
    ) -> bool:
        """
        Poll ``addr`` every ``poll_interval_ticks`` until the masked value matches.

        Checks happen at ``start + k * interval`` for ``k = 0 .. ceil(timeout /
        interval)``. Intervals in which no completion is due are skipped without
        changing the outcome or the final clock.
        """
        self._decode(addr, 4)
        start = self.clock
        step = max(1, self.config.poll_interval_ticks)
        budget = timeout_us * self.config.ticks_per_us
        last = -(-budget // step)
        k = 0
        while True:
            if (self._load32(addr) & mask) == expected:
                return True
            if k >= last:
                return False
            nxt = self._next_tick()
            if nxt is None:
                k = last
            else:
                k = min(last, max(k + 1, -(-(nxt - start) // step)))
            self._advance_to(start + k * step)

    # -- kernels ------------------------------------------------------------

    def _set_status(self, tile: int, bits: int):
        word = regmap.STATUS // 4
        self.regs[tile, word] = (int(self.regs[tile, word]) & ~regmap.STATUS_DEVICE_OWNED) | bits

    def _fail(self, tile: int, reason: str):
        logger.bind(tile=tile).warning("kernel error: %s", reason)
        self._launched.pop(tile, None)
        self._set_status(tile, regmap.STATUS_ERROR)
        self._post(regmap.error_event(tile))

    def _launch(self, tile: int):
        if tile in self._launched:
            self._fail(tile, "START while busy")
            return
        self._set_status(tile, regmap.STATUS_BUSY)
        kid = int(self.regs[tile, regmap.KERNEL_ID // 4])
        try:
            spec = get_kernel(kid)
        except KeyError:
            self._fail(tile, f"unknown kernel id {kid}")
            return
        params = [int(self.regs[tile, regmap.param(i) // 4]) for i in range(spec.nparams)]
        try:
            layout = kernel_layout(spec, params)
        except ValueError as exc:
            self._fail(tile, str(exc))
            return
        if layout_end(layout) > self.config.local_mem_size:
            self._fail(tile, f"{spec.name} buffers exceed local memory")
            return
        out_elems = int(np.prod(spec.shapes(params)[spec.output]))
        cost = self.config.kernel_setup_ticks + (
            spec.work * out_elems * self.config.kernel_ticks_per_element
        )
        logger.bind(tile=tile).debug("launch %s params=%s cost=%d", spec.name, params, cost)
        self._launched[tile] = (spec, params, layout)
        self._schedule(self.clock + cost, "kernel", tile)

    def step_kernel(self, tile: int) -> None:
        """Run the kernel launched on ``tile`` to completion right now."""
        self._complete_kernel(tile)

    def _complete_kernel(self, tile: int):
        if tile not in self._launched:
            return
        spec, params, layout = self._launched.pop(tile)
        mem = self.local[tile]
        inputs = {p: mem[o : o + n].tobytes() for p, (o, n) in layout.items() if p in spec.inputs}
        out_off, out_len = layout[spec.output]
        out = spec.run(params, inputs)
        mem[out_off : out_off + out_len] = np.frombuffer(out, dtype=np.uint8)
        self._set_status(tile, regmap.STATUS_DONE)
        self.kernels_completed += 1
        self._post(regmap.done_event(tile))

    # -- DMA ----------------------------------------------------------------

    def _local_side(self, addr: int, length: int) -> tuple[int, int]:
        rel = addr - regmap.TILE_REGION_BASE
        if 0 <= rel < self.ntiles * regmap.TILE_STRIDE:
            tile, off = divmod(rel, regmap.TILE_STRIDE)
            loff = off - regmap.LOCAL_MEM_OFFSET
            if 0 <= loff and loff + length <= self.config.local_mem_size:
                return tile, loff
        raise DmaFault(f"{addr:#x}+{length} is not inside one tile's local memory")

    def _global_side(self, addr: int, length: int) -> int:
        off = self._global_range(addr, length)
        if off is None:
            raise DmaFault(f"{addr:#x}+{length} is not inside global memory")
        return off

    def initiate_dma(self, desc: DmaDescriptor) -> int:
        if desc.length <= 0:
            raise DmaFault(f"DMA length must be positive, got {desc.length}")
        if desc.direction == Direction.TO_DEVICE:
            goff = self._global_side(desc.src, desc.length)
            tile, _ = self._local_side(desc.dst, desc.length)
        elif desc.direction == Direction.FROM_DEVICE:
            tile, loff = self._local_side(desc.src, desc.length)
            self._global_side(desc.dst, desc.length)
        else:
            raise DmaFault(f"unknown direction {desc.direction!r}")

        busy = self._channels.get(tile)
        if busy is not None and not busy.landed:
            self._advance_to(busy.done)

        if desc.direction == Direction.TO_DEVICE:
            data = self.dram[goff : goff + desc.length].tobytes()
        else:
            data = self.local[tile, loff : loff + desc.length].tobytes()
        cost = self.config.dma_setup_ticks + -(-desc.length // self.config.dma_bytes_per_tick)
        transfer = _Transfer(next(self._handles), tile, self.clock + cost, desc, data)
        self._transfers[transfer.handle] = transfer
        self._channels[tile] = transfer
        self._schedule(transfer.done, "dma", transfer)
        return transfer.handle

    def _land(self, transfer: _Transfer):
        desc = transfer.desc
        if desc.direction == Direction.TO_DEVICE:
            tile, loff = self._local_side(desc.dst, desc.length)
            self.local[tile, loff : loff + desc.length] = np.frombuffer(transfer.data, dtype=np.uint8)
        else:
            goff = self._global_side(desc.dst, desc.length)
            self.dram[goff : goff + desc.length] = np.frombuffer(transfer.data, dtype=np.uint8)
        transfer.landed = True

    def wait_dma(self, handle) -> None:
        transfer = self._transfers.pop(handle, None)
        if transfer is None:
            raise HandleFault(handle)
        self._advance_to(transfer.done)

    # -- cache --------------------------------------------------------------

    def _cache_range(self, addr: int, length: int) -> int:
        off = self._global_range(addr, length)
        if off is None or length < 0:
            raise AddressFault(addr, f"cache range of {length} bytes outside global memory")
        return off

    def flush_cache(self, addr: int, length: int) -> None:
        off = self._cache_range(addr, length)
        if self.cache_model is CacheModel.STALE_UNTIL_FLUSH:
            self.dram[off : off + length] = self.host[off : off + length]
        self._charge(self.config.reg_access_ticks)

    def invalidate_cache(self, addr: int, length: int) -> None:
        off = self._cache_range(addr, length)
        if self.cache_model is CacheModel.STALE_UNTIL_FLUSH:
            self.host[off : off + length] = self.dram[off : off + length]
        self._charge(self.config.reg_access_ticks)

    # -- host CPU access to global memory ---------------------------------

    def host_write(self, addr: int, data) -> None:
        data = bytes(data)
        off = self._global_range(addr, len(data))
        if off is None:
            raise AddressFault(addr, "host write outside global memory")
        self.host[off : off + len(data)] = np.frombuffer(data, dtype=np.uint8)

    def host_read(self, addr: int, length: int) -> bytes:
        return self.host_memory(addr, length).tobytes()

    def host_memory(self, addr: int, length: int) -> memoryview:
        """Zero-copy view of ``length`` bytes of global memory as the host sees it."""
        off = self._global_range(addr, length)
        if off is None:
            raise AddressFault(addr, "host access outside global memory")
        return memoryview(self.host[off : off + length])
