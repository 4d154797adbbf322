"""
Direct vs. mediated control paths.

The mediated path models a control plane that crosses a privilege boundary
on every command: a fixed ``crossing_penalty`` per operation on top of the
direct path's fixed cost.

Classes
-------
PathModel: Closed-form per-transfer cost of a control path.

Functions
---------
run_transfer_sweep: Time block transfers of several sizes under both paths.
compare_control_path: Run a compiled pipeline under both paths.
to_long: Long-form (metric, key, value) view of a result table.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from .._errors import RcbkitError
from .._logging import get_logger
from ..config.schema import BenchConfig, DeviceConfig
from ..hal import regmap
from ..hal.crossing import CrossingDriver
from ..hal.driver import DmaDescriptor
from ..hal.simdev import SimDevice
from ..rcb.format import Direction
from ..runtime.context import Runtime

logger = get_logger(__name__)


class SweepError(RcbkitError):
    pass


@dataclass(frozen=True)
class PathModel:
    name: str
    c_direct: int
    crossing_penalty: int
    bandwidth: int

    def __post_init__(self):
        if self.crossing_penalty < 0:
            raise SweepError(f"crossing penalty must be >= 0, got {self.crossing_penalty}")

    @classmethod
    def direct(cls, device: DeviceConfig) -> "PathModel":
        return cls("direct", device.dma_setup_ticks, 0, device.dma_bytes_per_tick)

    @classmethod
    def mediated(cls, device: DeviceConfig, penalty: int) -> "PathModel":
        return cls("mediated", device.dma_setup_ticks, penalty, device.dma_bytes_per_tick)

    def transfer_ticks(self, size: int) -> float:
        return self.c_direct + self.crossing_penalty + size / self.bandwidth


def model_speedup(size: int, c_direct: int, penalty: int, bandwidth: int) -> float:
    """``(c + p + s/B) / (c + s/B)``."""
    base = c_direct + size / bandwidth
    return (base + penalty) / base


def _time_transfers(hal, size: int, count: int) -> int:
    # global memory to tile (0,0) local memory, one transfer at a time
    dst = regmap.local_base(0, 0, 1)
    start = hal.now()
    for _ in range(count):
        hal.wait_dma(hal.initiate_dma(DmaDescriptor(Direction.TO_DEVICE, regmap.GLOBAL_BASE, dst, size)))
    return hal.now() - start


def run_transfer_sweep(
    sizes=None,
    volume: int | None = None,
    penalty: int | None = None,
    device: DeviceConfig | None = None,
    bench: BenchConfig | None = None,
    progress: bool = False,
) -> pd.DataFrame:
    """
    Move ``volume`` bytes in blocks of each size under both control paths.

    Parameters
    ----------
    sizes : list[int], optional
        Block sizes; default ``bench.sweep_sizes`` (1, 4, 16 and 32 KiB).
    volume : int, optional
        Total bytes per size; default ``bench.sweep_volume`` (4 MiB).
    penalty : int, optional
        Ticks per boundary crossing; default ``bench.crossing_penalty``.

    Returns
    -------
    pandas.DataFrame
        Indexed by ``size`` with columns ``transfers``, ``direct_ticks``,
        ``mediated_ticks``, ``speedup`` (mediated over direct) and
        ``model_speedup`` (closed form).

    Raises
    ------
    SweepError
        If a size does not divide the volume or does not fit tile memory.
    """
    bench = bench or BenchConfig()
    device = device or DeviceConfig()
    sizes = list(bench.sweep_sizes if sizes is None else sizes)
    volume = bench.sweep_volume if volume is None else volume
    penalty = bench.crossing_penalty if penalty is None else penalty
    if penalty < 0:
        raise SweepError(f"crossing penalty must be >= 0, got {penalty}")
    direct_model = PathModel.direct(device)

    rows = []
    for size in tqdm(sizes, desc="transfer sweep", disable=not progress):
        if size <= 0 or volume % size:
            raise SweepError(f"block size {size} does not divide volume {volume}")
        if size > device.local_mem_size:
            raise SweepError(f"block size {size} exceeds {device.local_mem_size} bytes of tile memory")
        count = volume // size
        direct = _time_transfers(SimDevice(device), size, count)
        mediated = _time_transfers(CrossingDriver(SimDevice(device), penalty), size, count)
        rows.append(
            {
                "size": size,
                "transfers": count,
                "direct_ticks": direct,
                "mediated_ticks": mediated,
                "speedup": mediated / direct,
                "model_speedup": model_speedup(size, direct_model.c_direct, penalty, direct_model.bandwidth),
            }
        )
    frame = pd.DataFrame(rows).set_index("size")
    logger.info("sweep over %s with penalty %d: speedups %s", sizes, penalty, frame["speedup"].round(3).tolist())
    return frame


def compare_control_path(
    model,
    penalty: int | None = None,
    device: DeviceConfig | None = None,
    bench: BenchConfig | None = None,
    data: bytes | None = None,
    seed: int = 0,
) -> pd.DataFrame:
    """
    Run one inference of a compiled model under both control paths.

    Returns
    -------
    pandas.DataFrame
        Indexed by path (``direct``, ``mediated``) with columns ``ops``,
        ``crossings``, ``ticks``, ``overhead_per_op`` and ``ratio`` (ticks
        relative to the direct path). Outputs of both runs are identical.
    """
    bench = bench or BenchConfig()
    penalty = bench.crossing_penalty if penalty is None else penalty
    if data is None:
        size = model.manifest.input_size()
        data = np.random.default_rng(seed).integers(0, 256, size, dtype=np.uint8).tobytes()

    rows = {}
    outputs = {}
    for path, crossing in (("direct", None), ("mediated", penalty)):
        runtime = Runtime(device, crossing_penalty=crossing)
        runtime.provision(model)
        outputs[path] = runtime.run(data)
        traces = runtime.last_result.traces
        ops = sum(len(t) for t in traces)
        ticks = sum(r.tick - r.start for t in traces for r in t.records)
        rows[path] = {
            "ops": ops,
            "crossings": getattr(runtime.hal, "crossings", 0),
            "ticks": ticks,
        }
    if outputs["direct"] != outputs["mediated"]:
        raise SweepError("direct and mediated runs disagree")

    frame = pd.DataFrame.from_dict(rows, orient="index")
    frame.index.name = "path"
    base = frame.loc["direct", "ticks"]
    frame["overhead_per_op"] = (frame["ticks"] - base) / frame["ops"]
    frame["ratio"] = frame["ticks"] / base
    return frame


def to_long(frame: pd.DataFrame) -> pd.DataFrame:
    """Melt a result table into ``metric, key, value`` rows."""
    named = frame.copy()
    named.index = named.index.astype(str)
    named.index.name = "key"
    long = named.reset_index().melt(id_vars="key", var_name="metric", value_name="value")
    return long[["metric", "key", "value"]]
