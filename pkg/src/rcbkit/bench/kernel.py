"""
Stage-separated kernel benchmarks.

Each iteration runs one inference on a provisioned runtime and attributes its
virtual-clock ticks to input transfer, compute and output transfer.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from tqdm import tqdm

from .._logging import get_logger
from ..compiler.pack import compile_graph
from ..config.schema import BenchConfig, CompilerConfig, DeviceConfig
from ..runtime.context import Runtime
from ..runtime.executor import STAGES, stage_ticks
from .stats import LatencyStats, StatsError, compute_stats

logger = get_logger(__name__)

MIN_ITERATIONS = 100


def passthrough_graph(nbytes: int = 4096) -> dict:
    """A single PASSTHROUGH node moving ``nbytes`` bytes, no arithmetic."""
    return {
        "nodes": [{"name": "copy", "kernel": "passthrough", "params": [nbytes]}],
        "inputs": [{"name": "x", "to": "copy:in", "shape": [nbytes], "dtype": "u8"}],
        "outputs": [{"name": "y", "from": "copy:out", "shape": [nbytes], "dtype": "u8"}],
    }


def matmul_graph(m: int = 64, k: int = 64, n: int = 64) -> dict:
    """A single MATMUL_I8 node with both operands as graph inputs."""
    return {
        "nodes": [{"name": "gemm", "kernel": "matmul_i8", "params": [m, k, n]}],
        "inputs": [
            {"name": "a", "to": "gemm:a", "shape": [m, k], "dtype": "i8"},
            {"name": "b", "to": "gemm:b", "shape": [k, n], "dtype": "i8"},
        ],
        "outputs": [{"name": "c", "from": "gemm:c", "shape": [m, n], "dtype": "i32"}],
    }


BENCH_GRAPHS = {"passthrough": passthrough_graph, "matmul": matmul_graph}


@dataclass
class KernelBench:
    """Per-stage samples and their statistics."""

    kernel: str
    samples: pd.DataFrame
    stats: dict
    runtime: Runtime

    def __repr__(self) -> str:
        return f"KernelBench({self.kernel}, iterations={len(self.samples)})"

    def table(self) -> pd.DataFrame:
        """One row per stage, one column per statistic."""
        return pd.DataFrame({stage: s.to_dict() for stage, s in self.stats.items()}).T


def run_kernel_bench(
    kernel: str = "passthrough",
    iterations: int | None = None,
    device: DeviceConfig | None = None,
    bench: BenchConfig | None = None,
    progress: bool = False,
    seed: int = 0,
) -> KernelBench:
    """
    Benchmark one kernel stage by stage.

    Parameters
    ----------
    kernel : str
        ``"passthrough"`` (4096 bytes) or ``"matmul"`` (64x64 int8).
    iterations : int, optional
        At least 100; defaults to ``bench.iterations``.
    device : DeviceConfig, optional
    bench : BenchConfig, optional
        Iterations and warm-up defaults.
    progress : bool
        Show a tqdm progress bar.
    seed : int
        Seed of the random inputs.

    Returns
    -------
    KernelBench
        ``stats`` maps ``input``, ``compute`` and ``output`` to LatencyStats.

    Raises
    ------
    StatsError
        If fewer than 100 iterations are requested.
    """
    bench = bench or BenchConfig()
    iterations = bench.iterations if iterations is None else iterations
    if iterations < MIN_ITERATIONS:
        raise StatsError(f"need at least {MIN_ITERATIONS} iterations, got {iterations}")
    if kernel not in BENCH_GRAPHS:
        raise StatsError(f"unknown bench kernel {kernel!r}; choose from {sorted(BENCH_GRAPHS)}")

    device = device or DeviceConfig()
    model = compile_graph(BENCH_GRAPHS[kernel](), options=CompilerConfig(), grid=device)
    runtime = Runtime(device)
    runtime.provision(model)
    rng = np.random.default_rng(seed)
    size = model.manifest.input_size()

    rows = []
    for _ in tqdm(range(iterations), desc=f"bench {kernel}", disable=not progress):
        runtime.run(rng.integers(0, 256, size, dtype=np.uint8).tobytes())
        rows.append(stage_ticks(runtime.last_result.traces))
    samples = pd.DataFrame(rows, columns=list(STAGES))
    stats: dict[str, LatencyStats] = {
        stage: compute_stats(samples[stage].to_numpy(), bench.warmup) for stage in STAGES
    }
    logger.info(
        "%s: %d iterations, mean ticks %s", kernel, iterations,
        {stage: stats[stage].mean for stage in STAGES},
    )
    return KernelBench(kernel, samples, stats, runtime)
