from .kernel import KernelBench, matmul_graph, passthrough_graph, run_kernel_bench
from .stats import LatencyStats, StatsError, compute_stats
from .sweep import PathModel, SweepError, compare_control_path, model_speedup, run_transfer_sweep, to_long

__all__ = [
    "KernelBench",
    "LatencyStats",
    "PathModel",
    "StatsError",
    "SweepError",
    "compare_control_path",
    "compute_stats",
    "matmul_graph",
    "model_speedup",
    "passthrough_graph",
    "run_kernel_bench",
    "run_transfer_sweep",
    "to_long",
]
