"""
Structured configuration schema.

Classes
-------
DeviceConfig: Simulator geometry, memory sizes, cost model and cache model.
CompilerConfig: Lowering switches (synchronisation style, cache flushes).
NetConfig: Inference service endpoint.
BenchConfig: Measurement defaults.
RuntimeConfig: The root of the tree, composed by ``load_config``.
"""

from dataclasses import dataclass, field


@dataclass
class DeviceConfig:
    cols: int = 4
    rows: int = 7
    local_mem_size: int = 65536
    global_mem_size: int = 64 * 1024 * 1024
    dma_setup_ticks: int = 100
    dma_bytes_per_tick: int = 64
    kernel_setup_ticks: int = 16
    kernel_ticks_per_element: int = 1
    reg_access_ticks: int = 1
    poll_interval_ticks: int = 1
    ticks_per_us: int = 1
    # "off" or "stale_until_flush"
    cache_model: str = "off"


@dataclass
class CompilerConfig:
    # "poll" or "event"
    sync: str = "poll"
    cache_flush: bool = False
    poll_timeout_us: int = 1_000_000
    alignment: int = 64


@dataclass
class NetConfig:
    host: str = "127.0.0.1"
    port: int = 7410


@dataclass
class BenchConfig:
    iterations: int = 1000
    warmup: int = 10
    sweep_sizes: list[int] = field(default_factory=lambda: [1024, 4096, 16384, 32768])
    sweep_volume: int = 4 * 1024 * 1024
    crossing_penalty: int = 600


@dataclass
class RuntimeConfig:
    device: DeviceConfig = field(default_factory=DeviceConfig)
    compiler: CompilerConfig = field(default_factory=CompilerConfig)
    net: NetConfig = field(default_factory=NetConfig)
    bench: BenchConfig = field(default_factory=BenchConfig)
