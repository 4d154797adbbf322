from .config import load_config, pretty_print_config, read_override_file
from .schema import (
    BenchConfig,
    CompilerConfig,
    DeviceConfig,
    NetConfig,
    RuntimeConfig,
)

__all__ = [
    "BenchConfig",
    "CompilerConfig",
    "DeviceConfig",
    "NetConfig",
    "RuntimeConfig",
    "load_config",
    "pretty_print_config",
    "read_override_file",
]
