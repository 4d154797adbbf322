from . import regmap
from .crossing import CrossingDriver
from .driver import (
    AddressFault,
    DmaDescriptor,
    DmaFault,
    HalDriver,
    HalFault,
    HandleFault,
)
from .kernels import KERNELS, KernelId, KernelSpec, get_kernel, kernel_layout
from .simdev import CacheModel, SimDevice

__all__ = [
    "regmap",
    "CrossingDriver",
    "AddressFault",
    "DmaDescriptor",
    "DmaFault",
    "HalDriver",
    "HalFault",
    "HandleFault",
    "KERNELS",
    "KernelId",
    "KernelSpec",
    "get_kernel",
    "kernel_layout",
    "CacheModel",
    "SimDevice",
]
