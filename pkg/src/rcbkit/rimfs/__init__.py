from .alloc import Arena, OutOfMemory, Region, Stage, StageError, advance_stage
from .image import (
    DEFAULT_ALIGNMENT,
    BuildError,
    MountError,
    NotFound,
    RimfsImage,
    build_image,
    lookup,
    mount,
)

__all__ = [
    "Arena",
    "OutOfMemory",
    "Region",
    "Stage",
    "StageError",
    "advance_stage",
    "DEFAULT_ALIGNMENT",
    "BuildError",
    "MountError",
    "NotFound",
    "RimfsImage",
    "build_image",
    "lookup",
    "mount",
]
