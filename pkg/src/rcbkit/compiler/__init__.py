from .graph import GraphError, GraphIr, load_graph, parse_graph
from .lower import LowerError, PlaceError, assign_tensors, build_manifest, lower, place
from .manifest import RUNTIME_ID_BASE, ManifestError, MappingDescriptor, TensorClass, TensorInfo
from .pack import (
    CompiledModel,
    PackError,
    compile_graph,
    decode_plan_bundle,
    encode_plan_bundle,
    load_model,
    pack,
    read_weights,
)

__all__ = [
    "RUNTIME_ID_BASE",
    "CompiledModel",
    "GraphError",
    "GraphIr",
    "LowerError",
    "ManifestError",
    "MappingDescriptor",
    "PackError",
    "PlaceError",
    "TensorClass",
    "TensorInfo",
    "assign_tensors",
    "build_manifest",
    "compile_graph",
    "decode_plan_bundle",
    "encode_plan_bundle",
    "load_graph",
    "load_model",
    "lower",
    "pack",
    "parse_graph",
    "place",
    "read_weights",
]
