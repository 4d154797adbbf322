"""
Mapping descriptor: the physical requirements of every logical tensor ID a
compiled pipeline refers to.

Classes
-------
TensorClass: WEIGHT, ACTIVATION, INPUT or OUTPUT.
TensorInfo: Size, alignment and class of one tensor.
MappingDescriptor: All tensors of a model plus the graph input/output order.
"""

import json
from dataclasses import asdict, dataclass, field
from enum import Enum

from .._errors import RcbkitError

# tensor IDs at or above this value are runtime buffers, below it RIMFS file IDs
RUNTIME_ID_BASE = 0x8000_0000


class ManifestError(RcbkitError):
    pass


class TensorClass(str, Enum):
    WEIGHT = "weight"
    ACTIVATION = "activation"
    INPUT = "input"
    OUTPUT = "output"


@dataclass(frozen=True)
class TensorInfo:
    tensor_id: int
    size: int
    alignment: int = 64
    cls: TensorClass = TensorClass.ACTIVATION
    name: str = ""
    shape: tuple = ()
    dtype: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["cls"] = self.cls.value
        d["shape"] = list(self.shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TensorInfo":
        info = cls(
            tensor_id=int(d["tensor_id"]),
            size=int(d["size"]),
            alignment=int(d.get("alignment", 64)),
            cls=TensorClass(d.get("cls", "activation")),
            name=d.get("name", ""),
            shape=tuple(d.get("shape", ())),
            dtype=d.get("dtype", ""),
        )
        if info.size < 0:
            raise ManifestError(f"tensor {info.tensor_id:#x} has negative size {info.size}")
        if info.alignment <= 0 or info.alignment & (info.alignment - 1):
            raise ManifestError(
                f"tensor {info.tensor_id:#x} alignment {info.alignment} is not a power of two"
            )
        return info


@dataclass
class MappingDescriptor:
    """
    Every tensor a pipeline refers to by symbolic ID.

    Parameters
    ----------
    tensors : dict[int, TensorInfo]
        Keyed by tensor ID.
    inputs : list[int]
        Graph input tensor IDs in RUN payload order.
    outputs : list[int]
        Graph output tensor IDs in RESULT payload order.
    """

    tensors: dict = field(default_factory=dict)
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)

    def __repr__(self) -> str:
        counts = {}
        for info in self.tensors.values():
            counts[info.cls.value] = counts.get(info.cls.value, 0) + 1
        return f"MappingDescriptor({counts}, inputs={self.inputs}, outputs={self.outputs})"

    def __contains__(self, tensor_id) -> bool:
        return tensor_id in self.tensors

    def __getitem__(self, tensor_id) -> TensorInfo:
        return self.tensors[tensor_id]

    def add(self, info: TensorInfo) -> TensorInfo:
        if info.tensor_id in self.tensors:
            raise ManifestError(f"tensor id {info.tensor_id:#x} declared twice")
        self.tensors[info.tensor_id] = info
        return info

    def of_class(self, cls: TensorClass) -> list[TensorInfo]:
        return [t for t in self.tensors.values() if t.cls is cls]

    def input_size(self) -> int:
        return sum(self.tensors[i].size for i in self.inputs)

    def output_size(self) -> int:
        return sum(self.tensors[i].size for i in self.outputs)

    def to_json(self) -> str:
        doc = {
            "tensors": [self.tensors[k].to_dict() for k in sorted(self.tensors)],
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
        }
        return json.dumps(doc, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text) -> "MappingDescriptor":
        try:
            doc = json.loads(text)
            desc = cls(inputs=[int(i) for i in doc["inputs"]], outputs=[int(i) for i in doc["outputs"]])
            for entry in doc["tensors"]:
                desc.add(TensorInfo.from_dict(entry))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ManifestError):
                raise
            raise ManifestError(f"malformed manifest: {exc}") from exc
        for tid in (*desc.inputs, *desc.outputs):
            if tid not in desc.tensors:
                raise ManifestError(f"graph tensor {tid:#x} missing from manifest")
        return desc
