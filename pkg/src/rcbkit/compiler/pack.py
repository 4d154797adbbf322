"""
Packaging of compiled models.

A packed model directory holds::

    model.rimfs      weights, flattened in node topological order
    000.rcb ...      one encoded RCB per pipeline position
    manifest.json    the mapping descriptor
    placement.json   node name -> [col, row]

Classes
-------
CompiledModel: A compiled pipeline and its artifacts.
PackError: Raised when an artifact cannot be written or read.

Functions
---------
pack: Write a compiled model directory.
load_model: Read one back.
compile_graph: Parse, place, lower and (optionally) pack a graph.
read_weights: Load weight payloads from a directory of ``<file_id>.bin`` files.
encode_plan_bundle, decode_plan_bundle: LOAD_PLAN payload codec.
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

from .._errors import RcbkitError
from .._logging import get_logger
from ..config.schema import CompilerConfig, DeviceConfig
from ..rcb.format import FormatError, decode_rcb, encode_rcb
from ..rimfs.image import BuildError, build_image
from .graph import GraphIr, parse_graph
from .lower import assign_tensors, build_manifest, lower, place
from .manifest import ManifestError, MappingDescriptor, TensorClass

logger = get_logger(__name__)

IMAGE_FILE = "model.rimfs"
MANIFEST_FILE = "manifest.json"
PLACEMENT_FILE = "placement.json"

_U32 = struct.Struct("<I")


class PackError(RcbkitError):
    pass


@dataclass
class CompiledModel:
    """
    A compiled pipeline.

    Attributes
    ----------
    rcbs : list[Rcb]
        Blocks in pipeline (topological) order.
    image : bytes
        RIMFS image of the weights.
    manifest : MappingDescriptor
    placement : dict[str, tuple[int, int]]
    """

    rcbs: list
    image: bytes
    manifest: MappingDescriptor
    placement: dict = field(default_factory=dict)

    def __repr__(self) -> str:
        return (
            f"CompiledModel(rcbs={len(self.rcbs)}, image={len(self.image)}B, "
            f"tensors={len(self.manifest.tensors)}, nodes={len(self.placement)})"
        )

    @property
    def encoded_rcbs(self) -> list[bytes]:
        return [encode_rcb(rcb) for rcb in self.rcbs]

    def plan_bundle(self) -> bytes:
        return encode_plan_bundle(self.rcbs, self.manifest)


def encode_plan_bundle(rcbs, manifest: MappingDescriptor) -> bytes:
    """LOAD_PLAN payload: u32 count, (u32 length, RCB) each, u32 length, manifest JSON."""
    parts = [_U32.pack(len(rcbs))]
    for rcb in rcbs:
        data = encode_rcb(rcb)
        parts += [_U32.pack(len(data)), data]
    text = manifest.to_json().encode()
    parts += [_U32.pack(len(text)), text]
    return b"".join(parts)


def decode_plan_bundle(payload) -> tuple[list, MappingDescriptor]:
    """
    Inverse of ``encode_plan_bundle``.

    Raises
    ------
    PackError
        On truncation, trailing bytes, a bad RCB or a bad manifest.
    """
    buf = bytes(payload)
    pos = 0

    def chunk(n):
        nonlocal pos
        if pos + n > len(buf):
            raise PackError(f"plan bundle truncated at byte {pos} (needs {n} more)")
        out = buf[pos : pos + n]
        pos += n
        return out

    (count,) = _U32.unpack(chunk(4))
    rcbs = []
    try:
        for _ in range(count):
            (length,) = _U32.unpack(chunk(4))
            rcbs.append(decode_rcb(chunk(length)))
        (length,) = _U32.unpack(chunk(4))
        manifest = MappingDescriptor.from_json(chunk(length).decode())
    except (FormatError, ManifestError, UnicodeDecodeError) as exc:
        raise PackError(f"bad plan bundle: {exc}") from exc
    if pos != len(buf):
        raise PackError(f"{len(buf) - pos} trailing bytes after plan bundle")
    return rcbs, manifest


def _build_weights_image(weights: dict, manifest: MappingDescriptor, alignment: int) -> bytes:
    files = []
    for info in manifest.of_class(TensorClass.WEIGHT):
        if info.tensor_id not in weights:
            raise PackError(f"no payload for weight {info.tensor_id} ({info.name})")
        data = bytes(weights[info.tensor_id])
        if len(data) != info.size:
            raise PackError(
                f"weight {info.tensor_id} ({info.name}) is {len(data)} bytes, expected {info.size}"
            )
        files.append((info.tensor_id, data))
    try:
        return build_image(files, alignment)
    except BuildError as exc:
        raise PackError(str(exc)) from exc


def pack(rcbs, weights: dict, manifest: MappingDescriptor, out_dir, placement=None, alignment=64) -> CompiledModel:
    """
    Write a compiled model directory.

    Parameters
    ----------
    rcbs : list[Rcb]
        The lowered pipeline.
    weights : dict[int, bytes]
        Payload of every WEIGHT tensor in ``manifest``.
    manifest : MappingDescriptor
        Weights are packed in its order, which ``build_manifest`` makes topological.
    out_dir : str or Path
        Created if needed; stale ``.rcb`` files are removed.
    placement : dict, optional
        Node placement recorded in ``placement.json``.

    Raises
    ------
    PackError
        If a weight payload is missing or has the wrong size.
    """
    image = _build_weights_image(weights, manifest, alignment)
    model = CompiledModel(list(rcbs), image, manifest, dict(placement or {}))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for stale in out.glob("*.rcb"):
        stale.unlink()
    (out / IMAGE_FILE).write_bytes(image)
    for i, data in enumerate(model.encoded_rcbs):
        (out / f"{i:03d}.rcb").write_bytes(data)
    (out / MANIFEST_FILE).write_text(manifest.to_json() + "\n")
    table = {name: list(tile) for name, tile in model.placement.items()}
    (out / PLACEMENT_FILE).write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    logger.info("packed %d blocks (%d image bytes) into %s", len(rcbs), len(image), out)
    return model


def load_model(model_dir) -> CompiledModel:
    """
    Read a packed model directory.

    Raises
    ------
    PackError
        If an artifact is missing or cannot be decoded.
    """
    path = Path(model_dir)
    try:
        image = (path / IMAGE_FILE).read_bytes()
        manifest = MappingDescriptor.from_json((path / MANIFEST_FILE).read_text())
        rcbs = [decode_rcb(p.read_bytes()) for p in sorted(path.glob("*.rcb"))]
        placement_path = path / PLACEMENT_FILE
        placement = (
            {k: tuple(v) for k, v in json.loads(placement_path.read_text()).items()}
            if placement_path.exists()
            else {}
        )
    except FileNotFoundError as exc:
        raise PackError(f"{path} is not a compiled model: {exc.filename} missing") from exc
    except (FormatError, ManifestError, json.JSONDecodeError) as exc:
        raise PackError(f"{path}: {exc}") from exc
    if not rcbs:
        raise PackError(f"{path} holds no .rcb files")
    return CompiledModel(rcbs, image, manifest, placement)


def read_weights(weights_dir, file_ids) -> dict:
    """
    Load ``<file_id>.bin`` for each ID from a directory.

    Raises
    ------
    PackError
        If a file is missing.
    """
    weights = {}
    for fid in file_ids:
        path = Path(weights_dir) / f"{fid}.bin"
        if not path.exists():
            raise PackError(f"missing weight file {path}")
        weights[fid] = path.read_bytes()
    return weights


def compile_graph(
    graph,
    weights=None,
    out_dir=None,
    options: CompilerConfig | None = None,
    grid: DeviceConfig | None = None,
) -> CompiledModel:
    """
    Compile a graph end to end.

    Parameters
    ----------
    graph : GraphIr, str, dict or Path
        A parsed graph, graph JSON text or document, or a path to a graph file.
    weights : dict[int, bytes] or str or Path, optional
        Payloads, or a directory of ``<file_id>.bin`` files. For a graph file
        the default is ``weights/`` beside it.
    out_dir : str or Path, optional
        If given, the model is packed there.
    options : CompilerConfig, optional
    grid : DeviceConfig, optional
        Grid to place on; defaults to the 4x7 device.

    Returns
    -------
    CompiledModel
    """
    options = options or CompilerConfig()
    grid = grid or DeviceConfig()
    graph_path = None
    if isinstance(graph, Path) or (isinstance(graph, str) and not graph.lstrip().startswith("{")):
        graph_path = Path(graph)
        graph = graph_path.read_text()
    if not isinstance(graph, GraphIr):
        graph = parse_graph(graph)

    placement = place(graph, grid)
    rcbs = lower(graph, placement, options, grid)
    tensors = assign_tensors(graph)
    manifest = build_manifest(graph, options.alignment, tensors)

    weight_ids = [info.tensor_id for info in manifest.of_class(TensorClass.WEIGHT)]
    if weights is None:
        weights = graph_path.parent / "weights" if graph_path is not None else {}
    if not isinstance(weights, dict):
        weights = read_weights(weights, weight_ids)
    logger.info("compiled %d nodes to %d blocks", len(graph), len(rcbs))

    if out_dir is not None:
        return pack(rcbs, weights, manifest, out_dir, placement, options.alignment)
    return CompiledModel(rcbs, _build_weights_image(weights, manifest, options.alignment), manifest, placement)
