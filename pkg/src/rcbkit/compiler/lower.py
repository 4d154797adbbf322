"""
Placement and lowering of a graph to RCBs.

Classes
-------
PlaceError, LowerError: Errors.

Functions
---------
place: Round-robin placement of nodes on the tile grid.
assign_tensors: Tensor ID of every port in the graph.
build_manifest: Mapping descriptor of every tensor the lowered pipeline uses.
lower: One COMPUTE RCB per node in topological order.
"""

from dataclasses import dataclass

from .._errors import RcbkitError
from .._logging import get_logger
from ..config.schema import CompilerConfig
from ..hal import regmap
from ..hal.kernels import DTYPES, kernel_layout
from ..rcb.format import (
    BlockType,
    CacheFlush,
    Direction,
    DmaTrigger,
    PollMask,
    Rcb,
    RegWrite,
    RelativeTile,
    Symbolic,
    WaitEvent,
)
from .graph import Edge, GraphInput, GraphIr
from .manifest import RUNTIME_ID_BASE, ManifestError, MappingDescriptor, TensorClass, TensorInfo

logger = get_logger(__name__)


class PlaceError(RcbkitError):
    pass


class LowerError(RcbkitError):
    pass


def place(graph: GraphIr, grid) -> dict:
    """
    Place node ``i`` of the topological order on tile ``(i mod cols, i div cols)``.

    Parameters
    ----------
    graph : GraphIr
    grid : object
        Anything with ``cols`` and ``rows``.

    Returns
    -------
    dict[str, tuple[int, int]]
        Node name to ``(col, row)``.
    """
    capacity = grid.cols * grid.rows
    if len(graph.order) > capacity:
        raise PlaceError(
            f"{len(graph.order)} nodes do not fit a {grid.cols}x{grid.rows} grid ({capacity} tiles)"
        )
    return {name: (i % grid.cols, i // grid.cols) for i, name in enumerate(graph.order)}


@dataclass(frozen=True)
class _Tensor:
    tensor_id: int
    cls: TensorClass
    name: str
    shape: tuple
    dtype: str
    size: int


def assign_tensors(graph: GraphIr) -> dict:
    """
    Tensor of every ``(node, port)`` in the graph.

    Weights keep their file ID. Every other tensor gets ``RUNTIME_ID_BASE + k``
    with ``k`` counting in topological order, input ports before the output
    port of each node.

    Returns
    -------
    dict[tuple[str, str], _Tensor]
    """
    sources = graph.sources()
    graph_outputs = {out.src: out for out in graph.outputs}
    tensors = {}
    next_id = RUNTIME_ID_BASE

    for name in graph.order:
        node = graph.nodes[name]
        sizes = node.kernel.nbytes(node.params)
        shapes = node.shapes
        for port in node.kernel.inputs:
            src = sources[(name, port)]
            if isinstance(src, Edge):
                # the producer precedes this node, so its output is already assigned
                tensors[(name, port)] = tensors[src.src]
            elif isinstance(src, GraphInput):
                tensors[(name, port)] = _Tensor(
                    next_id, TensorClass.INPUT, src.name, src.shape, src.dtype, sizes[port]
                )
                next_id += 1
            else:
                dtype = node.kernel.dtypes[port]
                tensors[(name, port)] = _Tensor(
                    src, TensorClass.WEIGHT, f"{name}.{port}", shapes[port],
                    dtype if dtype in DTYPES else "u8", sizes[port],
                )
        port = node.kernel.output
        out = graph_outputs.get((name, port))
        if out is not None:
            tensor = _Tensor(next_id, TensorClass.OUTPUT, out.name, out.shape, out.dtype, sizes[port])
        else:
            dtype = node.kernel.dtypes[port]
            tensor = _Tensor(
                next_id, TensorClass.ACTIVATION, f"{name}.{port}", shapes[port],
                dtype if dtype in DTYPES else "u8", sizes[port],
            )
        tensors[(name, port)] = tensor
        next_id += 1
    return tensors


def build_manifest(graph: GraphIr, alignment: int = 64, tensors: dict | None = None) -> MappingDescriptor:
    """
    Mapping descriptor of a graph: every tensor once, graph inputs and outputs
    in declared order.

    Raises
    ------
    LowerError
        If one weight file is used with two different sizes.
    """
    tensors = tensors if tensors is not None else assign_tensors(graph)
    manifest = MappingDescriptor()
    for t in tensors.values():
        if t.tensor_id in manifest:
            if manifest[t.tensor_id].size != t.size:
                raise LowerError(
                    f"weight {t.tensor_id} is used as {manifest[t.tensor_id].size} "
                    f"and {t.size} bytes"
                )
            continue
        try:
            manifest.add(TensorInfo(t.tensor_id, t.size, alignment, t.cls, t.name, t.shape, t.dtype))
        except ManifestError as exc:
            raise LowerError(str(exc)) from exc
    manifest.inputs = [tensors[inp.dst].tensor_id for inp in graph.inputs]
    manifest.outputs = [tensors[out.src].tensor_id for out in graph.outputs]
    return manifest


def _node_ops(node, col, row, tile, tensors, options: CompilerConfig) -> list:
    if len(node.params) > regmap.NUM_PARAMS:
        raise LowerError(
            f"{node.name}: {len(node.params)} params exceed {regmap.NUM_PARAMS} PARAM registers"
        )

    def reg(offset):
        return RelativeTile(col, row, offset)

    layout = kernel_layout(node.kernel, node.params)
    ops = [RegWrite(reg(regmap.KERNEL_ID), int(node.kernel.kernel_id))]
    ops += [RegWrite(reg(regmap.param(i)), int(v)) for i, v in enumerate(node.params)]
    for port in node.kernel.inputs:
        tensor = tensors[(node.name, port)]
        offset, size = layout[port]
        if options.cache_flush and tensor.cls is TensorClass.INPUT:
            ops.append(CacheFlush(Symbolic(tensor.tensor_id), size))
        ops.append(
            DmaTrigger(
                Direction.TO_DEVICE, Symbolic(tensor.tensor_id),
                reg(regmap.LOCAL_MEM_OFFSET + offset), size,
            )
        )
    ops.append(RegWrite(reg(regmap.CTRL), regmap.CTRL_START))
    if options.sync == "event":
        ops.append(WaitEvent(regmap.done_event(tile)))
    elif options.sync == "poll":
        ops.append(
            PollMask(reg(regmap.STATUS), regmap.STATUS_DONE, regmap.STATUS_DONE, options.poll_timeout_us)
        )
    else:
        raise LowerError(f"unknown sync mode {options.sync!r}; use 'poll' or 'event'")
    out = tensors[(node.name, node.kernel.output)]
    offset, size = layout[node.kernel.output]
    ops.append(
        DmaTrigger(
            Direction.FROM_DEVICE, reg(regmap.LOCAL_MEM_OFFSET + offset),
            Symbolic(out.tensor_id), size,
        )
    )
    return ops


def lower(graph: GraphIr, placement: dict, options: CompilerConfig | None = None, grid=None) -> list:
    """
    Lower a placed graph to one COMPUTE RCB per node.

    Each block programs KERNEL_ID and the PARAM registers, DMAs every input
    port into tile-local memory, starts the kernel, waits for DONE (poll or
    event) and DMAs the output back. ``deps`` lists the producer blocks.

    Parameters
    ----------
    graph : GraphIr
    placement : dict[str, tuple[int, int]]
        From ``place``.
    options : CompilerConfig, optional
        Synchronisation style, cache flushes and poll timeout.
    grid : object, optional
        Used to number tiles for WAIT_EVENT; defaults to the placement's extent.

    Raises
    ------
    LowerError
        On too many parameters or an unknown sync mode.
    """
    options = options or CompilerConfig()
    cols = grid.cols if grid is not None else max(c for c, _ in placement.values()) + 1
    tensors = assign_tensors(graph)
    index = {name: i for i, name in enumerate(graph.order)}

    rcbs = []
    for name in graph.order:
        node = graph.nodes[name]
        col, row = placement[name]
        ops = _node_ops(node, col, row, regmap.tile_index(col, row, cols), tensors, options)
        deps = sorted({index[p] for p in graph.producers(name)})
        rcbs.append(Rcb(BlockType.COMPUTE, ops, deps))
        logger.debug("lowered %s to %d ops on tile (%d,%d)", name, len(ops), col, row)
    return rcbs
