"""
Dataflow graph IR: kernels connected by typed tensor streams.

The document format is JSON::

    {"nodes":   [{"name", "kernel", "params": [...], "weights": {"<port>": file_id}}],
     "edges":   [{"from": "node:port", "to": "node:port", "shape": [...], "dtype"}],
     "inputs":  [{"name", "to": "node:port", "shape": [...], "dtype"}],
     "outputs": [{"name", "from": "node:port", "shape": [...], "dtype"}]}

Classes
-------
Node, Edge, GraphInput, GraphOutput: Elements of the IR.
GraphIr: A validated graph with its topological order.
GraphError: Raised by ``parse_graph``.

Functions
---------
parse_graph: Parse and validate a graph document.
load_graph: Parse a graph document from a file.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx
import numpy as np

from .._errors import RcbkitError
from ..hal.kernels import ANY_DTYPE, DTYPES, KernelId, KernelSpec, get_kernel
from .manifest import RUNTIME_ID_BASE

_ELEMENTWISE = (KernelId.PASSTHROUGH, KernelId.RELU_F32, KernelId.SOFTMAX_F32)


class GraphError(RcbkitError):
    """
    The graph document is invalid.

    ``kind`` is one of ``Syntax``, ``Name``, ``Kernel``, ``Params``, ``Port``,
    ``Weight``, ``Shape`` or ``Cycle``; ``nodes`` names the nodes involved.
    """

    def __init__(self, kind: str, detail: str, nodes=()):
        self.kind = kind
        self.nodes = list(nodes)
        super().__init__(f"{kind}: {detail}")


@dataclass
class Node:
    name: str
    kernel: KernelSpec
    params: tuple
    weights: dict = field(default_factory=dict)

    def __repr__(self) -> str:
        return f"Node({self.name}, {self.kernel.name}, params={list(self.params)})"

    @property
    def shapes(self) -> dict:
        return self.kernel.shapes(self.params)


@dataclass(frozen=True)
class Edge:
    src: tuple  # (node, port)
    dst: tuple
    shape: tuple
    dtype: str


@dataclass(frozen=True)
class GraphInput:
    name: str
    dst: tuple
    shape: tuple
    dtype: str


@dataclass(frozen=True)
class GraphOutput:
    name: str
    src: tuple
    shape: tuple
    dtype: str


@dataclass
class GraphIr:
    nodes: dict
    edges: list
    inputs: list
    outputs: list
    graph: nx.DiGraph
    order: list

    def __repr__(self) -> str:
        return (
            f"GraphIr(nodes={self.order}, edges={len(self.edges)}, "
            f"inputs={[i.name for i in self.inputs]}, outputs={[o.name for o in self.outputs]})"
        )

    def __len__(self) -> int:
        return len(self.nodes)

    def producers(self, name: str) -> list[str]:
        return sorted(self.graph.predecessors(name), key=self.order.index)

    def sources(self) -> dict:
        """Map every ``(node, input port)`` to what feeds it: an Edge, a GraphInput or a file ID."""
        fed = {}
        for node in self.nodes.values():
            for port, file_id in node.weights.items():
                fed[(node.name, port)] = file_id
        for edge in self.edges:
            fed[edge.dst] = edge
        for inp in self.inputs:
            fed[inp.dst] = inp
        return fed


def _nbytes(shape, dtype) -> int:
    return int(np.prod(shape)) * np.dtype(DTYPES[dtype]).itemsize


def _endpoint(text, nodes, direction):
    if not isinstance(text, str) or text.count(":") != 1:
        raise GraphError("Syntax", f"endpoint {text!r} is not 'node:port'")
    name, port = text.split(":")
    if name not in nodes:
        raise GraphError("Name", f"unknown node {name!r}", [name])
    spec = nodes[name].kernel
    ports = spec.inputs if direction == "in" else (spec.output,)
    if port not in ports:
        raise GraphError(
            "Port", f"{spec.name} has no {direction}put port {port!r} (has {list(ports)})", [name]
        )
    return name, port


def _tensor_decl(entry, what):
    try:
        shape = tuple(int(v) for v in entry["shape"])
        dtype = entry["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GraphError("Syntax", f"{what}: needs integer 'shape' and 'dtype'") from exc
    if dtype not in DTYPES:
        raise GraphError("Shape", f"{what}: unknown dtype {dtype!r}")
    if not shape or any(v <= 0 for v in shape):
        raise GraphError("Shape", f"{what}: bad shape {list(shape)}")
    return shape, dtype


def _check_port(node: Node, port: str, shape, dtype, what):
    spec = node.kernel
    want = node.shapes[port]
    want_dtype = spec.dtypes[port]
    if want_dtype == ANY_DTYPE:
        ok = _nbytes(shape, dtype) == int(np.prod(want))
    elif dtype != want_dtype:
        raise GraphError(
            "Shape", f"{what}: dtype {dtype} does not match {node.name}:{port} ({want_dtype})", [node.name]
        )
    elif spec.kernel_id in _ELEMENTWISE:
        ok = int(np.prod(shape)) == int(np.prod(want))
    else:
        ok = tuple(shape) == tuple(want)
    if not ok:
        raise GraphError(
            "Shape",
            f"{what}: shape {list(shape)} does not match {node.name}:{port} {list(want)}",
            [node.name],
        )


def _parse_nodes(doc) -> dict:
    nodes = {}
    for entry in doc.get("nodes", []):
        try:
            name = entry["name"]
            kernel = entry["kernel"]
        except (KeyError, TypeError) as exc:
            raise GraphError("Syntax", "node needs 'name' and 'kernel'") from exc
        if not isinstance(name, str) or not name or ":" in name:
            raise GraphError("Name", f"invalid node name {name!r}")
        if name in nodes:
            raise GraphError("Name", f"duplicate node {name!r}", [name])
        try:
            spec = get_kernel(kernel)
        except KeyError:
            raise GraphError("Kernel", f"unknown kernel {kernel!r}", [name]) from None
        try:
            params = tuple(int(v) for v in entry.get("params", []))
            spec.shapes(params)
        except (TypeError, ValueError) as exc:
            raise GraphError("Params", f"{name}: {exc}", [name]) from exc

        weights = {}
        for port, file_id in (entry.get("weights") or {}).items():
            if port not in spec.inputs:
                raise GraphError("Port", f"{name}: weight on unknown input port {port!r}", [name])
            if not isinstance(file_id, int) or not 0 <= file_id < RUNTIME_ID_BASE:
                raise GraphError("Weight", f"{name}:{port}: file id {file_id!r} out of range", [name])
            weights[port] = file_id
        nodes[name] = Node(name, spec, params, weights)
    if not nodes:
        raise GraphError("Syntax", "graph has no nodes")
    return nodes


def parse_graph(text) -> GraphIr:
    """
    Parse and validate a graph document.

    Parameters
    ----------
    text : str or dict
        JSON text or an already-loaded document.

    Returns
    -------
    GraphIr
        With ``order`` a deterministic topological order (ties keep document order).

    Raises
    ------
    GraphError
        On any structural, shape, or typing problem, or a cycle.
    """
    if isinstance(text, (str, bytes)):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphError("Syntax", str(exc)) from exc
    else:
        doc = text
    if not isinstance(doc, dict):
        raise GraphError("Syntax", "document must be a JSON object")

    nodes = _parse_nodes(doc)
    graph = nx.DiGraph()
    graph.add_nodes_from(nodes)

    edges = []
    for entry in doc.get("edges", []):
        src = _endpoint(entry.get("from"), nodes, "out")
        dst = _endpoint(entry.get("to"), nodes, "in")
        shape, dtype = _tensor_decl(entry, f"edge {src[0]}:{src[1]} -> {dst[0]}:{dst[1]}")
        edges.append(Edge(src, dst, shape, dtype))
        graph.add_edge(src[0], dst[0])

    if not nx.is_directed_acyclic_graph(graph):
        cycle = [u for u, _ in nx.find_cycle(graph)]
        raise GraphError("Cycle", f"cycle through {cycle}", cycle)

    inputs = []
    for entry in doc.get("inputs", []):
        dst = _endpoint(entry.get("to"), nodes, "in")
        shape, dtype = _tensor_decl(entry, f"input {entry.get('name')}")
        inputs.append(GraphInput(str(entry.get("name", f"{dst[0]}.{dst[1]}")), dst, shape, dtype))
    outputs = []
    for entry in doc.get("outputs", []):
        src = _endpoint(entry.get("from"), nodes, "out")
        shape, dtype = _tensor_decl(entry, f"output {entry.get('name')}")
        outputs.append(GraphOutput(str(entry.get("name", f"{src[0]}.{src[1]}")), src, shape, dtype))
    if not outputs:
        raise GraphError("Syntax", "graph has no outputs")
    names = [i.name for i in inputs] + [o.name for o in outputs]
    if len(set(names)) != len(names):
        raise GraphError("Name", f"duplicate graph input/output names {names}")

    fed: dict = {}
    for node in nodes.values():
        for port in node.weights:
            fed.setdefault((node.name, port), []).append("weight")
    for edge in edges:
        fed.setdefault(edge.dst, []).append("edge")
        _check_port(nodes[edge.src[0]], edge.src[1], edge.shape, edge.dtype, "edge source")
        _check_port(nodes[edge.dst[0]], edge.dst[1], edge.shape, edge.dtype, "edge target")
    for inp in inputs:
        fed.setdefault(inp.dst, []).append("input")
        _check_port(nodes[inp.dst[0]], inp.dst[1], inp.shape, inp.dtype, f"input {inp.name}")
    for out in outputs:
        _check_port(nodes[out.src[0]], out.src[1], out.shape, out.dtype, f"output {out.name}")
    for node in nodes.values():
        for port in node.kernel.inputs:
            feeds = fed.get((node.name, port), [])
            if len(feeds) != 1:
                what = "unconnected" if not feeds else f"fed {len(feeds)} times ({feeds})"
                raise GraphError("Port", f"{node.name}:{port} is {what}", [node.name])

    position = {name: i for i, name in enumerate(nodes)}
    order = list(nx.lexicographical_topological_sort(graph, key=position.__getitem__))
    return GraphIr(nodes, edges, inputs, outputs, graph, order)


def load_graph(path) -> GraphIr:
    return parse_graph(Path(path).read_text())
