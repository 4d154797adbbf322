import copy
from types import SimpleNamespace

import pytest

from rcbkit.compiler.graph import load_graph, parse_graph
from rcbkit.compiler.lower import LowerError, PlaceError, assign_tensors, build_manifest, lower, place
from rcbkit.compiler.manifest import RUNTIME_ID_BASE, TensorClass
from rcbkit.config.schema import CompilerConfig, DeviceConfig
from rcbkit.hal import regmap
from rcbkit.rcb.format import (
    CacheFlush,
    Direction,
    DmaTrigger,
    OpCode,
    PollMask,
    RegWrite,
    RelativeTile,
    Symbolic,
    WaitEvent,
    iter_addrs,
    validate_rcb,
)

GRID = DeviceConfig()

PASSTHROUGH_DOC = {
    "nodes": [{"name": "copy", "kernel": "passthrough", "params": [256]}],
    "inputs": [{"name": "x", "to": "copy:in", "shape": [256], "dtype": "u8"}],
    "outputs": [{"name": "y", "from": "copy:out", "shape": [64], "dtype": "f32"}],
}


def opcodes(rcb):
    return [op.opcode for op in rcb.ops]


def test_place_row_major(cnn_doc):
    graph = parse_graph(cnn_doc)
    assert place(graph, GRID) == {"conv": (0, 0), "relu": (1, 0), "softmax": (2, 0)}


def test_place_single_node(xgemm_path):
    assert place(load_graph(xgemm_path), GRID) == {"gemm": (0, 0)}


def test_place_capacity():
    """Test 29 nodes do not fit the 28 tiles of a 4x7 grid"""
    with pytest.raises(PlaceError):
        place(SimpleNamespace(order=[f"n{i}" for i in range(29)]), GRID)
    placement = place(SimpleNamespace(order=[f"n{i}" for i in range(28)]), GRID)
    assert placement["n27"] == (3, 6)


def test_matmul_lowering(xgemm_path):
    graph = load_graph(xgemm_path)
    (rcb,) = lower(graph, place(graph, GRID))
    assert opcodes(rcb) == [
        OpCode.REG_WRITE,
        OpCode.REG_WRITE,
        OpCode.REG_WRITE,
        OpCode.REG_WRITE,
        OpCode.DMA_TRIGGER,
        OpCode.DMA_TRIGGER,
        OpCode.REG_WRITE,
        OpCode.POLL_MASK,
        OpCode.DMA_TRIGGER,
    ]
    assert rcb.ops[0] == RegWrite(RelativeTile(0, 0, regmap.KERNEL_ID), 2)
    assert [op.value for op in rcb.ops[1:4]] == [64, 64, 64]
    assert [op.addr for op in rcb.ops[1:4]] == [RelativeTile(0, 0, regmap.param(i)) for i in range(3)]
    a_in, b_in = rcb.ops[4], rcb.ops[5]
    assert a_in == DmaTrigger(
        Direction.TO_DEVICE, Symbolic(RUNTIME_ID_BASE), RelativeTile(0, 0, 0x1000), 4096
    )
    assert b_in.dst == RelativeTile(0, 0, 0x1000 + 4096)
    assert rcb.ops[6] == RegWrite(RelativeTile(0, 0, regmap.CTRL), regmap.CTRL_START)
    out = rcb.ops[8]
    assert out.direction == Direction.FROM_DEVICE
    assert out.src == RelativeTile(0, 0, 0x1000 + 8192)
    assert out.dst == Symbolic(RUNTIME_ID_BASE + 2)
    assert out.length == 16384
    assert validate_rcb(rcb) == []


def test_params_use_one_reg_write_each(cnn_doc):
    graph = parse_graph(cnn_doc)
    placement = place(graph, GRID)
    for rcb, name in zip(lower(graph, placement), graph.order):
        col, row = placement[name]
        params = graph.nodes[name].params
        writes = {op.addr.offset: op.value for op in rcb.ops if isinstance(op, RegWrite)}
        assert all(writes[regmap.param(i)] == v for i, v in enumerate(params))
        assert OpCode.WRITE_BLOCK not in opcodes(rcb)
        assert all(
            op.addr.col == col and op.addr.row == row for op in rcb.ops if isinstance(op, RegWrite)
        )


def test_passthrough_lowering():
    graph = parse_graph(PASSTHROUGH_DOC)
    (rcb,) = lower(graph, place(graph, GRID))
    assert opcodes(rcb) == [
        OpCode.REG_WRITE,
        OpCode.REG_WRITE,
        OpCode.DMA_TRIGGER,
        OpCode.REG_WRITE,
        OpCode.POLL_MASK,
        OpCode.DMA_TRIGGER,
    ]


def test_chain_deps_and_closure(cnn_doc):
    """Test producer blocks become deps and symbolic IDs match the manifest"""
    graph = parse_graph(cnn_doc)
    rcbs = lower(graph, place(graph, GRID))
    assert [rcb.deps for rcb in rcbs] == [(), (0,), (1,)]
    for idx, rcb in enumerate(rcbs):
        assert all(dep < idx for dep in rcb.deps)

    manifest = build_manifest(graph)
    symbols = {
        ref.buffer_id
        for rcb in rcbs
        for op in rcb.ops
        for _, ref, _ in iter_addrs(op)
        if isinstance(ref, Symbolic)
    }
    assert symbols == set(manifest.tensors)


def test_tensor_assignment(cnn_doc):
    graph = parse_graph(cnn_doc)
    tensors = assign_tensors(graph)
    assert tensors[("conv", "x")].tensor_id == RUNTIME_ID_BASE
    assert tensors[("conv", "x")].cls is TensorClass.INPUT
    assert tensors[("conv", "k")].tensor_id == 1
    assert tensors[("conv", "k")].cls is TensorClass.WEIGHT
    assert tensors[("relu", "x")] is tensors[("conv", "y")]
    assert tensors[("conv", "y")].cls is TensorClass.ACTIVATION
    assert tensors[("softmax", "y")].cls is TensorClass.OUTPUT

    manifest = build_manifest(graph, tensors=tensors)
    assert manifest.inputs == [RUNTIME_ID_BASE]
    assert manifest.outputs == [RUNTIME_ID_BASE + 3]
    assert manifest[1].size == 16
    assert manifest.input_size() == 64
    assert manifest.output_size() == 36


def test_event_sync(cnn_doc):
    graph = parse_graph(cnn_doc)
    rcbs = lower(graph, place(graph, GRID), CompilerConfig(sync="event"), GRID)
    waits = [op for rcb in rcbs for op in rcb.ops if isinstance(op, WaitEvent)]
    assert waits == [WaitEvent(regmap.done_event(i)) for i in range(3)]
    assert not any(isinstance(op, PollMask) for rcb in rcbs for op in rcb.ops)


def test_cache_flush_precedes_input_dma(cnn_doc):
    graph = parse_graph(cnn_doc)
    rcbs = lower(graph, place(graph, GRID), CompilerConfig(cache_flush=True))
    flushes = [op for rcb in rcbs for op in rcb.ops if isinstance(op, CacheFlush)]
    # only the graph input is host-written
    assert flushes == [CacheFlush(Symbolic(RUNTIME_ID_BASE), 64)]
    ops = rcbs[0].ops
    i = ops.index(flushes[0])
    assert isinstance(ops[i + 1], DmaTrigger)
    assert ops[i + 1].src == Symbolic(RUNTIME_ID_BASE)


def test_poll_timeout_option(xgemm_path):
    graph = load_graph(xgemm_path)
    (rcb,) = lower(graph, place(graph, GRID), CompilerConfig(poll_timeout_us=10))
    poll = next(op for op in rcb.ops if isinstance(op, PollMask))
    assert poll.timeout_us == 10
    assert (poll.mask, poll.expected) == (regmap.STATUS_DONE, regmap.STATUS_DONE)


def test_unknown_sync(xgemm_path):
    graph = load_graph(xgemm_path)
    with pytest.raises(LowerError):
        lower(graph, place(graph, GRID), CompilerConfig(sync="interrupt"))


def test_shared_weight_size_conflict(cnn_doc):
    doc = copy.deepcopy(cnn_doc)
    doc["nodes"].append(
        {"name": "conv2", "kernel": "conv2d_f32", "params": [4, 4, 3, 3], "weights": {"k": 1}}
    )
    doc["inputs"].append({"name": "image2", "to": "conv2:x", "shape": [4, 4], "dtype": "f32"})
    doc["outputs"].append({"name": "side", "from": "conv2:y", "shape": [2, 2], "dtype": "f32"})
    with pytest.raises(LowerError):
        build_manifest(parse_graph(doc))


def test_shared_weight_is_listed_once(cnn_doc):
    doc = copy.deepcopy(cnn_doc)
    doc["nodes"].append(
        {"name": "conv2", "kernel": "conv2d_f32", "params": [4, 4, 2, 2], "weights": {"k": 1}}
    )
    doc["inputs"].append({"name": "image2", "to": "conv2:x", "shape": [4, 4], "dtype": "f32"})
    doc["outputs"].append({"name": "side", "from": "conv2:y", "shape": [3, 3], "dtype": "f32"})
    manifest = build_manifest(parse_graph(doc))
    assert [t.tensor_id for t in manifest.of_class(TensorClass.WEIGHT)] == [1]
