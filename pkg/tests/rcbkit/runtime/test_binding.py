import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbkit._errors import RcbkitError
from rcbkit.compiler.manifest import MappingDescriptor, TensorClass, TensorInfo
from rcbkit.config.schema import DeviceConfig
from rcbkit.rcb.format import (
    Absolute,
    BlockType,
    Direction,
    DmaTrigger,
    Rcb,
    RegWrite,
    RelativeTile,
    Symbolic,
    WaitEvent,
    encode_rcb,
)
from rcbkit.rimfs.alloc import Arena
from rcbkit.runtime.binding import (
    BindingTable,
    PlanError,
    RangeError,
    ResolvedRcb,
    UnresolvedSymbol,
    bind,
    is_resolved,
    plan_buffers,
    release_after,
)

GRID = DeviceConfig()
A, B, C, W = 0x8000_0000, 0x8000_0001, 0x8000_0002, 5


def touching(*ids):
    """A compute block with one register write per buffer ID."""
    return Rcb(BlockType.COMPUTE, tuple(RegWrite(Symbolic(i), 0) for i in ids) or (WaitEvent(1),))


def test_symbolic_resolution():
    table = BindingTable()
    table.bind(7, 0x140, 64)
    rcb = Rcb(BlockType.COMPUTE, (RegWrite(Symbolic(7, 16), 1),))
    resolved = bind(rcb, table, GRID)
    assert isinstance(resolved, ResolvedRcb)
    assert resolved.ops[0].addr == Absolute(0x150)
    assert is_resolved(resolved)
    assert not is_resolved(rcb)
    assert bind(resolved, table, GRID) is resolved


def test_unresolved_lists_every_missing_id():
    rcb = Rcb(
        BlockType.COMPUTE,
        (
            DmaTrigger(Direction.TO_DEVICE, Symbolic(9), RelativeTile(0, 0, 0x1000), 4),
            RegWrite(Symbolic(3), 0),
        ),
    )
    with pytest.raises(UnresolvedSymbol) as exc:
        bind(rcb, BindingTable(), GRID)
    assert exc.value.missing == [3, 9]


def test_relative_tile_resolution():
    rcb = Rcb(BlockType.COMPUTE, (RegWrite(RelativeTile(1, 0, 0x08), 2),))
    assert bind(rcb, BindingTable(), GRID).ops[0].addr == Absolute(0x1002_0008)


def test_range_errors():
    """Test out-of-grid tiles and accesses past a buffer end are refused"""
    with pytest.raises(RangeError):
        bind(Rcb(BlockType.COMPUTE, (RegWrite(RelativeTile(4, 0, 0), 1),)), BindingTable(), GRID)
    with pytest.raises(RangeError):
        bind(
            Rcb(BlockType.COMPUTE, (RegWrite(RelativeTile(0, 0, 0x2_0000), 1),)),
            BindingTable(),
            GRID,
        )
    table = BindingTable()
    table.bind(7, 0x8000_0000, 16)
    dma = DmaTrigger(Direction.TO_DEVICE, Symbolic(7, 8), RelativeTile(0, 0, 0x1000), 16)
    with pytest.raises(RangeError):
        bind(Rcb(BlockType.COMPUTE, (dma,)), table, GRID)


def test_bind_is_idempotent():
    table = BindingTable()
    table.bind(7, 0x140, 64)
    rcb = Rcb(
        BlockType.COMPUTE,
        (
            RegWrite(Symbolic(7, 8), 1),
            RegWrite(RelativeTile(1, 1, 0x10), 2),
            DmaTrigger(Direction.TO_DEVICE, Symbolic(7), RelativeTile(0, 0, 0x1000), 64),
            RegWrite(Absolute(0x1000_0000), 3),
        ),
    )
    once = bind(rcb, table, GRID)
    twice = bind(once, table, GRID)
    assert twice == once
    assert encode_rcb(twice) == encode_rcb(once)
    # already absolute blocks need no table
    assert bind(once, BindingTable(), GRID) is once
    plain = Rcb(BlockType.COMPUTE, once.ops)
    assert bind(plain, BindingTable(), GRID) is plain


def test_table_rules():
    table = BindingTable()
    table.bind(1, 0x100, 4)
    with pytest.raises(RcbkitError):
        table.bind(1, 0x200, 4)
    table.freeze()
    with pytest.raises(RcbkitError):
        table.bind(2, 0x200, 4)
    extended = table.extended({})
    assert 1 in extended
    assert not extended.frozen


def test_chain_peak_is_two_buffers():
    """Test A->B->C reuses A's slot for C"""
    pipeline = [touching(A), touching(A, B), touching(B, C)]
    plan = plan_buffers(pipeline, {A: 256, B: 256, C: 256})
    assert plan.peak_live_bytes == 512
    assert len(plan.slots) == 2
    assert plan.lifetimes[C].slot == plan.lifetimes[A].slot


def test_single_block_single_buffer():
    plan = plan_buffers([touching(A)], {A: 100})
    assert len(plan.slots) == 1
    assert plan.peak_live_bytes == 100


def test_shared_weight_is_bound_once():
    manifest = MappingDescriptor()
    manifest.add(TensorInfo(W, 128, cls=TensorClass.WEIGHT))
    manifest.add(TensorInfo(A, 64, cls=TensorClass.ACTIVATION))
    plan = plan_buffers([touching(W, A), touching(W)], manifest)
    assert list(plan.lifetimes) == [W, A]
    assert plan.lifetimes[W].slot is None
    assert (plan.lifetimes[W].first, plan.lifetimes[W].last) == (0, 1)
    assert len(plan.slots) == 1
    assert plan.bindings() == {}


def test_input_and_output_lifetimes_are_pinned():
    manifest = MappingDescriptor(inputs=[A], outputs=[B])
    manifest.add(TensorInfo(A, 64, cls=TensorClass.INPUT))
    manifest.add(TensorInfo(B, 64, cls=TensorClass.OUTPUT))
    manifest.add(TensorInfo(C, 64))
    plan = plan_buffers([touching(C), touching(C), touching(A, B), touching(C)], manifest)
    assert plan.lifetimes[A].first == 0
    assert plan.lifetimes[B].last == 3


def test_release_after():
    plan = plan_buffers([touching(A), touching(A, B), touching(B, C)], {A: 8, B: 8, C: 8})
    assert release_after(plan, 0) == []
    assert release_after(plan, 1) == [A]
    assert release_after(plan, 2) == [B, C]


def test_plan_errors():
    with pytest.raises(PlanError):
        plan_buffers([touching(A)], {})
    with pytest.raises(PlanError):
        plan_buffers([touching(A)], {A: 8192}, Arena(0x8000_0000, 4096))


@pytest.mark.parametrize("size, alignment", [(0, 64), (64, 0), (64, 3), (64, -8)])
def test_plan_rejects_degenerate_buffers(size, alignment):
    manifest = MappingDescriptor(
        {A: TensorInfo(A, 64), B: TensorInfo(B, size, alignment=alignment)}
    )
    with pytest.raises(PlanError):
        plan_buffers([touching(A, B)], manifest, Arena(0x8000_0000, 4096))
    if size <= 0:
        with pytest.raises(PlanError):
            plan_buffers([touching(B)], {B: size})


def test_materialize_shares_regions():
    plan = plan_buffers([touching(A), touching(A, B), touching(B, C)], {A: 256, B: 256, C: 256})
    regions = plan.materialize(Arena(0x8000_0000, 4096))
    assert regions[A] is regions[C]
    assert regions[A] is not regions[B]
    assert set(plan.bindings()) == {A, B, C}


@st.composite
def pipelines(draw):
    nblocks = draw(st.integers(1, 8))
    nbufs = draw(st.integers(1, 10))
    sizes = {}
    uses = {}
    for k in range(nbufs):
        bid = 0x8000_0000 + k
        sizes[bid] = draw(st.integers(1, 512))
        uses[bid] = draw(st.sets(st.integers(0, nblocks - 1), min_size=1, max_size=nblocks))
    blocks = [touching(*(bid for bid in sizes if idx in uses[bid])) for idx in range(nblocks)]
    return blocks, sizes, uses


@settings(max_examples=500, deadline=None)
@given(pipelines())
def test_plan_matches_overlap_oracle(case):
    """Test peak usage and slot sharing against a brute-force interval overlap"""
    blocks, sizes, uses = case
    spans = {bid: (min(idx), max(idx)) for bid, idx in uses.items()}
    peak = max(
        sum(sizes[b] for b, (lo, hi) in spans.items() if lo <= i <= hi) for i in range(len(blocks))
    )
    plan = plan_buffers(blocks, sizes)
    assert plan.peak_live_bytes == peak
    assert plan.slot_bytes >= peak

    for bid, lt in plan.lifetimes.items():
        assert (lt.first, lt.last) == spans[bid]
        assert plan.slots[lt.slot].size >= lt.size
    for x in plan.lifetimes.values():
        for y in plan.lifetimes.values():
            if x is not y and x.slot == y.slot:
                assert not x.overlaps(y)

    regions = plan.materialize(Arena(0x8000_0000, 1 << 20))
    for x, y in ((x, y) for x in spans for y in spans if x < y):
        rx, ry = regions[x], regions[y]
        if rx is not ry:
            assert rx.end <= ry.address or ry.end <= rx.address
