import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rcbkit.rimfs.alloc import Arena, OutOfMemory, Stage, StageError, advance_stage

BASE = 0x8000_0000


def test_alignment_forced():
    arena = Arena(BASE + 8, 4096)
    region = arena.alloc_region(100, 64)
    assert region.address % 64 == 0
    assert region.address >= BASE + 8


def test_stage_cycle():
    region = Arena(BASE, 1024).alloc_region(16)
    for stage in (Stage.RECEIVE, Stage.COMPUTE, Stage.SEND, Stage.FREE):
        advance_stage(region, stage)
        assert region.stage is stage


def test_skipping_a_stage():
    """Test FREE -> COMPUTE without RECEIVE is refused"""
    region = Arena(BASE, 1024).alloc_region(16)
    with pytest.raises(StageError):
        advance_stage(region, Stage.COMPUTE)
    assert region.stage is Stage.FREE


ORDER = [Stage.FREE, Stage.RECEIVE, Stage.COMPUTE, Stage.SEND]


@pytest.mark.parametrize("length", [1, 2, 3, 4])
def test_every_target_sequence(length):
    """Test all target sequences: legal steps advance, others raise and leave the stage alone"""
    for targets in itertools.product(list(Stage), repeat=length):
        region = Arena(BASE, 1024).alloc_region(16)
        for target in targets:
            before = region.stage
            legal = ORDER[(ORDER.index(before) + 1) % len(ORDER)]
            if target is legal:
                assert advance_stage(region, target) is region
                assert region.stage is target
            else:
                with pytest.raises(StageError):
                    advance_stage(region, target)
                assert region.stage is before


def test_released_region_cannot_advance():
    arena = Arena(BASE, 1024)
    region = arena.alloc_region(16)
    arena.release(region)
    with pytest.raises(StageError):
        advance_stage(region)
    with pytest.raises(StageError):
        arena.release(region)


def test_exhaust_release_realloc():
    arena = Arena(BASE, 1024)
    regions = []
    with pytest.raises(OutOfMemory):
        while True:
            regions.append(arena.alloc_region(100))
    assert len(regions) == 8
    assert arena.live_bytes <= arena.size
    arena.release_all()
    assert arena.free_list == [(BASE, 1024)]
    assert arena.alloc_region(1024).address == BASE


def test_bad_requests():
    arena = Arena(BASE, 1024)
    with pytest.raises(ValueError):
        arena.alloc_region(0)
    with pytest.raises(ValueError):
        arena.alloc_region(16, 3)
    with pytest.raises(ValueError):
        Arena(BASE, 0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 300), st.booleans()), min_size=1, max_size=40))
def test_live_regions_never_overlap(requests):
    """Test live regions stay disjoint, inside the arena, under mixed alloc/release"""
    arena = Arena(BASE, 4096)
    live = []
    for size, release_one in requests:
        if release_one and live:
            arena.release(live.pop(0))
            continue
        try:
            live.append(arena.alloc_region(size, 32))
        except OutOfMemory:
            continue
        spans = sorted((r.address, r.end) for r in live)
        assert spans[0][0] >= BASE
        assert spans[-1][1] <= BASE + 4096
        for (_, a_end), (b_start, _) in zip(spans, spans[1:]):
            assert a_end <= b_start
        assert arena.live_bytes + arena.free_bytes <= arena.size
    assert arena.peak_live_bytes <= arena.size
