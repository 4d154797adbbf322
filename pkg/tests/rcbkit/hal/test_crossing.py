import pytest

from rcbkit.hal import regmap
from rcbkit.hal.crossing import CrossingDriver
from rcbkit.hal.driver import DmaDescriptor
from rcbkit.hal.simdev import SimDevice
from rcbkit.rcb.format import Direction


@pytest.fixture
def wrapped(device_config):
    return CrossingDriver(SimDevice(device_config), penalty=600)


def test_negative_penalty():
    with pytest.raises(ValueError):
        CrossingDriver(SimDevice(), -1)


def test_command_primitives_are_charged(wrapped):
    """Test every command-issuing primitive costs one crossing"""
    param0 = wrapped.tile_base(0, 0) + regmap.param(0)
    wrapped.write32(param0, 5)
    wrapped.write_block(param0, b"\x01\x00\x00\x00")
    handle = wrapped.initiate_dma(
        DmaDescriptor(Direction.TO_DEVICE, regmap.GLOBAL_BASE, wrapped.local_base(0, 0), 64)
    )
    wrapped.poll_register_masked(wrapped.tile_base(0, 0) + regmap.STATUS, 1, 0, 1)
    wrapped.flush_cache(regmap.GLOBAL_BASE, 64)
    wrapped.invalidate_cache(regmap.GLOBAL_BASE, 64)
    assert wrapped.crossings == 6

    wrapped.read32(param0)
    wrapped.wait_dma(handle)
    assert wrapped.crossings == 6


def test_clock_includes_penalty(wrapped):
    wrapped.write32(wrapped.tile_base(0, 0) + regmap.param(0), 1)
    assert wrapped.now() == wrapped.inner.now() + 600
    assert wrapped.inner.now() == 1


def test_zero_penalty_matches_direct(device_config):
    direct = SimDevice(device_config)
    mediated = CrossingDriver(SimDevice(device_config), 0)
    for hal in (direct, mediated):
        hal.write32(hal.tile_base(1, 0) + regmap.param(0), 9)
        handle = hal.initiate_dma(
            DmaDescriptor(Direction.TO_DEVICE, regmap.GLOBAL_BASE, hal.local_base(1, 0), 1024)
        )
        hal.wait_dma(handle)
    assert direct.now() == mediated.now()


def test_forwards_host_access(wrapped):
    wrapped.host_write(regmap.GLOBAL_BASE, b"xyz")
    assert wrapped.host_read(regmap.GLOBAL_BASE, 3) == b"xyz"
    assert wrapped.crossings == 0
