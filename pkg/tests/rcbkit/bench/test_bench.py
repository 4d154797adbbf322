import numpy as np
import pandas as pd
import pytest

from rcbkit.bench.kernel import passthrough_graph, run_kernel_bench
from rcbkit.bench.stats import StatsError
from rcbkit.bench.sweep import (
    PathModel,
    SweepError,
    compare_control_path,
    model_speedup,
    run_transfer_sweep,
    to_long,
)
from rcbkit.compiler.pack import compile_graph
from rcbkit.config.schema import DeviceConfig

SIZES = [1024, 4096, 16384, 32768]
VOLUME = 256 * 1024


def test_passthrough_is_transfer_dominated():
    bench = run_kernel_bench("passthrough", iterations=100)
    table = bench.table()
    assert list(table.index) == ["input", "compute", "output"]
    assert table.loc["compute", "mean"] < table.loc["input", "mean"] / 4
    assert table.loc["compute", "mean"] < table.loc["output", "mean"] / 4


def test_stage_totals_match_telemetry():
    bench = run_kernel_bench("passthrough", iterations=100)
    telemetry = bench.runtime.snapshot()
    assert telemetry.inferences == 100
    assert telemetry.input_ticks == bench.samples["input"].sum()
    assert telemetry.compute_ticks == bench.samples["compute"].sum()
    assert telemetry.output_ticks == bench.samples["output"].sum()


@pytest.mark.slow
def test_matmul_stages_have_zero_variation():
    """Test every stage of the 64x64 matmul has CV 0 on the virtual clock"""
    bench = run_kernel_bench("matmul", iterations=1000)
    for stats in bench.stats.values():
        assert stats.count == 990
        assert stats.cv == 0.0


@pytest.mark.parametrize("kernel", ["passthrough", "matmul"])
def test_bench_runs_are_identical(kernel):
    """Test two bench runs produce the same per-stage ticks and the same trace lines"""
    first = run_kernel_bench(kernel, iterations=100)
    second = run_kernel_bench(kernel, iterations=100)
    pd.testing.assert_frame_equal(first.samples, second.samples)
    for stage in ("input", "compute", "output"):
        np.testing.assert_array_equal(first.samples[stage].to_numpy(), second.samples[stage].to_numpy())
        assert first.stats[stage].to_dict() == second.stats[stage].to_dict()
    first_lines = [t.to_lines() for t in first.runtime.last_result.traces]
    second_lines = [t.to_lines() for t in second.runtime.last_result.traces]
    assert first_lines and first_lines == second_lines


def test_too_few_iterations():
    with pytest.raises(StatsError):
        run_kernel_bench("passthrough", iterations=99)
    with pytest.raises(StatsError):
        run_kernel_bench("conv", iterations=100)


def test_zero_penalty_has_no_speedup():
    frame = run_transfer_sweep(SIZES, VOLUME, penalty=0)
    assert (frame["speedup"] == 1.0).all()


def test_speedup_falls_with_block_size():
    """Test the mediated/direct ratio shrinks as blocks grow and equals the closed form"""
    frame = run_transfer_sweep(SIZES, VOLUME, penalty=600)
    assert list(frame.index) == SIZES
    assert frame["speedup"].is_monotonic_decreasing
    assert frame["speedup"].is_unique
    np.testing.assert_allclose(frame["speedup"], frame["model_speedup"])
    assert frame.loc[1024, "speedup"] == pytest.approx(716 / 116)
    assert frame.loc[1024, "transfers"] == 256


def test_path_model():
    device = DeviceConfig()
    assert PathModel.direct(device).transfer_ticks(1024) == 116
    assert PathModel.mediated(device, 600).transfer_ticks(1024) == 716
    assert model_speedup(1024, 100, 600, 64) == pytest.approx(6.1724, abs=1e-4)
    with pytest.raises(SweepError):
        PathModel.mediated(device, -1)


def test_sweep_rejects_bad_sizes():
    with pytest.raises(SweepError):
        run_transfer_sweep([1000], VOLUME)
    with pytest.raises(SweepError):
        run_transfer_sweep([131072], 262144)
    with pytest.raises(SweepError):
        run_transfer_sweep([1024], VOLUME, penalty=-5)


def test_control_path_comparison(xgemm_path):
    frame = compare_control_path(compile_graph(xgemm_path), penalty=600)
    assert list(frame.index) == ["direct", "mediated"]
    assert frame.loc["direct", "crossings"] == 0
    assert frame.loc["mediated", "crossings"] >= frame.loc["mediated", "ops"]
    assert frame.loc["direct", "overhead_per_op"] == 0
    assert frame.loc["mediated", "overhead_per_op"] == pytest.approx(600)
    assert frame.loc["mediated", "ratio"] > 1


def test_to_long():
    frame = run_transfer_sweep([4096], 8192, penalty=10)
    long = to_long(frame)
    assert list(long.columns) == ["metric", "key", "value"]
    assert set(long["metric"]) == {"transfers", "direct_ticks", "mediated_ticks", "speedup", "model_speedup"}
    assert set(long["key"]) == {"4096"}


def test_bench_graphs_compile():
    model = compile_graph(passthrough_graph(256))
    assert model.manifest.input_size() == 256
