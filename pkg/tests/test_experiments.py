import numpy as np
import pytest

from compact_bilinear import ParameterError
from compact_bilinear.experiments import (
    CALIBRATED_SPREAD,
    bench,
    fewshot_experiment,
    kernel_sweep,
    make_synth,
    pool,
    relative_kernel_error,
)


def test_relative_error_floor():
    assert relative_kernel_error(1.0, 0.0) == pytest.approx(1e12)
    assert relative_kernel_error(3.0, 2.0) == pytest.approx(0.5)


def test_sweep_rows_sorted_and_counted():
    rows = kernel_sweep(6, [32, 8, 16], pairs=2, trials=3, seed=1, h=2, w=2)
    assert [(r.method, r.d) for r in rows] == [("rm", 8), ("rm", 16), ("rm", 32),
                                               ("ts", 8), ("ts", 16), ("ts", 32)]
    assert all(r.seeds == 6 for r in rows)
    assert all(r.median_rel_error >= 0 and r.std_rel_error >= 0 for r in rows)


def test_sweep_method_subset_is_consistent():
    both = kernel_sweep(6, [16], pairs=2, trials=2, seed=4, h=2, w=2)
    ts_only = kernel_sweep(6, [16], pairs=2, trials=2, seed=4, h=2, w=2, methods=("ts",))
    assert ts_only[0] == both[1]


def test_sweep_full_size_sketch_still_approximate():
    rows = kernel_sweep(4, [16], pairs=1, trials=1, seed=0, h=2, w=2)
    assert all(r.median_rel_error > 0 for r in rows)


def test_sweep_rejects_zero_dim():
    with pytest.raises(ParameterError):
        kernel_sweep(4, [0], pairs=1, trials=1)


def test_pool_dim_rules():
    grid, _ = make_synth(2, 2, 4, 2, 2, 0.1, seed=0)
    with pytest.raises(ParameterError):
        pool(grid, "bilinear", 8)
    with pytest.raises(ParameterError):
        pool(grid, "rm")
    assert pool(grid, "bilinear").shape == (4, 16)
    assert pool(grid, "rm", 10).shape == (4, 10)


def test_bench_reps_minimum():
    with pytest.raises(ParameterError):
        bench("ts", 8, 16, 2, 2, reps=4)


def test_make_synth_validation():
    with pytest.raises(ParameterError):
        make_synth(1, 3, 4, 2, 2, 0.1)
    with pytest.raises(ParameterError):
        make_synth(3, 3, 4, 2, 2, -0.5)


@pytest.mark.xfail(strict=True, reason=(
    "with isotropic-noise synthetic descriptors the sketch only adds estimator noise; "
    "measured 1-shot gap is about -2.5 points and up to -3.1 at 3 shots"))
def test_fewshot_ts_full_size_matches_bilinear():
    shots = [1, 2, 3, 7, 14]
    fb, ts = [], []
    for trial in range(10):
        grid, labels = make_synth(10, 30, 32, 4, 4, CALIBRATED_SPREAD, seed=trial)
        fb.append([r.mean for r in fewshot_experiment(grid, labels, "bilinear", None, shots, 1, seed=trial)])
        ts.append([r.mean for r in fewshot_experiment(grid, labels, "ts", 1024, shots, 1, seed=trial)])
    fb_med, ts_med = np.median(fb, axis=0), np.median(ts, axis=0)
    assert np.all(np.abs(ts_med - fb_med) <= 0.03)
    assert ts_med[0] >= fb_med[0]
