import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmtc import aggregation as agg
from mmtc.metrics import KM2, evaluate, evaluate_crs, evaluate_rrs, sweep
from mmtc.params import SchedulingScheme, default_params, desk_params


@given(st.integers(1, 40), st.floats(20, 400), st.floats(0.2, 5))
@settings(max_examples=25)
def test_rrs_products_are_bounded(n, tw, gamma1):
    p = desk_params(n_channels=n, resource_tw=tw).with_(gamma1=gamma1)
    r = evaluate_rrs(p)
    for v in (r.p_occupy, r.p_nondrop, r.p_suc1, r.p_suc2, r.p_mtd_success, r.p_channel_util):
        assert 0.0 <= v <= 1.0
    assert r.p_channel_util <= r.p_occupy + 1e-15
    assert r.p_mtd_success <= r.p_nondrop + 1e-15
    assert r.p_mtd_success == pytest.approx(r.p_nondrop * r.p_suc1 * r.p_suc2, rel=1e-12)


def test_rrs_limit_without_interference_or_load():
    p = desk_params(resource_tw=1e9).with_(gamma1=1e-12)
    r = evaluate_rrs(p)
    assert r.p_suc1 == pytest.approx(1.0, abs=1e-5)
    assert r.p_suc2 == pytest.approx(1.0, abs=1e-5)
    assert r.p_mtd_success == pytest.approx(r.p_nondrop, abs=1e-5)
    assert r.p_channel_util == pytest.approx(r.p_occupy, abs=1e-5)
    # every scheduled MTD succeeds: E[min(K, N)] = N p_O
    assert r.avg_successful_mtds == pytest.approx(p.n_channels * r.p_occupy, rel=1e-5)


def test_density_scaling():
    p = desk_params()
    r = evaluate_rrs(p)
    assert r.successful_mtds_per_km2 == pytest.approx(p.lambda_a * r.avg_successful_mtds * KM2)


def test_successful_mtds_close_to_mean_times_probability():
    # at the table1 defaults the per-aggregator count tracks m̄ · p_suc
    r = evaluate_rrs(default_params())
    assert abs(r.avg_successful_mtds / (70 * r.p_mtd_success) - 1) < 0.05


def test_crs_and_rrs_converge_with_ample_channels():
    p = desk_params(n_channels=40)
    a, b = evaluate_rrs(p), evaluate_crs(p)
    for name in ("p_suc1", "p_suc2", "p_mtd_success", "p_channel_util", "avg_successful_mtds"):
        assert getattr(a, name) == pytest.approx(getattr(b, name), rel=1e-6, abs=1e-9)


def test_crs_beats_rrs_when_channels_are_scarce():
    p = default_params(n_channels=10, resource_tw=300)
    a, b = evaluate_rrs(p), evaluate_crs(p)
    assert b.p_suc1 > a.p_suc1
    assert b.p_mtd_success > a.p_mtd_success


def test_crs_exact_route_close_to_jensen():
    p = desk_params(n_channels=5)
    a, b = evaluate_crs(p), evaluate_crs(p, jensen=False)
    assert abs(a.p_suc1 - b.p_suc1) < 0.02


def test_metrics_monotone_in_resources():
    vals = [evaluate_rrs(desk_params(resource_tw=tw)) for tw in (50, 100, 200, 400)]
    p2 = [r.p_suc2 for r in vals]
    assert all(a < b for a, b in zip(p2, p2[1:]))


def test_evaluate_dispatch():
    p = desk_params()
    assert evaluate(p, "rrs") == evaluate_rrs(p)
    assert evaluate(p, SchedulingScheme.CRS).p_suc1 == evaluate_crs(p).p_suc1


def test_sweep_preserves_grid_order():
    grid = [300, 50, 150]
    pts = sweep(desk_params(), "resource_tw", grid, workers=3)
    assert [pt.x for pt in pts] == grid
    assert [pt.params.resource_tw for pt in pts] == grid
    serial = sweep(desk_params(), "resource_tw", grid)
    assert [pt.report for pt in pts] == [pt.report for pt in serial]


def test_sweep_records_failures():
    pts = sweep(desk_params(), "alpha", [4.0, 2.0])
    assert pts[0].report is not None and pts[0].error is None
    assert pts[1].report is None and pts[1].error


def test_sweep_rejects_bad_axis_and_grid():
    with pytest.raises(ValueError):
        sweep(desk_params(), "gamma1", [1.0])
    with pytest.raises(ValueError):
        sweep(desk_params(), "resource_tw", [])


def test_channel_util_non_increasing_in_channels():
    vals = [evaluate_rrs(desk_params(n_channels=n)).p_channel_util for n in range(2, 30, 3)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))
