import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import norm
from scipy.stats import t as student_t

from invevolve.policies import policy
from invevolve.replay import (ColdStartWarning, GainSamples, InventoryReplay, XiBudget, block_means, block_size,
                              blockwise_t_radius, confidence_bound, default_method, evaluation_budget,
                              hoeffding_radius, replay_mean_var, t_quantile, xi_budget, xi_historical, xi_oracle,
                              xi_shift)
from invevolve.sim import SystemConfig


def gs(z, bound=None, **kw):
    z = list(map(float, z))
    return GainSamples(tuple(z), bound or max(1.0, max(abs(x) for x in z)), **kw)


def test_mean_var_examples():
    assert replay_mean_var(gs([2, 4])) == (3.0, 1.0)
    assert replay_mean_var(gs([7, 7, 7])) == (7.0, 0.0)
    mu, v = replay_mean_var(gs([-1, 0, 1]))
    assert mu == 0 and math.isclose(v, 2 / 3)
    with pytest.raises(ValueError):
        GainSamples((), 1.0)
    with pytest.raises(ValueError):
        GainSamples((3.0,), 1.0)


def test_hoeffding_examples():
    assert abs(hoeffding_radius(10, 100, 25, 0.05) - 3.7170) <= 1e-3
    assert math.isclose(hoeffding_radius(1, 400, 5, 0.1), hoeffding_radius(1, 100, 5, 0.1) / 2)
    m = 2 * math.log(2 * 25 / 0.05)
    assert math.isclose(1.0 * math.sqrt(2 * math.log(1000) / m), 1.0)
    for args in [(1, 10, 0, 0.05), (1, 10, 5, 0), (1, 10, 5, 1), (0, 10, 5, 0.5), (1, 0, 5, 0.5)]:
        with pytest.raises(ValueError):
            hoeffding_radius(*args)


@given(st.floats(0.1, 10), st.integers(1, 500), st.integers(1, 200), st.floats(0.001, 0.5))
def test_hoeffding_monotone(B, m, N, delta):
    r = hoeffding_radius(B, m, N, delta)
    assert hoeffding_radius(B, m + 1, N, delta) < r
    assert hoeffding_radius(B * 1.5, m, N, delta) > r
    assert hoeffding_radius(B, m, N + 1, delta) > r
    assert hoeffding_radius(B, m, N, delta * 1.5) < r


def test_t_quantile_examples():
    assert t_quantile(0.5, 7) == 0
    assert abs(t_quantile(0.975, 13) - 2.1604) <= 1e-3
    assert abs(t_quantile(0.95, 1) - math.tan(math.pi * 0.45)) <= 1e-6
    for p, dof in [(0.975, 1000), (0.999, 5), (0.6, 2), (0.9995, 13)]:
        assert abs(t_quantile(p, dof) - student_t.ppf(p, dof)) <= 1e-6
    # approaches the normal quantile; the exact gap at 1000 dof is 2.4e-3
    assert abs(t_quantile(0.975, 1000) - norm.ppf(0.975)) <= 2.5e-3
    assert abs(t_quantile(0.975, 10**6) - norm.ppf(0.975)) <= 1e-5
    assert math.isclose(t_quantile(0.025, 13), -t_quantile(0.975, 13))
    with pytest.raises(ValueError):
        t_quantile(1.0, 3)
    with pytest.raises(ValueError):
        t_quantile(0.9, 0)


def test_blockwise():
    assert block_size(4) == 7 and block_size(9) == 10
    z = np.random.default_rng(0).normal(size=100)
    assert len(block_means(z, block_size(6))) == 14
    # remainder merged into the last block
    assert math.isclose(block_means(z, 7)[-1], z[91:].mean())
    cb = blockwise_t_radius(gs([2.0] * 30), 3, 10, 0.05)
    assert cb.radius == 0 and cb.lcb == cb.ucb == 2.0
    G = block_means(z, 7)
    cb = blockwise_t_radius(gs(z), 0, 10, 0.05)
    expected = t_quantile(1 - 0.05 / 20, 13) * G.std(ddof=1) / math.sqrt(14)
    assert math.isclose(cb.radius, expected) and cb.method == "blockwise_t"
    fallback = blockwise_t_radius(gs(z[:10]), 0, 10, 0.05)
    assert fallback.method == "hoeffding_fallback"


def test_evaluation_budget():
    assert evaluation_budget(6, 60) == 125
    assert evaluation_budget(1, 1) == 2
    with pytest.raises(ValueError):
        evaluation_budget(2, 0)


def test_confidence_bound_examples():
    a = policy("BaseStock", S=3)
    cb = confidence_bound(GainSamples((1.0, 2.0), 5.0, a, a), 10, 0.05)
    assert cb.mean == cb.radius == cb.lcb == cb.ucb == 0
    cb = confidence_bound(GainSamples((0.0,), 1.0), 1, 0.5)
    assert cb.mean == 0 and cb.lcb == -cb.ucb
    g = gs([2, 4], bound=4.0)
    cb = confidence_bound(g, 1, 0.5)
    assert cb.mean == 3 and cb.lcb == 3 - cb.radius and cb.ucb == 3 + cb.radius
    assert math.isclose(cb.radius, hoeffding_radius(4.0, 2, 1, 0.5))
    with pytest.raises(ValueError):
        confidence_bound(g, 1, 0.5, method="bogus")


def test_default_method():
    assert default_method(100) == "blockwise_t" and default_method(2000) == "hoeffding"


def test_gain_bound_from_costs():
    g = GainSamples.from_costs([1.0, 2.0], [3.0, 2.5])
    assert g.samples == (2.0, 0.5) and g.bound == 3.0 and g.bound_observed
    with pytest.raises(ValueError):
        GainSamples.from_costs([1.0], [1.0, 2.0])


def test_xi_historical():
    assert xi_historical([0.1, 0.2, 0.3, 0.4], 0.25) == 0.3
    assert xi_historical([0.7], 0.1) == 0.7
    assert xi_historical([0.1, 0.5, 0.2], 1e-9) == 0.5
    with pytest.warns(ColdStartWarning):
        assert xi_historical([], 0.1) == 0


def test_xi_shift():
    u = np.linspace(0, 5, 30)
    cal = [([x], 2 * x) for x in u]
    assert abs(xi_shift(cal, [3.0], 0.1) - 6.0) <= 0.3
    assert xi_shift([([x], 0.0) for x in u], [3.0], 0.1, inflation=0.25) == 0.25
    few = [([1.0], 0.1), ([2.0], 0.4), ([3.0], 0.2)]
    assert xi_shift(few, [9.0], 0.1) == xi_historical([0.1, 0.4, 0.2], 0.1)
    with pytest.raises(ValueError):
        xi_shift(cal, [1.0, 2.0], 0.1)


def test_xi_oracle():
    assert math.isclose(xi_oracle({"a": 1.0}, {"a": 1.4}), 0.4)
    assert xi_oracle({"a": 1.0, "b": 2}, {"a": 1.0, "b": 2}) == 0
    assert math.isclose(xi_oracle({"a": 0, "b": 0}, {"a": 0.1, "b": -0.5}), 0.5)
    with pytest.raises(ValueError):
        xi_oracle({"a": 0}, {"b": 0})


@given(st.lists(st.floats(0, 5), max_size=12), st.lists(st.floats(0, 5), max_size=12), st.floats(0.01, 0.5))
def test_xi_budget_is_max(pool, extra, alpha):
    cal = [([i * 0.1, 1.0], x) for i, x in enumerate(extra)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ColdStartWarning)
        b = xi_budget(pool, cal, [0.5, 1.0], alpha=alpha)
    assert b.xi == max(b.xi_hist, b.xi_shift) and b.xi >= 0


def test_xi_budget_cold_start():
    with pytest.warns(ColdStartWarning):
        b = xi_budget([], [], None)
    assert b.xi == 0 and b.cold_start
    with pytest.raises(ValueError):
        XiBudget(-1.0, 0.0)


def test_inventory_replay_modes():
    d = [5.0] * 40
    cfg = SystemConfig(1, 1, 10)
    r = InventoryReplay(d, cfg)
    assert r.m == 40 and r.path_costs(policy("BaseStock", S=10)).shape == (40,)
    s = InventoryReplay(d, cfg, mode="subwindow", window=10, stride=5)
    assert s.m == 7 and s.path_costs(policy("BaseStock", S=10)).shape == (7,)
    with pytest.raises(ValueError):
        InventoryReplay(d, cfg, mode="other")
    with pytest.raises(ValueError):
        InventoryReplay(d, cfg, mode="subwindow")


def test_coverage_small_monte_carlo():
    # quick version of the acceptance check: N pairs of m bounded gains, joint coverage
    rng = np.random.default_rng(5)
    reps, N, m, delta = 400, 25, 50, 0.05
    rad = hoeffding_radius(1.0, m, N, delta)
    z = rng.uniform(-1, 1, size=(reps, N, m))
    covered = np.all(np.abs(z.mean(axis=2)) <= rad, axis=1)
    assert covered.mean() >= 1 - delta
