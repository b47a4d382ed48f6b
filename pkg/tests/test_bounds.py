"""Gamma products, tail sums, water-filling, and the lower-bound machinery."""

import math

import numpy as np
import pytest

from boxsearch.bounds import (
    LowerBoundConfig,
    WaterFillProblem,
    claim1_tail_sum,
    direct_ratio_product,
    gamma_asymptotic_ratio,
    gamma_ratio_product,
    lower_bound_closed_form,
    lowerbound_value,
    optimal_continuous_N,
    random_feasible_f,
    rebalance_pair,
    solve_gamma,
    upper_bound_identity_residual,
    waterfill_closed_form,
    waterfill_grid_oracle,
    waterfill_objective,
    weighted_average_quadrature,
)


def test_gamma_ratio_product_small_cases():
    assert gamma_ratio_product(1, 1, 2.0) == pytest.approx(1 / 3, rel=1e-12)
    # telescoping: (1/2)(2/3)(3/4) = 1/4
    assert gamma_ratio_product(1, 3, 1.0) == pytest.approx(1 / 4, rel=1e-12)


def test_gamma_ratio_product_vs_direct():
    direct = direct_ratio_product(100, 10_000, 2 / 3)
    assert abs(gamma_ratio_product(100, 10_000, 2 / 3) - direct) <= 1e-10 * direct


def test_gamma_ratio_product_domain():
    with pytest.raises(ValueError):
        gamma_ratio_product(0, 5, 1.0)
    with pytest.raises(ValueError):
        gamma_ratio_product(3, 2, 1.0)
    with pytest.raises(ValueError):
        gamma_ratio_product(1, 2, 0.0)


def test_gamma_asymptotic():
    for alpha in (0.5, 1.0, 2.0):
        assert abs(gamma_asymptotic_ratio(1_000_000, alpha) - 1.0) < 1e-3


def test_claim1_values_stay_below_limit():
    # (delta, k) from fleet sizes k: delta = 2/(k-1), limit 1/(delta*k - 1)
    for k in (2, 3, 5):
        delta = 2.0 / (k - 1)
        limit = 1.0 / (delta * k - 1.0)
        value = claim1_tail_sum(10_000, delta, k, tolerance=1e-6)
        assert value <= limit * 1.01


def test_claim1_telescoping_oracle():
    # delta = 1 telescopes: prod = x/(t+1), so the sum is x^2 * sum u^-3
    x = 2_000
    oracle = x * x * math.fsum(1.0 / u ** 3 for u in range(x + 1, 400_000))
    value = claim1_tail_sum(x, 1.0, 3, tolerance=1e-9)
    assert value == pytest.approx(oracle, abs=1e-4)


def test_claim1_monotone_in_x():
    v3 = claim1_tail_sum(1_000, 2.0, 2, tolerance=1e-7)
    v4 = claim1_tail_sum(10_000, 2.0, 2, tolerance=1e-7)
    assert v4 >= v3 * 0.95


def test_claim1_divergence_flagged():
    with pytest.raises(ValueError):
        claim1_tail_sum(100, 0.4, 2, tolerance=1e-6)


def test_upper_bound_identity():
    for k in range(2, 51):
        assert upper_bound_identity_residual(k) <= 1e-12


def test_waterfill_symmetric_and_trivial():
    p = WaterFillProblem((2.5,) * 4, 2.0, 2)
    f, alpha = waterfill_closed_form(p)
    assert f == pytest.approx([0.5] * 4, abs=1e-9)
    p0 = WaterFillProblem((1.0, 2.0, 3.0), 0.0, 3)
    f0, _ = waterfill_closed_form(p0)
    assert f0 == pytest.approx([1.0] * 3, abs=1e-9)
    assert waterfill_objective(p0, f0) == pytest.approx(6.0, abs=1e-8)
    assert waterfill_objective(p0, [0.0, 0.0, 0.0]) == 0.0


def test_waterfill_validation():
    with pytest.raises(ValueError):
        WaterFillProblem((1.0, -1.0), 0.5, 2)
    with pytest.raises(ValueError):
        WaterFillProblem((1.0,), 2.0, 2)
    with pytest.raises(ValueError):
        WaterFillProblem((1.0,), 0.5, 1)


def test_waterfill_pair_example_grid_oracle():
    # weights (1, 8), deficit 1/2: compare against the flat 1e-6 grid
    p = WaterFillProblem((1.0, 8.0), 0.5, 2)
    f, _alpha = waterfill_closed_form(p)
    closed = waterfill_objective(p, f)
    _gf, grid = waterfill_grid_oracle(p, resolution=1e-6)
    assert abs(closed - grid) <= 1e-4


def test_waterfill_random_instances_vs_grid():
    rng = np.random.default_rng(2024)
    for _ in range(30):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(2, 4))
        p = WaterFillProblem(tuple(float(v) for v in rng.uniform(0.2, 5.0, n)),
                             float(rng.uniform(0.1, n - 0.1)), k)
        f, _ = waterfill_closed_form(p)
        closed = waterfill_objective(p, f)
        _gf, grid = waterfill_grid_oracle(p, resolution=1e-6)
        assert abs(closed - grid) <= 1e-4
        assert abs(sum(1.0 - v for v in f) - p.budget) <= 1e-10
        assert all(-1e-12 <= v <= 1.0 + 1e-12 for v in f)


def test_waterfill_never_beaten_by_random_points():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(2, 4))
        p = WaterFillProblem(tuple(float(v) for v in rng.uniform(0.2, 5.0, n)),
                             float(rng.uniform(0.1, n - 0.1)), k)
        f, _ = waterfill_closed_form(p)
        closed = waterfill_objective(p, f)
        probe = random_feasible_f(p, rng)
        assert closed <= waterfill_objective(p, probe) + 1e-9


def test_waterfill_alpha_monotone_continuous_in_budget():
    a = (0.7, 1.9, 3.2, 0.4)
    alphas = []
    grid = np.linspace(0.0, 4.0, 401)
    for budget in grid:
        _, alpha = waterfill_closed_form(WaterFillProblem(a, float(budget), 2))
        alphas.append(alpha)
    diffs = np.diff(alphas)
    assert (diffs <= 1e-9).all()  # deficit up, alpha down
    # no jumps: steps bounded by a Lipschitz estimate on the grid
    assert (np.abs(diffs) <= 0.1).all()


def test_rebalance_pair_cases():
    assert rebalance_pair(3.0, 3.0, 1.0, 2) == pytest.approx((0.5, 0.5))
    assert rebalance_pair(1.0, 1.0, 2.0, 3) == pytest.approx((1.0, 1.0))
    f1, f2 = rebalance_pair(1.0, 16.0, 1.0, 3)
    assert (f1, f2) == pytest.approx((0.8, 0.2), abs=1e-12)
    with pytest.raises(ValueError):
        rebalance_pair(1.0, 1.0, 2.5, 2)
    with pytest.raises(ValueError):
        rebalance_pair(0.0, 1.0, 1.0, 2)


def test_rebalance_pair_matches_fine_grid():
    rng = np.random.default_rng(11)
    for _ in range(25):
        a1, a2 = (float(v) for v in rng.uniform(0.2, 9.0, 2))
        total = float(rng.uniform(0.05, 1.95))
        k = int(rng.integers(2, 5))
        f1, f2 = rebalance_pair(a1, a2, total, k)
        lo, hi = max(0.0, total - 1.0), min(1.0, total)
        g1 = np.linspace(lo, hi, 1_000_001)
        obj = a1 * g1 ** k + a2 * (total - g1) ** k
        best = float(obj.min())
        assert a1 * f1 ** k + a2 * f2 ** k <= best + 1e-4


def test_solve_gamma_idealized_and_bracket():
    # s = 0 with the boundary exponent: gamma = (k+1)/2 * t exactly
    for k in (2, 3, 5):
        for t in (0.0, 1.0, 10.0, 123.5):
            assert solve_gamma(k, 2.0, 0.0, t) == pytest.approx((k + 1) / 2 * t)
    # s > 0: the solution is strictly inside the proven bracket
    k, a, s, t = 2, 2.5, 1.0, 10.0
    g = solve_gamma(k, a, s, t)
    lo = (a + k - 1) / a * t + s
    hi = (a + k - 1) / a * (t + s)
    assert lo < g < hi
    # and satisfies the defining equation
    q = (a + k - 1) / (k - 1)
    rhs = g * (k - 1) / (a + k - 1) * (1 - (s / g) ** q)
    assert g - t - s == pytest.approx(rhs, abs=1e-9)


def test_optimal_continuous_N_clipping_and_shape():
    cfg = LowerBoundConfig(k=2, a=2.5, s=1.0)
    g = solve_gamma(2, 2.5, 1.0, 5.0)
    assert optimal_continuous_N(cfg, g + 1.0, 5.0) == 1.0
    assert optimal_continuous_N(cfg, g / 2, 5.0) == pytest.approx((0.5) ** (2.5 / 1))
    assert optimal_continuous_N(cfg, cfg.s, 0.0) == 1.0
    with pytest.raises(ValueError):
        optimal_continuous_N(cfg, 0.5, 1.0)


def test_optimal_continuous_N_column_constraint():
    # integral of (1 - N(x, t)) over x >= s recovers t
    from scipy import integrate

    cfg = LowerBoundConfig(k=3, a=2.7, s=1.0)
    for t in (0.5, 4.0, 20.0):
        g = solve_gamma(cfg.k, cfg.a, cfg.s, t)
        val, _ = integrate.quad(lambda x: 1.0 - optimal_continuous_N(cfg, x, t), cfg.s, g)
        assert val == pytest.approx(t, rel=1e-8)


def test_lower_bound_near_limit():
    for k in (2, 3, 5):
        target = 4 * k / (k + 1) ** 2
        assert lower_bound_closed_form(k, 2.001) == pytest.approx(target, rel=0.01)


def test_lower_bound_s_independent_quadrature():
    for s in (0.5, 1.0, 3.0):
        res = lowerbound_value(LowerBoundConfig(k=2, a=3.0, s=s), tolerance=1e-6)
        assert res.rel_gap <= 1e-6
        assert res.value == pytest.approx(lower_bound_closed_form(2, 3.0), rel=1e-12)


def test_weighted_average_dominates_closed_form():
    # the exact cutoff curve can only do better than the bracket substitutions
    for k in (2, 3):
        cfg = LowerBoundConfig(k=k, a=3.0, s=1.0)
        assert weighted_average_quadrature(cfg) >= lower_bound_closed_form(k, 3.0)


def test_lower_bound_config_validation():
    with pytest.raises(ValueError):
        LowerBoundConfig(k=1, a=3.0)
    with pytest.raises(ValueError):
        LowerBoundConfig(k=2, a=2.0)
    with pytest.raises(ValueError):
        LowerBoundConfig(k=2, a=3.0, s=0.0)
