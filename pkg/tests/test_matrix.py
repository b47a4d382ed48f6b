"""Exact survival table, expected-time ratios, and their invariants."""

import math
from fractions import Fraction

import pytest

from boxsearch import sim
from boxsearch.matrix import (
    SurvivalMatrix,
    block_random_survival,
    column_sum_check,
    coordinated_survival,
    expected_discovery_time,
    nested_survival,
    solo_survival,
    speedup_curve,
    speedup_curve_csv,
    survival_row_exact,
    theta,
    theta_exact_bracket,
    theta_window,
)
from boxsearch.strategy import SearchParams, StrategyKind, searcher_seed

F = Fraction


def test_nested_survival_reference_table_k2():
    p = SearchParams(2)
    # rows 1-3 of the k=2 table
    assert [nested_survival(p, 1, t, exact=True) for t in range(5)] == \
        [F(1), F(2, 3), F(1, 3), F(1, 4), F(1, 6)]
    # rows 4-6
    assert nested_survival(p, 4, 3, exact=True) == F(3, 4)
    assert nested_survival(p, 4, 4, exact=True) == F(1, 2)
    # outside the pool the box is untouched: N = 1 whenever x > ceil(t/2)*(k+1)
    for t in range(0, 9):
        assert nested_survival(p, p.pool_limit(max(t, 1)) + 1, t, exact=True) == 1


def test_nested_survival_k1_pool_exhaustion():
    assert nested_survival(SearchParams(1), 1, 2, exact=True) == 0


def test_nested_survival_rejects_bad_args():
    p = SearchParams(2)
    with pytest.raises(ValueError):
        nested_survival(p, 0, 1)
    with pytest.raises(ValueError):
        nested_survival(p, 1, -1)


def test_nested_survival_monte_carlo_oracle():
    # k=3, x=8, t=6 checked against 10^6 simulated searchers
    p = SearchParams(3)
    exact = nested_survival(p, 8, 6)
    assert nested_survival(p, 8, 6, exact=True) == F(1, 2)
    trials = 1_000_000
    hits = 0
    for seed in range(trials):
        t = sim._nested_hit_time(p.block_size, 8, searcher_seed(seed, 1), 6)
        if t is not None:
            hits += 1
    unvisited = 1 - hits / trials
    se = math.sqrt(exact * (1 - exact) / trials)
    assert abs(unvisited - exact) < 4 * se


def test_block_random_survival_reference_table():
    assert [block_random_survival(3, 1, t, exact=True) for t in range(4)] == \
        [F(1), F(2, 3), F(1, 3), F(0)]
    assert block_random_survival(3, 4, 4, exact=True) == F(2, 3)
    assert block_random_survival(3, 4, 6, exact=True) == F(0)
    # degenerate block is exhaustive search
    for x in (1, 4, 9):
        for t in range(12):
            assert block_random_survival(1, x, t) == (1.0 if t < x else 0.0)


def test_row_monotone_and_block_equality():
    for k in (1, 2, 3, 5):
        p = SearchParams(k)
        view = SurvivalMatrix(StrategyKind.nested(), p, exact=True)
        for x in range(1, 3 * (k + 1) + 1):
            prev = F(1)
            for t in range(0, 40):
                v = view.value(x, t)
                assert v <= prev
                prev = v
        # all rows of one block are equal
        for t in range(0, 40):
            for block_start in (1, k + 2, 2 * k + 3):
                vals = {view.value(x, t) for x in range(block_start, block_start + k + 1)}
                assert len(vals) == 1


def test_column_identity_exact():
    for k in (1, 2, 3, 5, 10):
        p = SearchParams(k)
        view = SurvivalMatrix(StrategyKind.nested(), p, exact=True)
        for t in range(0, 51):
            x_max = p.pool_limit(t) if t else 1
            assert column_sum_check(view, t, x_max) == 0


def test_column_identity_example_k2_t4():
    p = SearchParams(2)
    view = SurvivalMatrix(StrategyKind.nested(), p, exact=True)
    # column t=4: 3*(1 - 1/6) + 3*(1 - 1/2) = 4
    assert view.column_sum_residual(4, 6) == 0
    with pytest.raises(ValueError):
        view.column_sum_residual(4, 5)


def test_column_identity_other_strategies():
    p = SearchParams(2)
    for kind in (StrategyKind.block_random(3), StrategyKind.solo(),
                 StrategyKind.coordinated(2)):
        view = SurvivalMatrix(kind, p, exact=True)
        for t in range(0, 30):
            assert view.column_sum_residual(t, max(1, view.support_limit(t))) == 0


def test_coordinated_survival_values():
    p = SearchParams(3)
    # searcher 2 opens 2, 5, 8, ... at times 1, 2, 3, ...
    assert coordinated_survival(2, p, 8, 2) == 1.0
    assert coordinated_survival(2, p, 8, 3) == 0.0
    assert coordinated_survival(2, p, 7, 100) == 1.0  # never on its arithmetic path
    assert solo_survival(5, 4) == 1.0 and solo_survival(5, 5) == 0.0


def test_product_formula_agreement():
    # N((k+1)x', 2t') equals prod_{i=x'}^{t'} i/(i + 2/(k-1)), exactly in
    # rationals and to 1e-12 relative in floats
    for k in (2, 3, 5):
        p = SearchParams(k)
        delta = p.delta_exact
        for xp in range(1, 16):
            row = survival_row_exact(p, (k + 1) * xp, 50)
            for tp in range(xp, 26):
                product = math.prod(
                    (F(i) / (i + delta) for i in range(xp, tp + 1)), start=F(1))
                assert row[2 * tp] == product
                approx = nested_survival(p, (k + 1) * xp, 2 * tp)
                assert abs(approx - product) <= 1e-12 * product


def test_theta_k1_matches_enumeration_oracle():
    # oracle: the k=1 sampler opens pool pairs {2j-1, 2j} in random order,
    # so E[T_x] enumerates two equally likely visit times
    p = SearchParams(1)
    for x in range(1, 51):
        j = (x + 1) // 2
        t1, t2 = 2 * j - 1, 2 * j
        oracle = F(t1 + t2, 2) / x
        est = theta(p, x)
        assert est.tail_bound == 0.0
        assert abs(est.theta - oracle) < 1e-12
        assert 1 - 1 / x <= est.theta <= 1 + 3 / x


def test_theta_k2_x3_rational_bracket():
    p = SearchParams(2)
    row = survival_row_exact(p, 3, 6)
    assert row[:6] == [F(1), F(2, 3), F(1, 3), F(1, 4), F(1, 6), F(2, 15)]
    lo, hi = theta_exact_bracket(p, 3, 400)
    est = theta(p, 3, epsilon=1e-12)
    assert lo <= est.theta + est.tail_bound and est.theta <= hi


def test_theta_k2_large_x_window():
    est = theta(SearchParams(2), 9999, epsilon=1e-8)
    assert 0.87 <= est.theta <= 0.91
    # the reported value understates the ratio by at most tail_bound
    assert est.tail_bound <= 1e-8


def test_theta_rejects_bad_args():
    p = SearchParams(2)
    with pytest.raises(ValueError):
        theta(p, 0)
    with pytest.raises(ValueError):
        theta(p, 10, epsilon=0.0)
    with pytest.raises(ValueError):
        theta(p, 10, fleet=0)
    with pytest.raises(ValueError):
        theta(SearchParams(5), 10, fleet=1)  # survival tail too heavy for a mean
    with pytest.raises(RuntimeError):
        theta(p, 10_000, epsilon=1e-9, max_steps=1_000)


def test_speedup_curve_limits():
    xs = [10_000]
    for k, limit in ((1, 1.0), (2, 9 / 8), (3, 4 / 3)):
        pts = speedup_curve(SearchParams(k), xs, epsilon=1e-7, window=True)
        assert pts[0].speedup == pytest.approx(limit, rel=0.02)


def test_speedup_curve_rows_ordered_and_csv():
    p = SearchParams(2)
    pts = speedup_curve(p, [300, 100, 200], epsilon=1e-6)
    assert [pt.x for pt in pts] == [100, 200, 300]
    text = speedup_curve_csv(p, [100], epsilon=1e-6)
    lines = text.strip().splitlines()
    assert lines[0] == "k,x,theta,speedup,truncation_t,tail_bound"
    fields = lines[1].split(",")
    assert fields[0] == "2" and fields[1] == "100"
    assert float(fields[2]) == pytest.approx(pts[0].theta, rel=1e-10)


def test_theta_window_dominates_pointwise():
    p = SearchParams(3)
    win = theta_window(p, 1000, epsilon=1e-6)
    for x in range(993, 1001):
        assert theta(p, x, epsilon=1e-6).theta <= win.theta + 1e-12


def test_expected_discovery_time_closed_forms():
    p = SearchParams(3)
    assert expected_discovery_time(StrategyKind.solo(), p, 7) == 7
    assert expected_discovery_time(StrategyKind.coordinated(1), p, 8) == 3
    # block-random fleet of k: (j-1)b + 1 + sum_{i<b} ((b-i)/b)^k
    e = expected_discovery_time(StrategyKind.block_random(3), SearchParams(1), 1, fleet=1)
    assert e == pytest.approx(2.0)
    e = expected_discovery_time(StrategyKind.block_random(3), SearchParams(2), 4)
    assert e == pytest.approx(3 + 1 + (2 / 3) ** 2 + (1 / 3) ** 2)


def test_theta_fleet_override_matches_design():
    # one extra searcher joins a k=2 design; exponent 3 decays fast enough
    # that the truncated rational row is an effectively exact oracle
    p2 = SearchParams(2)
    est = theta(p2, 200, epsilon=1e-10, fleet=3)
    brute = sum(float(v) ** 3 for v in survival_row_exact(p2, 200, 20_000)) / 200
    assert est.theta == pytest.approx(brute, abs=1e-8)
