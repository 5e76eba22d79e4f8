import math

import numpy as np
import pytest

import oracles
from conftest import random_covariate
from dcselect.data_model import scalar_covariate, vector_covariate
from dcselect.dcor import (
    BlockPlan,
    DistanceMatrixCache,
    MemoryBudgetError,
    auto_block_size,
    centering_stats,
    dcor_blockwise,
    dcor_direct,
    double_center,
    independence_test,
    screen_candidates,
)

# frozen from the brute-force oracle on x=(0,1,2), y=(0,1,4)
GOLDEN_DCOR_012_014 = 0.96566288540065259
GOLDEN_DCOV2_012_014 = 0.98765432098765438


def test_centering_stats_hand_checked():
    s = centering_stats(scalar_covariate("x", [0.0, 1.0, 2.0]))
    assert np.allclose(s.row_sums, [3.0, 2.0, 3.0])
    assert s.grand_sum == pytest.approx(8.0)


def test_centering_stats_constant():
    s = centering_stats(scalar_covariate("x", [5.0] * 6))
    assert np.allclose(s.row_sums, 0.0)
    assert s.grand_sum == 0.0


def test_centering_stats_grand_equals_row_sum(rng):
    for kind in ("scalar", "vector", "functional", "categorical"):
        c = random_covariate(rng, kind, 17)
        s = centering_stats(c)
        assert s.grand_sum == pytest.approx(float(s.row_sums.sum()), rel=1e-12)
        tiled = centering_stats(c, block_size=5)
        assert np.allclose(tiled.row_sums, s.row_sums, rtol=1e-12)


def test_centering_stats_requires_two():
    with pytest.raises(ValueError):
        centering_stats(scalar_covariate("x", [1.0]))


def test_double_centered_rows_and_columns_sum_to_zero(rng):
    c = random_covariate(rng, "scalar", 30)
    from dcselect.data_model import distance_matrix

    d = distance_matrix(c)
    a = double_center(d)
    scale = 1e-9 * 30 * max(d.max(), 1.0)
    assert np.all(np.abs(a.sum(axis=0)) < scale)
    assert np.all(np.abs(a.sum(axis=1)) < scale)


def test_dcor_golden_value():
    x = scalar_covariate("x", [0.0, 1.0, 2.0])
    y = scalar_covariate("y", [0.0, 1.0, 4.0])
    res = dcor_direct(x, y)
    assert res.dcor == pytest.approx(GOLDEN_DCOR_012_014, abs=1e-15)
    assert res.dcov2 == pytest.approx(GOLDEN_DCOV2_012_014, abs=1e-14)


def test_dcor_self_is_one():
    x = scalar_covariate("x", [1.0, 2.0, 3.0, 5.0])
    assert dcor_direct(x, x).dcor == pytest.approx(1.0, abs=1e-12)


def test_dcor_affine_invariance():
    vals = np.array([1.0, 2.0, 3.0, 5.0])
    x = scalar_covariate("x", vals)
    y = scalar_covariate("y", 2.0 * vals - 7.0)
    assert dcor_direct(x, y).dcor == pytest.approx(1.0, abs=1e-12)


def test_dcor_constant_is_zero():
    x = scalar_covariate("x", [4.0, 4.0, 4.0, 4.0])
    y = scalar_covariate("y", [1.0, 2.0, 3.0, 4.0])
    res = dcor_direct(x, y)
    assert res.dcor == 0.0 and res.dvar_x == 0.0


def test_dcor_matches_brute_force_mixed_kinds(rng):
    kinds = ["scalar", "vector", "functional", "categorical"]
    for trial in range(12):
        kx, ky = rng.choice(kinds, size=2)
        n = int(rng.integers(5, 25))
        x = random_covariate(rng, str(kx), n, "x")
        y = random_covariate(rng, str(ky), n, "y")
        expected, dcov2, dvx, dvy = oracles.brute_dcor(
            x.kind, x.values, y.kind, y.values,
            getattr(x, "grid", None), getattr(y, "grid", None))
        res = dcor_direct(x, y)
        assert res.dcor == pytest.approx(expected, abs=1e-12)
        assert res.dcov2 == pytest.approx(dcov2, abs=1e-12)


def test_dcor_symmetry_and_result_invariant(rng):
    for _ in range(20):
        n = int(rng.integers(5, 30))
        x = random_covariate(rng, "scalar", n, "x")
        y = random_covariate(rng, "vector", n, "y")
        r1 = dcor_direct(x, y)
        r2 = dcor_direct(y, x)
        assert r1.dcor == r2.dcor
        if r1.dvar_x > 0 and r1.dvar_y > 0:
            assert r1.dcor**2 == pytest.approx(
                r1.dcov2 / math.sqrt(r1.dvar_x * r1.dvar_y), abs=1e-12)
        assert -1e-12 <= r1.dcor <= 1.0 + 1e-12


def test_dcor_scale_and_orthogonal_invariance(rng):
    n = 40
    base = rng.normal(size=(n, 3))
    y = scalar_covariate("y", rng.normal(size=n))
    x1 = vector_covariate("x", base)
    r1 = dcor_direct(x1, y)
    # shift, positive scaling, orthogonal rotation
    q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
    x2 = vector_covariate("x", 3.7 * (base @ q.T) + 11.0)
    r2 = dcor_direct(x2, y)
    assert r2.dcor == pytest.approx(r1.dcor, abs=1e-12)


def test_blockwise_matches_direct_all_block_sizes(rng):
    for kind in ("scalar", "functional", "categorical"):
        n = 23
        x = random_covariate(rng, kind, n, "x")
        y = random_covariate(rng, "scalar", n, "y")
        ref = dcor_direct(x, y)
        for block in (1, 7, 64, n):
            res = dcor_blockwise(x, y, BlockPlan(block))
            assert res.dcor == pytest.approx(ref.dcor, rel=1e-10)
            assert res.dcov2 == pytest.approx(ref.dcov2, rel=1e-10, abs=1e-14)


def test_block_plan_validation():
    with pytest.raises(ValueError):
        BlockPlan(0)
    assert BlockPlan(10).passes(25) == 9
    assert auto_block_size(8 * 64 * 64) == 64


def test_memory_budget_refusal():
    x = scalar_covariate("x", np.arange(100.0))
    with pytest.raises(MemoryBudgetError) as excinfo:
        dcor_direct(x, x, memory_budget=1000)
    assert "blockwise" in str(excinfo.value)


def test_independence_test_self_pvalue():
    rng = np.random.default_rng(3)
    x = scalar_covariate("x", rng.normal(size=100))
    res = independence_test(x, x, n_perm=199, seed=1)
    assert res.p_value == pytest.approx(1.0 / 200.0)


def test_independence_test_deterministic():
    rng = np.random.default_rng(4)
    x = scalar_covariate("x", rng.normal(size=40))
    y = scalar_covariate("y", rng.normal(size=40))
    r1 = independence_test(x, y, n_perm=99, seed=7)
    r2 = independence_test(x, y, n_perm=99, seed=7)
    assert r1 == r2
    r3 = independence_test(x, y, n_perm=99, seed=8)
    assert r3.dcor == r1.dcor  # statistic does not depend on the seed


def test_independence_test_constant_pvalue_one():
    x = scalar_covariate("x", [1.0] * 10)
    y = scalar_covariate("y", np.arange(10.0))
    res = independence_test(x, y, n_perm=49, seed=0)
    assert res.p_value == 1.0 and res.dcor == 0.0


def test_independence_test_blockwise_path_matches_direct_statistic():
    rng = np.random.default_rng(5)
    x = scalar_covariate("x", rng.normal(size=30))
    y = scalar_covariate("y", rng.normal(size=30))
    direct = independence_test(x, y, n_perm=60, seed=3)
    # budget too small for two 30x30 matrices forces the tiled path
    tiled = independence_test(x, y, n_perm=60, seed=3, memory_budget=10_000,
                              block_size=8)
    assert tiled.dcor == pytest.approx(direct.dcor, rel=1e-10)
    # same seed stream, same permutations, so identical counts
    assert tiled.p_value == pytest.approx(direct.p_value, abs=1e-12)


def test_permutation_distribution_matches_exhaustive_oracle():
    # N small enough to enumerate all N! permutations exactly
    rng = np.random.default_rng(11)
    n = 6
    xv = rng.normal(size=n)
    yv = xv + 0.4 * rng.normal(size=n)
    a = oracles.distance_matrix("scalar", xv)
    b = oracles.distance_matrix("scalar", yv)
    exact_y = oracles.exact_permutation_pvalue(a, b, permute="y")
    exact_x = oracles.exact_permutation_pvalue(a, b, permute="x")
    # permuting either side gives the same exact distribution
    assert exact_y == pytest.approx(exact_x, abs=1e-12)
    res = independence_test(scalar_covariate("x", xv), scalar_covariate("y", yv),
                            n_perm=4999, seed=17)
    se = math.sqrt(exact_y * (1 - exact_y) / 4999)
    assert res.p_value == pytest.approx(exact_y, abs=4 * se + 1e-3)


def test_screen_candidates_orders_and_filters(rng):
    n = 60
    resid = scalar_covariate("(residuals)", rng.normal(size=n))
    same = scalar_covariate("same", resid.values.copy())
    noise = scalar_covariate("noise", rng.normal(size=n))
    flat = scalar_covariate("flat", np.zeros(n))
    rows = screen_candidates(resid, [noise, same, flat], n_perm=99, seed=5)
    assert [r.name for r in rows] == ["noise", "same", "flat"]
    by_name = {r.name: r for r in rows}
    assert by_name["same"].dcor == pytest.approx(1.0, abs=1e-12)
    assert by_name["same"].p_value <= 0.05
    assert by_name["same"].filtered == by_name["same"].dcor
    assert by_name["flat"].dcor == 0.0 and by_name["flat"].p_value == 1.0
    assert by_name["flat"].filtered == 0.0


def test_screen_candidates_constant_residuals(rng):
    resid = scalar_covariate("(residuals)", np.ones(20))
    cand = scalar_covariate("c", rng.normal(size=20))
    rows = screen_candidates(resid, [cand], n_perm=49, seed=1)
    assert rows[0].dcor == 0.0 and rows[0].p_value == 1.0


def test_screen_candidates_pvalues_agree_with_independence_test(rng):
    # same statistic, different permutation stream: p-values agree within
    # Monte Carlo error
    n = 80
    x = rng.normal(size=n)
    resid = scalar_covariate("(residuals)", x + 0.8 * rng.normal(size=n))
    cand = scalar_covariate("c", x)
    other = scalar_covariate("o", rng.normal(size=n))
    rows = screen_candidates(resid, [cand, other], n_perm=999, seed=2)
    ref_c = independence_test(resid, cand, n_perm=999, seed=77)
    ref_o = independence_test(resid, other, n_perm=999, seed=78)
    assert rows[0].dcor == pytest.approx(ref_c.dcor, rel=1e-12)
    assert rows[1].dcor == pytest.approx(ref_o.dcor, rel=1e-12)
    for row, ref in ((rows[0], ref_c), (rows[1], ref_o)):
        se = math.sqrt(max(ref.p_value * (1 - ref.p_value), 0.002) / 999)
        assert row.p_value == pytest.approx(ref.p_value, abs=5 * se + 2e-3)


def test_screen_candidates_blockwise_fallback(rng):
    n = 40
    resid = scalar_covariate("(residuals)", rng.normal(size=n))
    cand = scalar_covariate("c", resid.values + 0.1 * rng.normal(size=n))
    rows_small = screen_candidates(resid, [cand], n_perm=199, seed=3,
                                   memory_budget=5_000, block_size=16)
    rows_big = screen_candidates(resid, [cand], n_perm=199, seed=3)
    assert rows_small[0].dcor == pytest.approx(rows_big[0].dcor, rel=1e-10)
    assert rows_small[0].p_value <= 0.05 and rows_big[0].p_value <= 0.05


def test_distance_cache_budget():
    cache = DistanceMatrixCache(memory_budget=10 * 10 * 8 * 2 + 100)
    a = scalar_covariate("a", np.arange(10.0))
    b = scalar_covariate("b", np.arange(10.0) ** 2)
    c = scalar_covariate("c", np.arange(10.0) ** 3)
    for cov in (a, b, c):
        cache.centered(cov)
    assert set(cache._entries) == {"a", "b"}  # c exceeded the budget
    again, _ = cache.centered(a)
    assert again is cache._entries["a"][0]
