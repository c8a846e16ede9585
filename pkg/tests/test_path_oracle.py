import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onlinerkhs import rkhs
from onlinerkhs.analysis import _ConstantLambda
from onlinerkhs.errors import ParameterError
from onlinerkhs.kernel import Kernel
from onlinerkhs.path_oracle import (PathCache, QuadratureGrid, discretize, drift,
                                    drift_bound_check, path_at, path_table, solve_path,
                                    windowed_path)
from onlinerkhs.rkhs import KernelExpansion, TargetFunction
from onlinerkhs.schedule import GainSchedule
from onlinerkhs.stream import MarginalMeasure, NoiseModel, StreamSpec, marginal_at

U = MarginalMeasure.uniform


def test_grid_nodes():
    g = QuadratureGrid(0.0, 1.0, 8)
    assert np.all(np.diff(g.nodes) > 0)
    assert g.n * g.width == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        QuadratureGrid(0.0, 1.0, 1)


def test_weights_sum_to_one(kern, shifting):
    for k in (0, 1, 2, 7, 100):
        op = discretize(kern, marginal_at(shifting, k), 64)
        assert op.weights.sum() == pytest.approx(1.0, abs=2 / 64)
        assert np.all(op.eigenvalues() >= -1e-9)


def test_constant_kernel_rank_one():
    c = 0.7
    k = Kernel.custom(lambda x, y: np.full(np.broadcast(x, y).shape, c), kappa=c)
    op = discretize(k, U(0.2, 0.9), 32)
    ev = op.eigenvalues()
    assert ev[0] == pytest.approx(c * op.weights.sum(), rel=1e-12)
    assert np.max(np.abs(ev[1:])) <= 1e-12


def test_narrow_density(kern):
    n = 64
    cell = 20
    lo, hi = cell / n, (cell + 1) / n
    op = discretize(kern, U(lo, hi), n)
    assert op.eigenvalues()[0] == pytest.approx(kern(0.5, 0.5) * op.weights[cell], rel=1e-12)


def test_top_eigenvalue_grid_convergence(kern):
    a = discretize(kern, U(0, 1), 64).eigenvalues()[0]
    b = discretize(kern, U(0, 1), 256).eigenvalues()[0]
    assert abs(a - b) <= 0.02 * b


def test_large_lambda_kills_path(kern, target):
    op = discretize(kern, U(0, 1), 64)
    f = solve_path(op, 1e6, target)
    assert rkhs.norm(f) <= target.declared_norm * kern.kappa / 1e6


def test_zero_target(kern):
    zero = TargetFunction.from_expansion(KernelExpansion.zero(kern))
    f = solve_path(discretize(kern, U(0, 1), 64), 0.5, zero)
    np.testing.assert_array_equal(f.coefficients, 0.0)


def test_first_path_norm(kern, sched, shifting):
    f = path_at(kern, shifting, sched, 0)
    assert rkhs.norm(f) <= 1.0
    assert rkhs.norm(f) == pytest.approx(0.3778460385670172, rel=1e-10)


def test_lambda_must_be_positive(kern, target):
    with pytest.raises(ParameterError):
        solve_path(discretize(kern, U(0, 1), 16), 0.0, target)


def test_path_bitwise_deterministic(kern, sched, shifting):
    a = path_at(kern, shifting, sched, 37)
    b = path_at(kern, shifting, sched, 37)
    np.testing.assert_array_equal(a.coefficients, b.coefficients)


def test_approx_error_decreasing_trend(kern, sched, shifting):
    cache = PathCache(kern, shifting, sched, 64)
    ks = np.array([10, 20, 50, 100, 200, 500, 1000])
    err = np.array([cache.approx_error(k) for k in ks])
    assert np.all(np.diff(err) < 0)


def test_resolvent_residual(kern, sched, shifting):
    for k in (0, 3, 50):
        op = discretize(kern, marginal_at(shifting, k), 64)
        lam = sched.reg(k)
        f = solve_path(op, lam, shifting.target)
        ft = shifting.target(op.grid.nodes)
        res = op.matrix @ f.coefficients + lam * f.coefficients - op.weights * ft
        assert np.max(np.abs(res)) <= 1e-10


def test_windowed_single_step(kern, sched, shifting):
    w = windowed_path(kern, shifting, sched, 9, 1)
    p = path_at(kern, shifting, sched, 10)
    assert rkhs.distance(w, p) <= 1e-12


def test_windowed_zero_target(kern, sched):
    zero = TargetFunction.from_expansion(KernelExpansion.zero(kern))
    spec = StreamSpec.shifting_uniform(zero)
    assert rkhs.norm(windowed_path(kern, spec, sched, 5, 2)) == 0.0


def test_windowed_error_decays(kern, sched, shifting):
    ks = [10, 20, 50, 100, 200, 500, 1000]
    err = [rkhs.distance(windowed_path(kern, shifting, sched, k, 2), shifting.target.expansion)
           for k in ks]
    assert np.all(np.diff(err) < 0)


def test_drift_zero_for_stationary_constant_lambda(kern, target):
    spec = StreamSpec.iid(target)
    s = _ConstantLambda(GainSchedule(), 0.3)
    assert drift(kern, spec, s, 12) == 0.0


def test_drift_positive_for_decaying_lambda(kern, sched, target):
    spec = StreamSpec.iid(target)
    assert drift(kern, spec, sched, 12) > 0


def test_drift_ratio_trending_down(kern, sched, shifting):
    rows = path_table(kern, shifting, sched, [10, 20, 50, 100, 200, 500, 1000])
    r = np.array([row.drift_over_ak_lk for row in rows])
    ks = np.array([row.k for row in rows])
    assert r[-1] < r[0]
    assert np.polyfit(np.log(ks), np.log(r), 1)[0] < 0


def test_drift_bound_stationary_constant_lambda(kern, target):
    spec = StreamSpec.iid(target)
    lhs, rhs = drift_bound_check(kern, spec, _ConstantLambda(GainSchedule(), 0.3), 4)
    assert lhs == 0.0 and rhs == 0.0


def test_drift_bound_stationary_decaying_lambda(kern, sched, target):
    spec = StreamSpec.iid(target)
    for k in (1, 10, 100):
        lhs, rhs = drift_bound_check(kern, spec, sched, k)
        cache = PathCache(kern, spec, sched)
        lam, lam1 = sched.reg(k), sched.reg(k + 1)
        assert rhs == pytest.approx((lam - lam1) / lam * cache.approx_error(k), rel=1e-12)
        assert lhs <= rhs


def test_drift_bound_odd_k(kern, sched, shifting):
    lhs, rhs = drift_bound_check(kern, shifting, sched, 11, n=128)
    assert lhs <= 1.05 * rhs


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-6, 1e3), st.integers(0, 2000))
def test_norm_domination(lam, k):
    kern = Kernel.gaussian()
    tgt = TargetFunction.kernel_section(kern)
    spec = StreamSpec.shifting_uniform(tgt)
    f = solve_path(discretize(kern, marginal_at(spec, k), 64), lam, tgt)
    assert rkhs.norm(f) <= tgt.declared_norm + 1e-8


def test_bias_monotone_in_lambda(kern, shifting):
    op = discretize(kern, marginal_at(shifting, 3), 64)
    ladder = np.geomspace(1e-4, 1e2, 30)
    err = [rkhs.distance(solve_path(op, lam, shifting.target), shifting.target.expansion)
           for lam in ladder]
    assert np.all(np.diff(err) >= -1e-12)


def _self_diffs(kern, sched, spec, k, n):
    p = {m: path_at(kern, spec, sched, k, m) for m in (n, 2 * n, 4 * n)}
    return rkhs.distance(p[n], p[2 * n]), rkhs.distance(p[2 * n], p[4 * n])


@pytest.mark.parametrize("k", [2, 5, 100])
def test_grid_self_convergence(kern, sched, shifting, k):
    d1, d2 = _self_diffs(kern, sched, shifting, k, 64)
    assert d1 <= 3 * d2


@pytest.mark.xfail(strict=True, reason="second-order quadrature: differences shrink 4x per "
                                       "doubling, so d(n,2n) > 3 d(2n,4n)")
@pytest.mark.parametrize("k", [0, 1000])
def test_grid_self_convergence_smooth_cases(kern, sched, shifting, k):
    d1, d2 = _self_diffs(kern, sched, shifting, k, 64)
    assert d1 <= 3 * d2


@pytest.mark.parametrize("k", [0, 1000])
def test_grid_convergence_second_order(kern, sched, shifting, k):
    d1, d2 = _self_diffs(kern, sched, shifting, k, 64)
    assert 3.5 <= d1 / d2 <= 4.5
