import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onlinerkhs.errors import ParameterError
from onlinerkhs.stream import (MarginalMeasure, NoiseModel, StreamSpec, average_measure,
                               dominates, dual_norm_drift, marginal_at, sample, sample_path,
                               shifting_interval)

U = MarginalMeasure.uniform


def test_marginal_k0(shifting):
    m = marginal_at(shifting, 0)
    np.testing.assert_array_equal(m.breakpoints, [0, 1])
    np.testing.assert_array_equal(m.density, [1])


def test_marginal_k1(shifting):
    m = marginal_at(shifting, 1)
    np.testing.assert_array_equal(m.breakpoints, [0, 0.5, 1])
    np.testing.assert_array_equal(m.density, [2, 0])


def test_marginal_k2(shifting):
    m = marginal_at(shifting, 2)
    np.testing.assert_allclose(m.breakpoints, [0, 1 / 3, 1], rtol=0, atol=1e-16)
    np.testing.assert_array_equal(m.density, [0, 1.5])


def test_interval_formula_symbolic():
    for k in range(1, 10_001):
        lo = Fraction(1 + (-1) ** k, 2 * (k + 1))
        hi = lo + 1 - Fraction(1, 1 + k)
        flo, fhi = shifting_interval(k)
        assert flo == pytest.approx(float(lo), abs=1e-15)
        assert fhi == pytest.approx(float(hi), abs=1e-15)
        # density (k+1)/k is exactly 1/|I_k|
        assert 1 / (hi - lo) == Fraction(k + 1, k)


def test_unit_mass(shifting):
    for k in list(range(0, 200)) + [999, 10_000]:
        assert marginal_at(shifting, k).mass() == pytest.approx(1.0, abs=1e-12)


def test_two_step_sum_floor(shifting):
    for k in range(0, 1001):
        s = average_measure([marginal_at(shifting, k), marginal_at(shifting, k + 1)])
        assert dominates(s, 0.5)


@pytest.mark.parametrize("k", range(1, 100, 2))
def test_drift_closed_form_odd(shifting, k):
    d = dual_norm_drift(marginal_at(shifting, k), marginal_at(shifting, k + 1))
    assert d == pytest.approx(2 * (k + 2) / (k + 1) ** 2, abs=1e-10)


@pytest.mark.parametrize("k", range(2, 100, 2))
def test_drift_even_by_hand(shifting, k):
    # I_k = [1/(k+1), 1], I_{k+1} = [0, (k+1)/(k+2)]
    a, b = 1 / (k + 1), (k + 1) / (k + 2)
    m1, m2 = (k + 1) / k, (k + 2) / (k + 1)
    expect = a * m2 + (b - a) * abs(m1 - m2) + (1 - b) * m1
    d = dual_norm_drift(marginal_at(shifting, k), marginal_at(shifting, k + 1))
    assert d == pytest.approx(expect, abs=1e-12)


def test_drift_examples(shifting):
    m = marginal_at(shifting, 3)
    assert dual_norm_drift(m, m) == 0.0
    assert dual_norm_drift(marginal_at(shifting, 1), marginal_at(shifting, 2)) == pytest.approx(1.5)
    assert dual_norm_drift(U(0, 1), U(0, 0.5)) == pytest.approx(1.0)


def test_average_examples(shifting):
    m = marginal_at(shifting, 5)
    one = average_measure([m])
    assert dual_norm_drift(one, m) == 0.0
    halves = average_measure([U(0, 0.5), U(0.5, 1)])
    assert dual_norm_drift(halves, U(0, 1)) == 0.0
    s = average_measure([marginal_at(shifting, 1), marginal_at(shifting, 2)])
    assert dominates(s, 0.5)
    with pytest.raises(ParameterError):
        average_measure([])


def test_dominates_examples():
    assert dominates(U(0, 1), 1.0)
    assert not dominates(U(0, 0.5), 1e-9)
    with pytest.raises(ParameterError):
        dominates(U(0, 1), 0.0)


def test_measure_validation():
    with pytest.raises(ParameterError):
        MarginalMeasure([0, 1], [1, 2])
    with pytest.raises(ParameterError):
        MarginalMeasure([0, 0.5, 1], [-1, 3])
    with pytest.raises(ParameterError):
        U(0.5, 1.5)


def test_density_right_open():
    m = U(0, 0.5)
    np.testing.assert_array_equal(m.density_at([0.0, 0.25, 0.5, 0.75, 1.0]), [2, 2, 0, 0, 0])


def test_zero_noise_outputs(shifting_clean):
    d = sample_path(shifting_clean, 500)
    np.testing.assert_array_equal(d.y, np.exp(-d.x ** 2))
    np.testing.assert_array_equal(d.v, 0)


def test_sample_deterministic(target):
    spec = StreamSpec.shifting_uniform(target, seed=42)
    assert sample(spec, 17) == sample(spec, 17)


def test_sample_matches_path(shifting):
    d = sample_path(shifting, 50, run_id=3)
    for k in (0, 1, 7, 49):
        x, y = sample(shifting, k, run_id=3)
        assert (x, y) == (d.x[k], d.y[k])


def test_path_segment_matches(shifting):
    full = sample_path(shifting, 100, run_id=1)
    tail = sample_path(shifting, 40, run_id=1, start=60)
    np.testing.assert_array_equal(full.x[60:], tail.x)


def test_inputs_follow_marginal(shifting):
    d = sample_path(shifting, 2000)
    for k in range(2000):
        lo, hi = shifting_interval(k)
        assert lo <= d.x[k] <= hi


def test_noise_moments(target):
    spec = StreamSpec.iid(target, noise=NoiseModel("gaussian", 0.1), seed=7)
    v = sample_path(spec, 100_000).v
    assert abs(v.mean()) <= 0.01
    assert abs(v.var() - 0.1) <= 0.01


def test_noise_independent_of_inputs(target):
    spec = StreamSpec.iid(target, noise=NoiseModel("gaussian", 0.1), seed=7)
    d = sample_path(spec, 50_000)
    assert abs(np.corrcoef(d.x, d.v)[0, 1]) < 0.02


def test_run_ids_distinct(shifting):
    x0 = [sample(shifting, 0, run_id=r)[0] for r in range(1000)]
    assert len(set(x0)) == 1000


def test_noise_beta():
    assert NoiseModel("gaussian", 0.1).beta == 0.1
    assert NoiseModel.zero().beta == 0.0


def test_scripted_cycles(target):
    spec = StreamSpec.scripted(target, [U(0, 0.5), U(0.5, 1)], NoiseModel.zero())
    assert dual_norm_drift(marginal_at(spec, 3), U(0.5, 1)) == 0.0
    d = sample_path(spec, 200)
    assert np.all(d.x[0::2] <= 0.5) and np.all(d.x[1::2] >= 0.5)
    with pytest.raises(ParameterError):
        StreamSpec.scripted(target, [])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=6), st.floats(0, 0.999999))
def test_ppf_lands_in_support(dens, u):
    bp = np.linspace(0, 1, len(dens) + 1)
    w = np.array(dens) / np.dot(np.diff(bp), dens)
    m = MarginalMeasure(bp, w)
    x = m.ppf(u)
    assert 0 <= x <= 1
    assert m.density_at(x) > 0 or x == 1.0
