import numpy as np
import pytest

from onlinerkhs.errors import ParameterError
from onlinerkhs.excitation import (FLOOR_TOLERANCE, eigen_floor, measure_pe_check,
                                   window_spectra, windowed_operator)
from onlinerkhs.path_oracle import discretize
from onlinerkhs.stream import MarginalMeasure, StreamSpec, marginal_at

U = MarginalMeasure.uniform


def test_single_window_is_discretize(kern, shifting):
    w = windowed_operator(kern, shifting, 4, 1)
    d = discretize(kern, marginal_at(shifting, 5), 64)
    np.testing.assert_array_equal(w.weights, d.weights)


def test_two_step_weight_density(kern, shifting):
    for k in range(0, 200):
        w = windowed_operator(kern, shifting, k, 2)
        assert np.all(w.weights / w.grid.width >= 1.0 - 1e-12)


def test_window_dominates_scaled_uniform(kern, shifting):
    ref = discretize(kern, U(0, 1), 64).eigenvalues()[:10]
    for k in (0, 5, 50, 199):
        ev = windowed_operator(kern, shifting, k, 2).eigenvalues()[:10]
        assert np.all(ev >= ref - 1e-9)


def test_iid_infima_constant(kern, target):
    spec = StreamSpec.iid(target)
    rows = list(window_spectra(kern, spec, 3, 5, range(0, 20)))
    for _, v in rows[1:]:
        np.testing.assert_array_equal(v, rows[0][1])


def test_half_support_stays_positive(kern, target):
    spec = StreamSpec.iid(target, U(0, 0.5))
    rep = eigen_floor(kern, spec, 2, 6, (0, 5))
    assert np.all(rep.per_j_infimum > 0)


def test_shifting_floor_top_modes(kern, shifting):
    rep = eigen_floor(kern, shifting, 2, 10, (0, 200), n=64)
    assert np.all(np.diff(rep.per_j_infimum) <= 0)
    assert np.all(np.isfinite(rep.per_j_infimum))
    # the first nine modes clear the floor comfortably
    assert np.all(rep.per_j_infimum[:9] > FLOOR_TOLERANCE)


def test_jmax_above_grid(kern, shifting):
    with pytest.raises(ParameterError):
        eigen_floor(kern, shifting, 2, 65, (0, 1), n=64)


def test_measure_check_examples(shifting, target):
    assert measure_pe_check(shifting, 2, 0.5, (0, 1000)).verdict
    one = measure_pe_check(shifting, 1, 1e-6, (0, 50))
    assert not one.verdict and one.first_failing_k == 0
    assert measure_pe_check(StreamSpec.iid(target), 1, 1.0, (0, 10)).verdict


def test_loewner_monotone_window(kern, target):
    rng = np.random.default_rng(4)
    for _ in range(20):
        cuts = np.sort(rng.uniform(0, 1, (4, 2)), axis=1)
        ms = [U(a, b) for a, b in cuts if b - a > 1e-3]
        spec = StreamSpec.scripted(target, ms)
        h = len(ms)
        small = windowed_operator(kern, spec, -1, h - 1).eigenvalues()[:10] if h > 1 else np.zeros(10)
        big = windowed_operator(kern, spec, -1, h).eigenvalues()[:10]
        assert np.all(big >= small - 1e-12)


def test_domination_implies_eigen_bound(kern, shifting):
    gamma, h = 0.5, 2
    ref = h * gamma * discretize(kern, U(0, 1), 64).eigenvalues()
    for k in range(0, 60):
        if measure_pe_check(shifting, h, gamma, (k, k)).verdict:
            ev = windowed_operator(kern, shifting, k, h).eigenvalues()
            assert np.all(ev >= ref - 1e-9)


def test_report_failing_modes(kern, shifting):
    rep = eigen_floor(kern, shifting, 2, 3, (0, 3), floor_tolerance=0.05)
    assert rep.failing_modes().tolist() == [3]
    assert not rep.excited
