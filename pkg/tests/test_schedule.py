import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from onlinerkhs import schedule as S
from onlinerkhs.errors import ScheduleError
from onlinerkhs.schedule import GainSchedule


def test_gain_values(sched):
    assert S.gain(sched, 0) == 1.0
    assert S.gain(sched, 9) == pytest.approx(0.19952623149688797, rel=1e-15)


def test_reg_values(sched):
    assert S.reg(sched, 0) == 1.0
    assert S.reg(sched, 999) == pytest.approx(1000 ** -0.15, rel=1e-15)


def test_validate(sched):
    assert S.validate(0.7, 0.15) == sched
    assert S.validate(0.6, 0.25) == ["3*tau2 < tau1"]
    assert "tau1 + tau2 < 1" in S.validate(0.9, 0.2)


@pytest.mark.parametrize("t1,t2", [(0.5, 0.15), (1.0, 0.1000001), (0.7, 0.1), (0.7, 0.5)])
def test_boundaries_rejected(t1, t2):
    assert isinstance(S.validate(t1, t2), list)
    with pytest.raises(ScheduleError):
        GainSchedule(t1, t2)


def test_empty_product(sched):
    assert S.contraction_product(sched, 5, 4) == 1.0


@pytest.mark.parametrize("stop", [0, 1, 50, 10_000])
def test_product_from_zero(sched, stop):
    assert S.contraction_product(sched, 0, stop) == 0.0


def test_product_ratio_bounded(sched):
    ks = np.arange(10, 10_001)
    logp = np.cumsum(np.log1p(-(np.arange(1, 10_001) + 1.0) ** -0.85))
    ratio = np.exp(logp[ks - 1]) / (ks + 1.0) ** -0.85
    assert np.max(ratio) <= 30
    for k in (10, 100, 1000, 10_000):
        assert S.contraction_product(sched, 1, k) == pytest.approx(math.exp(logp[k - 1]), rel=1e-10)


def test_product_long_range_no_underflow(sched):
    lp = S.log_contraction_product(sched, 1, 10 ** 7)
    j = np.arange(1, 10 ** 7 + 1, dtype=float)
    assert lp == pytest.approx(np.sum(np.log1p(-(j + 1.0) ** -0.85)), rel=1e-10)
    assert 0.0 < S.contraction_product(sched, 1, 10 ** 7) < 1e-29


def test_products_exact_and_decreasing(sched):
    k = np.arange(0, 2000)
    p = sched.product(k)
    np.testing.assert_array_equal(p, (k + 1.0) ** -0.85)
    assert np.all(np.diff(p) < 0)


def test_divergent_sum(sched):
    k = np.arange(0, 10 ** 6 + 1)
    assert np.sum(sched.product(k)) > 10


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 50_000))
def test_log_product_below_negative_sum(k):
    s = GainSchedule()
    j = np.arange(1, k + 1)
    assert S.log_contraction_product(s, 1, k) <= -np.sum(s.product(j)) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 1.0), st.floats(0.1, 0.5))
def test_validate_agrees_with_inequalities(t1, t2):
    ok = 0.1 < t2 < 0.5 < t1 < 1 and t1 + t2 < 1 and 3 * t2 < t1
    assert isinstance(S.validate(t1, t2), GainSchedule) == ok
