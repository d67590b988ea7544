import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gmcsim.criteria import (
    ThresholdInput,
    check_mcond,
    critical_gamma,
    gamma_star_polynomial,
    m_value,
    n_value,
    p_star,
    q_star,
    s_exponent,
    threshold_report,
)
from gmcsim.errors import GmcError

# frozen closed forms of the two critical values
GSTAR_121 = math.sqrt(858 - 132 * math.sqrt(34)) / 33
GSTAR_111 = math.sqrt(238 - 136 * math.sqrt(2)) / 17


def test_s_exponent_examples():
    assert s_exponent(1.0, 0.5, 1.0) == 0.0
    assert s_exponent(1.0, 0.5, 2.0) == pytest.approx(0.75, abs=1e-15)
    assert s_exponent(2.0, 0.3, 1.5) == pytest.approx((2 - 0.045 * 1.5) * 0.5, abs=1e-15)


def test_s_exponent_rejects_small_p():
    with pytest.raises(GmcError) as e:
        s_exponent(1, 0.5, 0.99)
    assert e.value.code == "invalid-p"


def test_s_branches_agree_at_two():
    for a, g in [(1, 0.5), (2, 0.3), (0.7, 0.9)]:
        left = (a - g * g * 2 / 2) * (2 - 1)
        right = (a - g * g) * 2 / 2
        assert left == right == s_exponent(a, g, 2.0)


@pytest.mark.parametrize("a,g", [(1, 0.5), (2, 1.0), (1, 0.25), (2, 0.3), (0.5, 0.7)])
def test_s_maximum_at_p_star(a, g):
    ps = np.linspace(1, 3 * p_star(a, g), 400_001)
    vals = np.array([s_exponent(a, g, p) for p in ps[::50]])
    fine = ps[np.argmax(vals) * 50 - 100: np.argmax(vals) * 50 + 100]
    best = max(s_exponent(a, g, p) for p in fine)
    assert best == pytest.approx(m_value(a, g), abs=1e-6)
    assert s_exponent(a, g, p_star(a, g)) == pytest.approx(m_value(a, g), abs=1e-12)


def test_m_value_examples():
    assert m_value(2, 1) == pytest.approx(1.125)
    g = 0.8
    assert m_value(g * g / 2, g) == pytest.approx(0.0, abs=1e-15)
    with pytest.raises(GmcError) as e:
        m_value(1, 0)
    assert e.value.code == "gamma-zero"


def test_n_value_small_gamma_limit():
    assert n_value(1, 2, 1e-8) == pytest.approx(2, abs=1e-6)


def test_n_equals_m_at_critical():
    assert n_value(1, 2, GSTAR_121) == pytest.approx(m_value(1, GSTAR_121), abs=1e-6)


def test_n_monotone():
    g = np.linspace(1e-3, 0.999, 1000)
    v = np.array([n_value(1, 2, x) for x in g])
    assert np.all(np.diff(v) > 0)


def test_n_value_negative_radicand():
    # gamma > 1 with lambda large relative to k makes the radicand negative
    with pytest.raises(GmcError) as e:
        n_value(10, 1, 1.9)
    assert e.value.code == "negative-radicand"


def test_p_star_q_star():
    assert p_star(1, 1) == 1.5
    for g in (0.1, 0.25, 0.5, 0.9):
        qs = q_star(1, 2, g)
        f = lambda q: (g * g * q * q + (1 - g * g) * q) / (q - 4)  # noqa: E731
        grid = np.linspace(4 + 1e-4, 40 * qs, 2_000_001)
        i = np.argmin(f(grid))
        assert grid[i] == pytest.approx(qs, rel=1e-3)
        assert f(qs) <= f(grid[i]) + 1e-6


@given(st.floats(0.05, 3), st.floats(0.05, 1.9), st.floats(0.1, 3), st.integers(1, 8))
@settings(max_examples=200, deadline=None)
def test_optimisers_exceed_one(a, g, lam, k):
    if a > g * g / 2:
        assert p_star(a, g) > 1
    if k > lam / 2 and 4 * k * k + 2 * k * (1 / g**2 - 1) * lam >= 0:
        assert q_star(lam, k, g) > 1


def test_mcond_examples():
    assert check_mcond(ThresholdInput(1, 1, 0.5, 2, 0.25)).holds
    assert not check_mcond(ThresholdInput(1, 1, 0.5, 2, 0.30)).holds
    margins = [check_mcond(ThresholdInput(1, 1, 0.5, 2, g)).margin for g in (1e-1, 1e-2, 1e-3)]
    assert margins[0] < margins[1] < margins[2] and margins[2] > 1e4


def test_mcond_monotone_around_critical():
    gs = critical_gamma(1, 2, 1)
    for g in np.arange(1e-3, 1.2, 1e-3):
        inp = ThresholdInput(1, 1, 0.5, 2, float(g))
        assert check_mcond(inp).holds == (g < gs)


def test_critical_gamma_values():
    assert critical_gamma(1, 2, 1) == pytest.approx(0.28477489, abs=1e-6)
    assert critical_gamma(1, 2, 1) == pytest.approx(GSTAR_121, abs=1e-9)
    assert critical_gamma(1, 1, 1) == pytest.approx(0.3975137, abs=1e-6)
    assert critical_gamma(1, 1, 1) == pytest.approx(GSTAR_111, abs=1e-9)
    assert abs(gamma_star_polynomial(critical_gamma(1, 2, 1))) < 1e-7


def test_critical_gamma_decreases_in_k():
    vals = [critical_gamma(1, k, 1) for k in range(1, 9)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


def test_critical_gamma_errors():
    with pytest.raises(GmcError):
        critical_gamma(1, 0.4, 1)


def test_threshold_input_validation():
    with pytest.raises(GmcError) as e:
        ThresholdInput(1, 1, 0.5, 2, 0.0)
    assert e.value.code == "gamma-zero"
    with pytest.raises(GmcError):
        ThresholdInput(1, 0, 0.5, 2, 0.2)
    with pytest.raises(GmcError):
        ThresholdInput(-1, 1, 0.5, 2, 0.2)


def test_threshold_report_keys():
    rep = threshold_report(ThresholdInput(1, 1, 0.5, 2, 0.25))
    assert rep["mcond"] is True and rep["lambda"] == 1.0
    assert rep["critical_gamma"] == pytest.approx(GSTAR_121, abs=1e-9)
    assert rep["s_at_p_star"] == pytest.approx(rep["m"])
