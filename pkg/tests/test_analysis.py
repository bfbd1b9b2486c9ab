import numpy as np
import pytest
from hypothesis import given, strategies as st

from taxislab.analysis import (
    FitError,
    check_monotone_decay,
    check_ode_comparison,
    fit_algebraic,
    fit_exponential,
    fits_to_csv,
    reciprocal_r2,
    select_rate_model,
    summary_block,
    tail_window,
)
from taxislab.model import RegimeTag


def test_exponential_recovery():
    t = np.linspace(0, 10, 50)
    fit = fit_exponential(t, 3 * np.exp(-0.7 * t))
    assert fit.K2 == pytest.approx(0.7, abs=1e-10)
    assert fit.K1 == pytest.approx(3.0, rel=1e-10)
    assert fit.residual < 1e-9 and fit.accepted


def test_algebraic_recovery():
    t = np.linspace(0, 50, 60)
    fit = fit_algebraic(t, 1 / (2 + 0.3 * t))
    assert fit.K2 == pytest.approx(0.3, abs=1e-10)
    assert fit.K1 == pytest.approx(0.5, rel=1e-10)
    assert fit.residual < 1e-9


def test_cross_fits_discriminate():
    t = np.linspace(0, 100, 200)
    d = 1 / (1 + t)
    assert fit_exponential(t, d).residual >= 10 * fit_algebraic(t, d).residual
    d = np.exp(-0.5 * t)
    assert fit_algebraic(t, d).residual >= 10 * fit_exponential(t, d).residual


def test_constant_series_rejected():
    fit = fit_exponential(np.arange(20.0), np.full(20, 2.0))
    assert fit.K2 == 0 and not fit.accepted


def test_bad_series_rejected():
    with pytest.raises(FitError):
        fit_algebraic([0.0, 1.0], [1.0, 0.5])
    with pytest.raises(FitError):
        fit_exponential(np.arange(12.0), np.r_[np.ones(11), 0.0])


def test_selection_and_mismatch():
    t = np.linspace(0, 20, 100)
    d = np.exp(-t)
    sel = select_rate_model(t, d, RegimeTag.DEGENERATE_EXCLUSION)
    assert sel.winner == "exponential" and not sel.matches_prediction
    sel = select_rate_model(t, d, RegimeTag.COEXISTENCE)
    assert sel.matches_prediction
    assert sel.exponential.samples == 80
    assert "MISMATCH" not in summary_block(sel)


@given(st.floats(1e-6, 1e6), st.booleans())
def test_selection_scale_invariant(c, algebraic):
    t = np.linspace(0, 30, 80)
    d = 1 / (1 + 0.4 * t) if algebraic else np.exp(-0.3 * t) * (1 + 0.01 * np.sin(t))
    a = select_rate_model(t, d, RegimeTag.COEXISTENCE)
    b = select_rate_model(t, c * d, RegimeTag.COEXISTENCE)
    assert a.winner == b.winner
    assert b.exponential.K2 == pytest.approx(a.exponential.K2, rel=1e-8, abs=1e-12)
    assert b.algebraic.K2 == pytest.approx(a.algebraic.K2 / c, rel=1e-8)


def test_tail_window():
    assert tail_window(10, 0.8) == slice(2, 10)
    with pytest.raises(ValueError):
        tail_window(10, 0.0)


def test_reciprocal_r2():
    t = np.linspace(0, 100, 50)
    assert reciprocal_r2(t, 1 / (1 + 0.2 * t)) == pytest.approx(1.0, abs=1e-12)
    assert reciprocal_r2(t, np.exp(-0.1 * t)) < 0.99


def test_monotone_pass_and_located_failure():
    t = np.linspace(0, 5, 1001)
    y = np.exp(-t)
    assert check_monotone_decay(y).passed
    bumped = y.copy()
    bumped[500] += 1e-3 * y[0]
    rep = check_monotone_decay(bumped, 1e-10)
    assert not rep.passed and rep.first_violation == 500 and rep.violations == (500,)


def test_ode_comparison_exact_exponential():
    t = np.linspace(0, 4, 41)
    cmp = check_ode_comparison(t, np.exp(-t))
    assert cmp.K2 == pytest.approx(0.5, rel=1e-12)
    # central differences of e^{-t} overshoot by O(h^2)
    assert abs(cmp.max_slack) < 1e-2 and cmp.holds(1e-2)


def test_fits_csv():
    t = np.linspace(0, 10, 50)
    text = fits_to_csv([fit_exponential(t, np.exp(-t))], ["config_hash=abc"])
    assert text.splitlines()[1] == "model,K1,K2,residual,t_start,t_end,samples"
    assert text.splitlines()[2].startswith("exponential,")
