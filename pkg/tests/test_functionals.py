import numpy as np
import pytest
from hypothesis import given, strategies as st

from taxislab.functionals import (
    RECORD_COLUMNS,
    WeightSet,
    cancellation_residuals,
    composite,
    differential_inequality_residuals,
    mass_ode_residual,
    phi,
    record,
    records_from_csv,
    records_to_csv,
    weights_for_regime,
)
from taxislab.grid import Grid
from taxislab.model import ParameterError, Parameters, SteadyState, classify_regime, steady_state
from taxislab.oracles import random_parameters
from taxislab.solver import SimState, StepControl, TimeSeries, perturb_steady_state, simulate


def series_of(states, s, w):
    return TimeSeries([record(st_, s, w) for st_ in states], w, 0.1)


def test_coexistence_weights(coexistence):
    w = weights_for_regime(coexistence, steady_state(coexistence))
    np.testing.assert_allclose(w.six, [1 / 6, 4 / 3, 1 / 2, 8 / 3, 1 / 3, 4 / 3], rtol=1e-14)


def test_h1_weights_are_unit(h1):
    w = weights_for_regime(h1, steady_state(h1))
    assert w.six == (1.0,) * 6


def test_h1_weights_scale_with_steady_state():
    p1, p2 = Parameters(m1=1.0, m2=2.0, chi1=0.5), Parameters(m1=3.0, m2=6.0, chi1=0.5)
    w1 = weights_for_regime(p1, steady_state(p1))
    w2 = weights_for_regime(p2, steady_state(p2))
    np.testing.assert_allclose(np.array(w2.six), 3 * np.array(w1.six), rtol=1e-15)


def test_degenerate_mass_weight(degenerate):
    w = weights_for_regime(degenerate, steady_state(degenerate))
    assert w.X2 == 2.0
    assert w.A1 == 1.0 and w.C1 == 1.0 and not w.b_weights_used


def test_strict_weights_use_half_min_rate(strict):
    s = steady_state(strict)
    w = weights_for_regime(strict, s, poincare_constant=0.1)
    # -fu = 1, -gv = 0.3
    assert w.K == pytest.approx(0.15)
    assert w.A2 == pytest.approx(max(1 / 0.15**2, 1.0))
    assert w.C2 == pytest.approx(16 * max(0.01, 1.0) * 4)


def test_inconsistent_steady_state_rejected(strict, coexistence):
    with pytest.raises(ParameterError):
        weights_for_regime(strict, SteadyState(1.0, 0.5))
    with pytest.raises(ParameterError):
        weights_for_regime(coexistence, SteadyState(1.0, 0.0), classify_regime(coexistence))


def test_cancellation_h1_first_and_last(h1):
    s = steady_state(h1)
    res = cancellation_residuals(weights_for_regime(h1, s), h1, s)
    assert res[0] == 0.0 and res[3] == 0.0


def test_cancellation_linear_in_a1_perturbation(coexistence):
    s = steady_state(coexistence)
    w = weights_for_regime(coexistence, s)
    delta = 1e-3
    bumped = WeightSet(w.A1 + delta, *w.six[1:])
    assert cancellation_residuals(bumped, coexistence, s)[0] == pytest.approx(
        delta * coexistence.a1 * s.u_star, rel=1e-9)


@given(st.integers(0, 2**32 - 1))
def test_cancellation_vanishes_for_coexistence(seed):
    p = random_parameters(np.random.default_rng(seed), "coexistence")
    s = steady_state(p)
    w = weights_for_regime(p, s)
    assert all(x > 0 for x in w.six)
    scale = max(w.six) * max(p.a1, p.a2, p.chi1, p.chi2) * max(s.u_star, s.v_star)
    assert max(abs(r) for r in cancellation_residuals(w, p, s)) <= 1e-12 * scale


def test_record_at_steady_state(coexistence, grid64):
    s = steady_state(coexistence)
    rec = record(SimState.from_fields(grid64, grid64.constant(s.u_star), grid64.constant(s.v_star), 0.0, s),
                 s, WeightSet.unit())
    assert rec.e_u0 == rec.e_v0 == rec.e_u1 == rec.e_v1 == rec.e_u2 == rec.e_v2 == rec.y == 0.0
    assert rec.mass_u == pytest.approx(s.u_star) and rec.mass_v == pytest.approx(s.v_star)


def test_record_cosine_mode_energies(coexistence):
    g = Grid.uniform(1024)
    s = steady_state(coexistence)
    eps = 1e-3
    st_ = SimState(g, eps * g.cosine_mode(1), g.constant(0.0), 0.0, s)
    rec = record(st_, s, WeightSet.unit())
    assert rec.e_u0 == pytest.approx(eps**2 / 2, rel=1e-5)
    assert rec.e_u1 == pytest.approx(eps**2 * np.pi**2 / 2, rel=1e-5)
    assert rec.e_u2 == pytest.approx(eps**2 * np.pi**4 / 2, rel=1e-5)
    assert rec.y == pytest.approx(eps**2 / 4 * (1 + np.pi**2 + np.pi**4), rel=1e-5)


def test_y_equals_phi_of_raw_fields(coexistence, grid64, rng):
    s = steady_state(coexistence)
    w = weights_for_regime(coexistence, s)
    du, dv = 1e-2 * rng.standard_normal(64), 1e-2 * rng.standard_normal(64)
    rec = record(SimState(grid64, du, dv, 0.0, s), s, w)
    u, v = s.u_star + du, s.v_star + dv
    direct = phi(grid64, u - s.u_star, w.A1, w.B1, w.C1) + phi(grid64, v - s.v_star, w.A2, w.B2, w.C2)
    assert rec.y == pytest.approx(direct, rel=1e-12)
    assert rec.y == pytest.approx(composite(w, rec.e_u0, rec.e_v0, rec.e_u1, rec.e_v1, rec.e_u2, rec.e_v2))


def test_record_symmetric_under_axis_swap(coexistence, rng):
    s = steady_state(coexistence)
    g = Grid((10, 10), (1.0, 1.0))
    a = rng.standard_normal((10, 10)) * 1e-2
    du = a + a.T
    r1 = record(SimState(g, du, du, 0.0, s), s, WeightSet.unit())
    r2 = record(SimState(g, du.T, du.T, 0.0, s), s, WeightSet.unit())
    assert r1.y == pytest.approx(r2.y, rel=1e-13)


def test_records_csv_round_trip(coexistence, grid64, rng):
    s = steady_state(coexistence)
    recs = [record(SimState(grid64, rng.standard_normal(64), rng.standard_normal(64), t, s), s,
                   WeightSet.unit()) for t in (0.0, 0.5)]
    text = records_to_csv(recs, ["config_hash=abc"])
    assert text.splitlines()[1] == ",".join(RECORD_COLUMNS)
    assert records_from_csv(text) == recs


def test_mass_ode_u_logistic_second_order():
    p = Parameters(lambda1=0.0, lambda2=1.0, mu1=1.0, mu2=1.0, a1=1.0, a2=0.5)
    s = steady_state(p)
    g = Grid.uniform(8)
    norms = []
    for dt in (0.1, 0.05):
        t = np.arange(0.0, 2.0 + dt / 2, dt)
        u = 1.0 / (1.0 / 2.0 + p.mu1 * t)
        states = [SimState.from_fields(g, g.constant(ui), g.constant(0.0), ti, s) for ti, ui in zip(t, u)]
        tt, res = mass_ode_residual(series_of(states, s, WeightSet.unit()), p, s, "u")
        # compare at shared times, not at the first interior sample
        keep = [int(np.argmin(np.abs(tt - x))) for x in (0.5, 1.0, 1.5)]
        norms.append(np.abs(res[keep]))
    np.testing.assert_allclose(norms[0] / norms[1], 4.0, rtol=0.05)


def test_mass_ode_frozen_steady_state(degenerate):
    s = steady_state(degenerate)
    g = Grid.uniform(8)
    states = [SimState.from_fields(g, g.constant(s.u_star), g.constant(0.0), 0.1 * k, s) for k in range(6)]
    _, res = mass_ode_residual(series_of(states, s, WeightSet.unit()), degenerate, s, "v")
    assert np.all(res == 0.0)


def test_mass_ode_rejects_inapplicable(coexistence):
    s = steady_state(coexistence)
    g = Grid.uniform(8)
    states = [SimState(g, g.constant(0.0), g.constant(0.0), 0.1 * k, s) for k in range(4)]
    ser = series_of(states, s, WeightSet.unit())
    with pytest.raises(ValueError):
        mass_ode_residual(ser, coexistence, s, "v")
    with pytest.raises(ValueError):
        mass_ode_residual(ser, coexistence, s, "u")


def test_inequality_slack_zero_at_steady_state(coexistence, grid64):
    s = steady_state(coexistence)
    w = weights_for_regime(coexistence, s)
    states = [SimState(grid64, grid64.constant(0.0), grid64.constant(0.0), 0.1 * k, s) for k in range(5)]
    led = differential_inequality_residuals(series_of(states, s, w), coexistence, s, w)
    for name, vals in led.slack.items():
        assert np.all(vals[np.isfinite(vals)] == 0.0), name


def test_inequality_flags_growing_y(coexistence, grid64):
    s = steady_state(coexistence)
    w = weights_for_regime(coexistence, s)
    base = grid64.cosine_mode(1, 1e-3)
    states = [SimState(grid64, (1 + 0.1 * k) * base, 0.5 * (1 + 0.1 * k) * base, 0.1 * k, s) for k in range(6)]
    led = differential_inequality_residuals(series_of(states, s, w), coexistence, s, w)
    assert led.worst("y_combined") > 0


def test_inequality_outside_tube_not_applicable(coexistence, grid64):
    s = steady_state(coexistence)
    w = weights_for_regime(coexistence, s)
    states = [SimState(grid64, grid64.cosine_mode(1, 0.5), grid64.constant(0.0), 0.1 * k, s) for k in range(4)]
    led = differential_inequality_residuals(series_of(states, s, w), coexistence, s, w, eta=0.1)
    assert not led.applicable.any()
    assert np.all(np.isnan(led.slack["y_combined"]))


def test_combined_slack_shrinks_with_dt(coexistence):
    s = steady_state(coexistence)
    w = weights_for_regime(coexistence, s)
    g = Grid.uniform(64)
    worst = []
    for dt in (0.02, 0.01):
        init = perturb_steady_state(s, g, 1e-2)
        ser = simulate(init, coexistence, StepControl(dt, "strang_imex"), 2.0, 0.04, weights=w)
        led = differential_inequality_residuals(ser, coexistence, s, w)
        rel = led.relative("y_combined")
        worst.append(np.nanmax(rel))
    # ≤ time-discretization error, decreasing with dt
    assert worst[1] < worst[0] or worst[1] <= 1e-8
