import numpy as np
import pytest
from hypothesis import given, strategies as st

from taxislab.model import (
    ParameterError,
    Parameters,
    RegimeTag,
    classify_regime,
    discriminant,
    jacobian_at_steady_state,
    reaction,
    steady_state,
)
from taxislab.oracles import newton_steady_state, random_parameters

pos = st.floats(0.1, 3.0)


def test_all_zero_kinetics_is_h1():
    assert classify_regime(Parameters()).tag is RegimeTag.H1


def test_coexistence_classification(coexistence):
    r = classify_regime(coexistence)
    assert r.tag is RegimeTag.COEXISTENCE
    assert r.discriminant == 0.5


def test_degenerate_classification(degenerate):
    r = classify_regime(degenerate)
    assert r.tag is RegimeTag.DEGENERATE_EXCLUSION
    assert r.discriminant == 0.0


def test_strict_classification(strict):
    assert classify_regime(strict).tag is RegimeTag.STRICT_EXCLUSION
    assert discriminant(strict) == pytest.approx(-0.3, abs=1e-15)


def test_h1_steady_state_is_mean_mass():
    s = steady_state(Parameters(m1=2.0, m2=3.0), 1.0)
    assert (s.u_star, s.v_star) == (2.0, 3.0)
    s = steady_state(Parameters(m1=2.0, m2=3.0), 4.0)
    assert (s.u_star, s.v_star) == (0.5, 0.75)


def test_coexistence_steady_state(coexistence):
    s = steady_state(coexistence)
    assert s.u_star == pytest.approx(4 / 3, rel=1e-15)
    assert s.v_star == pytest.approx(1 / 3, rel=1e-15)


def test_exclusion_steady_state(degenerate, strict):
    for p in (degenerate, strict):
        s = steady_state(p)
        assert (s.u_star, s.v_star) == (1.0, 0.0)


def test_reaction_values(coexistence):
    assert reaction(coexistence, 1.0, 1.0) == pytest.approx((1.0, -0.5))
    assert reaction(coexistence, 0.0, 0.0) == (0.0, 0.0)
    s = steady_state(coexistence)
    f, g = reaction(coexistence, s.u_star, s.v_star)
    assert abs(f) < 1e-15 and abs(g) < 1e-15


def test_coexistence_jacobian(coexistence):
    jac = jacobian_at_steady_state(coexistence, steady_state(coexistence))
    np.testing.assert_allclose(jac.matrix, [[-4 / 3, 4 / 3], [-1 / 6, -1 / 3]], rtol=1e-14)
    assert jac.weak_signs and jac.strict_signs


def test_h1_jacobian_is_zero(h1):
    jac = jacobian_at_steady_state(h1, steady_state(h1))
    assert not np.any(jac.matrix)
    assert jac.weak_signs and not jac.strict_signs


def test_degenerate_jacobian_gv_zero(degenerate):
    jac = jacobian_at_steady_state(degenerate, steady_state(degenerate))
    assert jac.gv == 0.0
    assert jac.weak_signs and not jac.strict_signs


def test_inconsistent_steady_state_rejected(coexistence):
    from taxislab.model import SteadyState
    with pytest.raises(ParameterError):
        jacobian_at_steady_state(coexistence, SteadyState(1.0, 1.0))


@pytest.mark.parametrize("changes", [dict(chi1=0.0), dict(D2=-1.0), dict(lambda1=1.0),
                                     dict(lambda1=1.0, mu1=0.0, mu2=1, a1=1, a2=1)])
def test_invalid_parameters_rejected(changes):
    with pytest.raises(ParameterError):
        Parameters(**changes)


@given(pos, pos, pos, pos, st.sampled_from(["coexistence", "strict", "degenerate"]), st.integers(0, 2**32 - 1))
def test_regime_ignores_transport_scaling(d1, d2, c1, c2, kind, seed):
    p = random_parameters(np.random.default_rng(seed), kind)
    q = p.replace(D1=d1, D2=d2, chi1=c1, chi2=c2)
    assert classify_regime(p).tag is classify_regime(q).tag


@given(st.sampled_from(["H1", "coexistence", "strict", "degenerate"]), st.integers(0, 2**32 - 1))
def test_steady_state_is_an_equilibrium(kind, seed):
    p = random_parameters(np.random.default_rng(seed), kind)
    s = steady_state(p)
    f, g = reaction(p, s.u_star, s.v_star)
    scale = max(1.0, s.u_star, s.v_star) ** 2 * max(p.mu1, p.mu2, p.a1, p.a2, 1.0)
    assert abs(f) <= 1e-12 * scale and abs(g) <= 1e-12 * scale
    if kind in ("strict", "degenerate"):
        assert s.v_star == 0.0
    if kind == "coexistence":
        assert s.u_star > 0 and s.v_star > 0


@given(st.sampled_from(["coexistence", "strict", "degenerate"]), st.integers(0, 2**32 - 1))
def test_closed_form_matches_newton(kind, seed):
    p = random_parameters(np.random.default_rng(seed), kind)
    s = steady_state(p)
    ref = newton_steady_state(p)
    assert np.max(np.abs([s.u_star - ref[0], s.v_star - ref[1]])) <= 1e-10 * max(1.0, ref.max())


@given(st.sampled_from(["coexistence", "strict"]), st.integers(0, 2**32 - 1))
def test_strict_signs_off_the_degenerate_line(kind, seed):
    p = random_parameters(np.random.default_rng(seed), kind)
    jac = jacobian_at_steady_state(p, steady_state(p))
    assert jac.fu < 0 and jac.gv < 0
