import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from taxislab.grid import Grid


def _order(errors, sizes):
    return np.polyfit(np.log(1.0 / np.array(sizes)), np.log(errors), 1)[0]


def cosine(grid, k=1):
    x = grid.centers(0)
    return np.cos(k * np.pi * x / grid.lengths[0])


fields = arrays(np.float64, 32, elements=st.floats(-10, 10))


def test_geometry():
    g = Grid((8, 4), (2.0, 1.0))
    assert g.spacing == (0.25, 0.25)
    assert g.cell_volume == 0.0625
    assert g.volume == 2.0
    assert g.integrate(g.constant(1.0)) == pytest.approx(2.0, rel=1e-15)


def test_constant_has_zero_derivatives():
    for g in (Grid.uniform(16), Grid((8, 6), (1.0, 2.0)), Grid((4, 4, 4), (1.0, 1.0, 1.0))):
        c = g.constant(3.7)
        assert not np.any(g.laplacian(c))
        assert all(not np.any(d) for d in g.gradient(c))


def test_laplacian_of_quadratic_interior():
    g = Grid.uniform(20)
    x = g.centers(0)
    lap = g.laplacian(x**2)
    np.testing.assert_allclose(lap[1:-1], 2.0, rtol=1e-10)


def test_gradient_of_linear_interior():
    g = Grid.uniform(20)
    grad = g.gradient(2.5 * g.centers(0))[0]
    np.testing.assert_allclose(grad[1:-1], 2.5, rtol=1e-12)


def test_laplacian_eigenfunction_order():
    sizes = [32, 64, 128, 256]
    errs = []
    for n in sizes:
        g = Grid.uniform(n, 2.0)
        f = cosine(g)
        errs.append(np.max(np.abs(g.laplacian(f) + (np.pi / 2.0) ** 2 * f)))
    assert _order(errs, sizes) >= 1.9


def test_gradient_order():
    sizes = [32, 64, 128, 256]
    errs = []
    for n in sizes:
        g = Grid.uniform(n)
        x = g.centers(0)
        # interior only: the reflected ghost is first order at the wall
        errs.append(np.max(np.abs(g.gradient(cosine(g))[0] + np.pi * np.sin(np.pi * x))[2:-2]))
    assert _order(errs, sizes) >= 1.9


def test_taxis_divergence_order():
    sizes = [32, 64, 128, 256]
    errs = []
    for n in sizes:
        g = Grid.uniform(n)
        x = g.centers(0)
        c = cosine(g)
        # d/dx (cos * (-pi sin)) = -pi^2 cos(2 pi x)
        exact = -np.pi**2 * np.cos(2 * np.pi * x)
        errs.append(np.max(np.abs(g.taxis_divergence(c, c) - exact)))
    assert _order(errs, sizes) >= 1.9


def test_lap_inner_of_cosine():
    g = Grid.uniform(512)
    f = cosine(g)
    assert g.lap_inner(f, f) == pytest.approx(np.pi**4 / 2, rel=1e-4)


def test_first_eigenvalue_matches_cosine():
    g = Grid.uniform(64)
    f = cosine(g)
    np.testing.assert_allclose(-g.laplacian(f), g.first_eigenvalue * f, atol=1e-10)


@given(fields, fields)
def test_summation_by_parts(f, q):
    g = Grid.uniform(32, 1.3)
    lhs = g.inner(f, g.laplacian(q))
    rhs = -g.grad_inner(f, q)
    scale = max(1.0, g.inner(np.abs(f), np.abs(g.laplacian(q))))
    assert abs(lhs - rhs) <= 1e-12 * scale


@given(fields, fields)
def test_taxis_divergence_conserves_mass(c, q):
    g = Grid.uniform(32)
    out = g.taxis_divergence(c, q)
    assert abs(g.integrate(out)) <= 1e-13 * max(1.0, g.integrate(np.abs(out)))


@given(fields, fields, st.floats(-3, 3), st.floats(-3, 3))
def test_operators_linear(f, q, a, b):
    g = Grid.uniform(32)
    lhs = g.laplacian(a * f + b * q)
    rhs = a * g.laplacian(f) + b * g.laplacian(q)
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.max(np.abs(lhs))))


@given(fields, st.floats(0.1, 5.0))
def test_taxis_with_constant_coefficient(q, c):
    g = Grid.uniform(32)
    out = g.taxis_divergence(g.constant(c), q)
    assert np.allclose(out, c * g.laplacian(q), atol=1e-10 * (1 + np.max(np.abs(out))))


@given(fields)
def test_norm_bundle_consistency(f):
    g = Grid.uniform(32)
    nb = g.norms(f)
    assert min(nb.l2, nb.linf, nb.h1_seminorm, nb.laplacian_l2, nb.grad_laplacian_l2) >= 0
    assert nb.w22_equiv >= nb.l2 * (1 - 1e-12)
    assert nb.mean == pytest.approx(g.integrate(f) / g.volume, abs=1e-12)
    assert nb.h1_seminorm**2 == pytest.approx(g.grad_inner(f, f), rel=1e-9, abs=1e-300)


def test_two_dimensional_summation_by_parts(rng):
    g = Grid((12, 9), (1.0, 0.7))
    f, q = rng.standard_normal(g.shape), rng.standard_normal(g.shape)
    assert g.inner(f, g.laplacian(q)) == pytest.approx(-g.grad_inner(f, q), rel=1e-12)
    assert abs(g.integrate(g.taxis_divergence(np.abs(f), q))) < 1e-12


def test_csv_round_trip(rng):
    g = Grid((5, 3), (1.0, 1.0))
    f = rng.standard_normal(g.shape)
    np.testing.assert_array_equal(g.from_csv(g.to_csv(f)), f)
    with pytest.raises(ValueError):
        Grid.uniform(4).from_csv(g.to_csv(f))
