"""Reference computations that do not share code paths with the main modules.

* :func:`newton_steady_state` finds homogeneous equilibria by damped Newton
  iteration on the kinetics alone, without the closed forms.
* :class:`ManufacturedSolution` supplies an exact solution of the forced
  system and the forcing that makes it exact.
* :func:`random_parameters` draws admissible coefficient sets per regime.
"""

from __future__ import annotations

import itertools
from types import SimpleNamespace
from dataclasses import dataclass

import numpy as np

from .grid import Grid
from .model import Parameters, reaction


KINETIC = ("lambda1", "lambda2", "mu1", "mu2", "a1", "a2")


def _kinetics(p, z):
    u, v = z[..., 0], z[..., 1]
    return np.stack([u * (p.lambda1 - p.mu1 * u + p.a1 * v),
                     v * (p.lambda2 - p.mu2 * v - p.a2 * u)], axis=-1)


def _fd_jacobian(p, z, h=1e-7):
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h * max(1.0, abs(z[j]))
        J[:, j] = (_kinetics(p, z + e) - _kinetics(p, z - e)) / (2 * e[j])
    return J


def _newton(p, z0, tol=1e-15, maxiter=200):
    """Damped Newton on many independent problems at once; ``z0`` has shape (..., 2).

    Backtracking halves the step until the residual drops; when rounding
    stops every trial from improving (near a multiple root) the full step is
    taken, which keeps Newton's halving of the distance going.
    """
    z = np.array(z0, dtype=float)
    done = np.zeros(z.shape[:-1], bool)
    for _ in range(maxiter):
        u, v = z[..., 0], z[..., 1]
        F = _kinetics(p, z)
        j11 = p.lambda1 - 2 * p.mu1 * u + p.a1 * v
        j12 = p.a1 * u
        j21 = -p.a2 * v
        j22 = p.lambda2 - 2 * p.mu2 * v - p.a2 * u
        det = j11 * j22 - j12 * j21
        singular = det == 0.0
        safe = np.where(singular, 1.0, det)
        step = np.stack([(-F[..., 0] * j22 + F[..., 1] * j12) / safe,
                         (-F[..., 1] * j11 + F[..., 0] * j21) / safe], axis=-1)
        step[singular | done] = 0.0
        f0 = np.sum(F**2, axis=-1)
        t = np.ones(done.shape)
        pending = f0 > 0
        for _ in range(12):
            ft = np.sum(_kinetics(p, z + t[..., None] * step) ** 2, axis=-1)
            pending &= ~(ft < f0)
            if not pending.any():
                break
            t[pending] *= 0.5
        t[pending] = 1.0
        z = z + t[..., None] * step
        scale = np.maximum(1.0, np.max(np.abs(z), axis=-1))
        done |= (np.max(np.abs(step), axis=-1) <= tol * scale) | singular
        if done.all():
            break
    return z, np.max(np.abs(_kinetics(p, z)), axis=-1)


START_LEVELS = (0.0, 0.5, 3.0, 20.0, 100.0)


def _distinct_roots(zs, res) -> list[np.ndarray]:
    roots = []
    for z, r in zip(zs, res):
        if not np.all(np.isfinite(z)) or r > 1e-12 * max(1.0, np.max(np.abs(z))) ** 2:
            continue
        if np.any(z < -1e-9):
            continue
        z = np.maximum(z, 0.0)
        if all(np.max(np.abs(z - q)) > 1e-7 * max(1.0, np.max(np.abs(q))) for q in roots):
            roots.append(z)
    return roots


def _stable_root(p, roots, stability_tol):
    stable = [r for r in roots
              if np.max(np.linalg.eigvals(_fd_jacobian(p, r)).real) <= stability_tol]
    if len(stable) != 1:
        raise ArithmeticError(f"expected one stable nonnegative equilibrium, found {len(stable)}")
    return stable[0]


def newton_roots(p: Parameters, starts=None) -> list[np.ndarray]:
    """Distinct equilibria in the closed nonnegative quadrant reached from a lattice of starts."""
    if starts is None:
        starts = list(itertools.product(START_LEVELS, START_LEVELS))
    return _distinct_roots(*_newton(p, starts))


def newton_steady_state(p: Parameters, stability_tol: float = 1e-7) -> np.ndarray:
    """The root whose finite-difference Jacobian has no eigenvalue with positive real part."""
    return _stable_root(p, newton_roots(p), stability_tol)


def newton_steady_states(params, stability_tol: float = 1e-7) -> list:
    """Batched :func:`newton_steady_state`; failed draws come back as the exception."""
    batch = SimpleNamespace(**{k: np.array([[getattr(p, k)] for p in params]) for k in KINETIC})
    starts = np.array(list(itertools.product(START_LEVELS, START_LEVELS)))
    zs, res = _newton(batch, np.broadcast_to(starts, (len(params),) + starts.shape))
    out = []
    for p, z, r in zip(params, zs, res):
        try:
            out.append(_stable_root(p, _distinct_roots(z, r), stability_tol))
        except ArithmeticError as exc:
            out.append(exc)
    return out


def random_parameters(rng: np.random.Generator, regime: str) -> Parameters:
    """One admissible draw; ``regime`` in {'H1', 'coexistence', 'strict', 'degenerate'}."""
    D1, D2, chi1, chi2 = rng.uniform(0.1, 3.0, 4)
    if regime == "H1":
        m1, m2 = rng.uniform(0.0, 5.0, 2)
        return Parameters(D1, D2, chi1, chi2, m1=m1, m2=m2)
    mu1, mu2, a1, a2 = rng.uniform(0.1, 3.0, 4)
    lam1 = rng.uniform(0.0, 3.0)
    if regime == "coexistence":
        lam2 = lam1 * a2 / mu1 + rng.uniform(0.05, 3.0)
    elif regime == "strict":
        lam1 = rng.uniform(0.1, 3.0)
        lam2 = lam1 * a2 / mu1 * rng.uniform(0.0, 0.95)
    elif regime == "degenerate":
        # exact zero: lambda2 * mu1 == lambda1 * a2 when all are small integers over 8
        mu1, a2 = rng.integers(1, 17, 2) / 8.0
        lam1 = rng.integers(0, 17) / 8.0
        lam2 = lam1 * a2 / mu1
    else:
        raise ValueError(f"unknown regime {regime!r}")
    return Parameters(D1, D2, chi1, chi2, lam1, lam2, mu1, mu2, a1, a2)


@dataclass(frozen=True)
class ManufacturedSolution:
    """``u = u* + A e^{-t} cos(pi x/L)``, ``v = v* + B e^{-t} cos(2 pi x/L)`` on [0, L]."""
    p: Parameters
    u_star: float
    v_star: float
    A: float = 0.2
    B: float = 0.1
    L: float = 1.0

    def exact(self, x, t):
        e = np.exp(-t)
        k = np.pi / self.L
        return (self.u_star + self.A * e * np.cos(k * x),
                self.v_star + self.B * e * np.cos(2 * k * x))

    def forcing(self, x, t):
        """Right-hand side added to each equation so that :meth:`exact` solves it."""
        p, A, B = self.p, self.A, self.B
        e = np.exp(-t)
        k = np.pi / self.L
        u, v = self.exact(x, t)
        u_t = -A * e * np.cos(k * x)
        v_t = -B * e * np.cos(2 * k * x)
        u_x = -A * k * e * np.sin(k * x)
        u_xx = -A * k**2 * e * np.cos(k * x)
        v_x = -2 * B * k * e * np.sin(2 * k * x)
        v_xx = -4 * B * k**2 * e * np.cos(2 * k * x)
        f, g = reaction(p, u, v)
        su = u_t - p.D1 * u_xx + p.chi1 * (u_x * v_x + u * v_xx) - f
        sv = v_t - p.D2 * v_xx - p.chi2 * (v_x * u_x + v * u_xx) - g
        return su, sv

    def source_on(self, grid: Grid):
        x = grid.centers(0)
        return lambda t: self.forcing(x, t)
