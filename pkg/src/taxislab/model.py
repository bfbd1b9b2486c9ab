"""Model coefficients, reaction kinetics, regimes and homogeneous steady states.

The simulated system is

    u_t = D1 Lap u - chi1 div(u grad v) + u (lambda1 - mu1 u + a1 v)
    v_t = D2 Lap v + chi2 div(v grad u) + v (lambda2 - mu2 v - a2 u)

with zero-flux boundaries.  ``u`` is the predator, ``v`` the prey.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, fields

import numpy as np

#: relative tolerance applied to the discriminant on top of the exact-zero test
DISCRIMINANT_RTOL = 1e-12

KINETIC_NAMES = ("lambda1", "lambda2", "mu1", "mu2", "a1", "a2")


class ParameterError(ValueError):
    """Raised for coefficient sets outside the admissible classes."""


@dataclass(frozen=True)
class Parameters:
    D1: float = 1.0
    D2: float = 1.0
    chi1: float = 1.0
    chi2: float = 1.0
    lambda1: float = 0.0
    lambda2: float = 0.0
    mu1: float = 0.0
    mu2: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    m1: float = 0.0
    m2: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value):
                raise ParameterError(f"{f.name} must be finite, got {value!r}")
            object.__setattr__(self, f.name, float(value))
        problems = validate(self)
        if problems:
            raise ParameterError("; ".join(problems))

    @property
    def is_h1(self) -> bool:
        return all(getattr(self, name) == 0.0 for name in KINETIC_NAMES)

    def replace(self, **changes) -> "Parameters":
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        values.update(changes)
        return Parameters(**values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def validate(p: Parameters) -> list[str]:
    """Collect every admissibility violation instead of stopping at the first."""
    problems = []
    for name in ("D1", "D2", "chi1", "chi2"):
        if not getattr(p, name) > 0:
            problems.append(f"{name} must be > 0 (got {getattr(p, name)})")
    for name in ("m1", "m2"):
        if getattr(p, name) < 0:
            problems.append(f"{name} must be >= 0 (got {getattr(p, name)})")
    kinetic = {name: getattr(p, name) for name in KINETIC_NAMES}
    if any(v < 0 for v in kinetic.values()):
        bad = [k for k, v in kinetic.items() if v < 0]
        problems.append(f"kinetic coefficients must be >= 0: {', '.join(bad)}")
    elif any(v != 0 for v in kinetic.values()):
        # (H2): a1, a2, mu1, mu2 strictly positive
        zero = [k for k in ("a1", "a2", "mu1", "mu2") if kinetic[k] == 0]
        if zero:
            problems.append(
                "kinetics are neither all zero (H1) nor admissible under (H2): "
                f"{', '.join(zero)} must be > 0"
            )
    return problems


class RegimeTag(str, enum.Enum):
    H1 = "H1"
    COEXISTENCE = "CoexistenceH2"
    STRICT_EXCLUSION = "StrictExclusionH2"
    DEGENERATE_EXCLUSION = "DegenerateExclusionH2"


@dataclass(frozen=True)
class Regime:
    tag: RegimeTag
    discriminant: float
    #: H1 with m1 == 0 or m2 == 0: one component stays identically zero
    trivial_component: bool = False

    @property
    def is_exclusion(self) -> bool:
        return self.tag in (RegimeTag.STRICT_EXCLUSION, RegimeTag.DEGENERATE_EXCLUSION)

    @property
    def predicts_algebraic(self) -> bool:
        return self.tag is RegimeTag.DEGENERATE_EXCLUSION


def discriminant(p: Parameters) -> float:
    return p.lambda2 * p.mu1 - p.lambda1 * p.a2


def classify_regime(p: Parameters) -> Regime:
    if validate(p):
        raise ParameterError("; ".join(validate(p)))
    disc = discriminant(p)
    if p.is_h1:
        return Regime(RegimeTag.H1, disc, trivial_component=(p.m1 == 0 or p.m2 == 0))
    scale = max(abs(p.lambda2 * p.mu1), abs(p.lambda1 * p.a2))
    if disc == 0.0 or abs(disc) <= DISCRIMINANT_RTOL * scale:
        return Regime(RegimeTag.DEGENERATE_EXCLUSION, disc)
    if disc > 0:
        return Regime(RegimeTag.COEXISTENCE, disc)
    return Regime(RegimeTag.STRICT_EXCLUSION, disc)


@dataclass(frozen=True)
class SteadyState:
    u_star: float
    v_star: float


def steady_state(p: Parameters, domain_volume: float = 1.0) -> SteadyState:
    if not domain_volume > 0:
        raise ValueError("domain_volume must be positive")
    regime = classify_regime(p)
    if regime.tag is RegimeTag.H1:
        return SteadyState(p.m1 / domain_volume, p.m2 / domain_volume)
    if regime.tag is RegimeTag.COEXISTENCE:
        den = p.mu1 * p.mu2 + p.a1 * p.a2
        return SteadyState(
            (p.lambda1 * p.mu2 + p.lambda2 * p.a1) / den,
            (p.lambda2 * p.mu1 - p.lambda1 * p.a2) / den,
        )
    return SteadyState(p.lambda1 / p.mu1, 0.0)


def reaction(p: Parameters, u, v):
    """Return ``(f(u, v), g(u, v))``; works elementwise on arrays."""
    f = u * (p.lambda1 - p.mu1 * u + p.a1 * v)
    g = v * (p.lambda2 - p.mu2 * v - p.a2 * u)
    return f, g


def linear_growth_offsets(p: Parameters, s: SteadyState) -> tuple[float, float]:
    """Bracket values ``lambda1 - mu1 u* + a1 v*`` and ``lambda2 - mu2 v* - a2 u*``.

    These vanish identically wherever the corresponding component of the
    steady state is positive (and at the degenerate double root), so they
    are returned as exact zeros there instead of as rounding residue.  This
    keeps the steady state an exact fixed point of the deviation-form
    kinetics below.
    """
    regime = classify_regime(p)
    if regime.tag in (RegimeTag.H1, RegimeTag.COEXISTENCE, RegimeTag.DEGENERATE_EXCLUSION):
        return 0.0, 0.0
    return 0.0, p.lambda2 - p.a2 * s.u_star


def reaction_deviation(p: Parameters, s: SteadyState, du, dv, offsets=None):
    """Kinetics written in deviations ``du = u - u*``, ``dv = v - v*``.

    Algebraically identical to :func:`reaction` at ``(u* + du, v* + dv)``
    but keeps full relative precision when the deviations are far below
    the rounding unit of the steady state.
    """
    ru, rv = linear_growth_offsets(p, s) if offsets is None else offsets
    f = (s.u_star + du) * (ru - p.mu1 * du + p.a1 * dv)
    g = (s.v_star + dv) * (rv - p.mu2 * dv - p.a2 * du)
    return f, g


@dataclass(frozen=True)
class JacobianAtSteadyState:
    fu: float
    fv: float
    gu: float
    gv: float

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fu, self.fv], [self.gu, self.gv]])

    @property
    def weak_signs(self) -> bool:
        """fu <= 0 and gv <= 0."""
        return self.fu <= 0 and self.gv <= 0

    @property
    def strict_signs(self) -> bool:
        """fu < 0 and gv < 0."""
        return self.fu < 0 and self.gv < 0


def jacobian(p: Parameters, u, v) -> np.ndarray:
    return np.array([
        [p.lambda1 - 2 * p.mu1 * u + p.a1 * v, p.a1 * u],
        [-p.a2 * v, p.lambda2 - 2 * p.mu2 * v - p.a2 * u],
    ])


def jacobian_at_steady_state(p: Parameters, s: SteadyState, rtol: float = 1e-10) -> JacobianAtSteadyState:
    f, g = reaction(p, s.u_star, s.v_star)
    scale = max(1.0, s.u_star, s.v_star) ** 2 * max(
        1.0, p.lambda1, p.lambda2, p.mu1, p.mu2, p.a1, p.a2)
    if abs(f) > rtol * scale or abs(g) > rtol * scale:
        raise ParameterError(f"({s.u_star}, {s.v_star}) is not a steady state: f={f:.3e}, g={g:.3e}")
    regime = classify_regime(p)
    if regime.tag is RegimeTag.H1:
        return JacobianAtSteadyState(0.0, 0.0, 0.0, 0.0)
    if regime.tag is RegimeTag.COEXISTENCE:
        return JacobianAtSteadyState(
            -p.mu1 * s.u_star, p.a1 * s.u_star, -p.a2 * s.v_star, -p.mu2 * s.v_star)
    if s.v_star != 0.0:
        raise ParameterError("exclusion regimes require v* = 0")
    gv = 0.0 if regime.tag is RegimeTag.DEGENERATE_EXCLUSION else p.lambda2 - p.lambda1 * p.a2 / p.mu1
    return JacobianAtSteadyState(-p.lambda1, p.a1 * s.u_star, 0.0, gv)
