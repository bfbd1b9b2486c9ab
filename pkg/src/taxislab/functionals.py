"""Energy functionals, regime-specific weights and differential-inequality monitors.

The composite functional is

    y = phi_{A1,B1,C1}(u - u*) + phi_{A2,B2,C2}(v - v*),
    phi_{A,B,C}(w) = A/2 int w^2 + B/2 int |grad w|^2 + C/2 int |Lap w|^2.

Weights come from :func:`weights_for_regime`; in the coexistence and (H1)
regimes they are chosen so that every taxis/predation cross term in y'
cancels (see :func:`cancellation_residuals`).
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, field, fields
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .grid import Grid
from .model import (
    Parameters,
    ParameterError,
    Regime,
    RegimeTag,
    SteadyState,
    classify_regime,
    jacobian_at_steady_state,
)

if TYPE_CHECKING:
    from .solver import SimState, TimeSeries


@dataclass(frozen=True)
class WeightSet:
    A1: float
    A2: float
    B1: float
    B2: float
    C1: float
    C2: float
    X2: float | None = None
    #: decay constant fixed by the exclusion weight table (None elsewhere)
    K: float | None = None
    #: Poincare constant that entered C2 (exclusion regimes only)
    poincare_constant: float | None = None

    def __post_init__(self):
        for name in ("A1", "A2", "B1", "B2", "C1", "C2"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"weight {name} must be finite and >= 0, got {value}")

    @property
    def six(self) -> tuple[float, ...]:
        return (self.A1, self.A2, self.B1, self.B2, self.C1, self.C2)

    @property
    def b_weights_used(self) -> bool:
        return self.B1 > 0 or self.B2 > 0

    @classmethod
    def unit(cls) -> "WeightSet":
        return cls(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)


def _exclusion_c2(p: Parameters, s: SteadyState, cp: float) -> float:
    return 16.0 * max(cp**2 * p.a1**2, p.chi1**2) * (s.u_star + 1.0) ** 2 / (p.D1 * p.D2)


def weights_for_regime(p: Parameters, s: SteadyState, r: Regime | None = None,
                       poincare_constant: float | None = None) -> WeightSet:
    """Weight table per regime.

    ``poincare_constant`` is only used in the exclusion regimes; pass the
    measured discrete constant of the grid in use
    (:func:`taxislab.inequalities.measured_poincare_constant`).  Without it,
    the continuum value for the unit interval, ``1/pi^2``, is used.
    """
    r = classify_regime(p) if r is None else r
    if r.is_exclusion and s.v_star != 0.0:
        raise ParameterError(f"{r.tag.value} requires v* = 0, got {s.v_star}")
    if r.tag is RegimeTag.COEXISTENCE and not s.v_star > 0:
        raise ParameterError("coexistence requires v* > 0")
    us, vs = s.u_star, s.v_star
    if r.tag is RegimeTag.H1:
        a, b = p.chi2 * vs, p.chi1 * us
        return WeightSet(a, b, a, b, a, b)
    if r.tag is RegimeTag.COEXISTENCE:
        return WeightSet(
            A1=p.a2 * vs,
            A2=p.a1 * us,
            B1=(p.a2 + p.chi2) * vs,
            B2=(p.a1 + p.chi1) * us,
            C1=p.chi2 * vs,
            C2=p.chi1 * us,
        )
    cp = (1.0 / np.pi**2) if poincare_constant is None else float(poincare_constant)
    c2 = _exclusion_c2(p, s, cp)
    jac = jacobian_at_steady_state(p, s)
    if r.tag is RegimeTag.STRICT_EXCLUSION:
        K = 0.5 * min(-jac.fu, -jac.gv)
        a2 = max(p.a1**2 / K**2, p.chi1**2 / (p.D1 * p.D2)) * us**2
        return WeightSet(1.0, a2, 0.0, 0.0, 1.0, c2, K=K, poincare_constant=cp)
    return WeightSet(
        A1=1.0,
        A2=p.chi1**2 * us**2 / (p.D1 * p.D2),
        B1=0.0,
        B2=0.0,
        C1=1.0,
        C2=c2,
        X2=p.a1 * us / p.a2,
        poincare_constant=cp,
    )


def cancellation_residuals(w: WeightSet, p: Parameters, s: SteadyState) -> tuple[float, float, float, float]:
    """Coefficients of the four cross terms left in y'.

    In order: int (u-u*)(v-v*), int grad u . grad v, int Lap u Lap v and
    int grad Lap u . grad Lap v.
    """
    us, vs = s.u_star, s.v_star
    return (
        w.A1 * p.a1 * us - w.A2 * p.a2 * vs,
        (w.A1 * p.chi1 + w.B1 * p.a1) * us - (w.A2 * p.chi2 + w.B2 * p.a2) * vs,
        (w.B1 * p.chi1 + w.C1 * p.a1) * us - (w.B2 * p.chi2 + w.C2 * p.a2) * vs,
        w.C1 * p.chi1 * us - w.C2 * p.chi2 * vs,
    )


@dataclass(frozen=True)
class FunctionalRecord:
    t: float
    e_u0: float
    e_v0: float
    e_u1: float
    e_v1: float
    e_u2: float
    e_v2: float
    y: float
    mass_u: float
    mass_v: float
    w22_u: float
    w22_v: float
    # auxiliary integrals used by the monitors
    linf_u: float = 0.0
    linf_v: float = 0.0
    l1_du: float = 0.0
    l1_v: float = 0.0
    e_u3: float = 0.0
    e_v3: float = 0.0
    cross0: float = 0.0
    cross1: float = 0.0
    cross2: float = 0.0
    cross3: float = 0.0
    int_u2: float = 0.0
    int_v2: float = 0.0
    int_uv: float = 0.0
    int_du_v: float = 0.0

    @property
    def distance(self) -> float:
        return self.w22_u + self.w22_v


RECORD_COLUMNS = tuple(f.name for f in fields(FunctionalRecord))


def composite(w: WeightSet, e_u0, e_v0, e_u1, e_v1, e_u2, e_v2):
    return 0.5 * (w.A1 * e_u0 + w.B1 * e_u1 + w.C1 * e_u2
                  + w.A2 * e_v0 + w.B2 * e_v1 + w.C2 * e_v2)


def phi(grid: Grid, field_: np.ndarray, A: float, B: float, C: float) -> float:
    lap = grid.laplacian(field_)
    return 0.5 * (A * grid.inner(field_, field_) + B * grid.grad_inner(field_, field_)
                  + C * grid.inner(lap, lap))


def record(state: "SimState", s: SteadyState, w: WeightSet) -> FunctionalRecord:
    g = state.grid
    du, dv = state.du, state.dv
    lap_u, lap_v = g.laplacian(du), g.laplacian(dv)
    e = dict(
        e_u0=g.inner(du, du), e_v0=g.inner(dv, dv),
        e_u1=g.grad_inner(du, du), e_v1=g.grad_inner(dv, dv),
        e_u2=g.inner(lap_u, lap_u), e_v2=g.inner(lap_v, lap_v),
    )
    u = s.u_star + du
    v = s.v_star + dv
    return FunctionalRecord(
        t=state.t,
        y=composite(w, **e),
        mass_u=s.u_star * g.volume + g.integrate(du),
        mass_v=s.v_star * g.volume + g.integrate(dv),
        w22_u=g.norms(du).w22_equiv,
        w22_v=g.norms(dv).w22_equiv,
        linf_u=float(np.max(np.abs(du))),
        linf_v=float(np.max(np.abs(dv))),
        l1_du=g.integrate(np.abs(du)),
        l1_v=g.integrate(np.abs(v)),
        e_u3=g.grad_inner(lap_u, lap_u),
        e_v3=g.grad_inner(lap_v, lap_v),
        cross0=g.inner(du, dv),
        cross1=g.grad_inner(du, dv),
        cross2=g.inner(lap_u, lap_v),
        cross3=g.grad_inner(lap_u, lap_v),
        int_u2=g.inner(u, u),
        int_v2=g.inner(v, v),
        int_uv=g.inner(u, v),
        int_du_v=g.inner(du, v),
        **e,
    )


def records_to_csv(records: Sequence[FunctionalRecord], header: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for rec in records:
        writer.writerow(f"{x:.17g}" for x in astuple(rec))
    return buf.getvalue()


def records_from_csv(text: str) -> list[FunctionalRecord]:
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    if tuple(columns) != RECORD_COLUMNS:
        raise ValueError("column layout does not match FunctionalRecord")
    return [FunctionalRecord(*(float(x) for x in row)) for row in reader]


# -- time-series monitors ------------------------------------------------

def _column(records: Sequence[FunctionalRecord], name: str) -> np.ndarray:
    return np.array([getattr(r, name) for r in records])


def central_difference(t: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Second-order d/dt on uniform samples; NaN at both endpoints."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    out = np.full(q.shape, np.nan)
    if len(t) >= 3:
        out[1:-1] = (q[2:] - q[:-2]) / (t[2:] - t[:-2])
    return out


def _check_uniform(t: np.ndarray, rtol: float = 1e-8) -> None:
    if len(t) < 3:
        raise ValueError("need at least three samples")
    dt = np.diff(t)
    if np.any(dt <= 0) or np.ptp(dt) > rtol * np.max(dt):
        raise ValueError("samples must be uniformly spaced in time")


def mass_ode_residual(series: "TimeSeries", p: Parameters, s: SteadyState, which: str = "v"):
    """Central-difference d/dt of a mass minus the right-hand side of its ODE.

    ``which="u"``: d/dt int u = -mu1 int u^2 + a1 int uv, valid when lambda1 = 0.
    ``which="v"``: d/dt int v = -mu2 int v^2 - a2 int (u - u*) v, valid in
    the degenerate exclusion regime.

    Returns ``(t, residual)`` over the interior samples.
    """
    recs = series.records
    t = _column(recs, "t")
    _check_uniform(t)
    regime = classify_regime(p)
    if which == "u":
        if p.lambda1 != 0.0:
            raise ValueError("the u-mass identity needs lambda1 = 0")
        mass = _column(recs, "mass_u")
        rhs = -p.mu1 * _column(recs, "int_u2") + p.a1 * _column(recs, "int_uv")
    elif which == "v":
        if regime.tag is not RegimeTag.DEGENERATE_EXCLUSION:
            raise ValueError(f"the v-mass identity needs the degenerate regime, not {regime.tag.value}")
        mass = _column(recs, "mass_v")
        rhs = -p.mu2 * _column(recs, "int_v2") - p.a2 * _column(recs, "int_du_v")
    else:
        raise ValueError("which must be 'u' or 'v'")
    res = central_difference(t, mass) - rhs
    return t[1:-1], res[1:-1]


def in_tube(records: Sequence[FunctionalRecord], eta: float) -> np.ndarray:
    return (_column(records, "linf_u") + _column(records, "linf_v")) < eta


def default_eta(s: SteadyState) -> float:
    return 0.1 * min(s.u_star + s.v_star, 1.0)


@dataclass
class InequalityLedger:
    """Signed slack (LHS - RHS) per monitored inequality; NaN = not applicable."""
    t: np.ndarray
    slack: dict[str, np.ndarray] = field(default_factory=dict)
    scale: dict[str, np.ndarray] = field(default_factory=dict)
    applicable: np.ndarray | None = None

    def worst(self, name: str) -> float:
        vals = self.slack[name]
        vals = vals[np.isfinite(vals)]
        return float(np.max(vals)) if vals.size else float("nan")

    def relative(self, name: str) -> np.ndarray:
        """Slack divided by the magnitude of the terms it balances."""
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.slack[name] / self.scale[name]


def differential_inequality_residuals(series: "TimeSeries", p: Parameters, s: SteadyState,
                                      w: WeightSet, eta: float | None = None) -> InequalityLedger:
    recs = series.records
    t = _column(recs, "t")
    _check_uniform(t)
    regime = classify_regime(p)
    eta = default_eta(s) if eta is None else eta
    ok = in_tube(recs, eta)
    col = {name: _column(recs, name) for name in
           ("e_u0", "e_v0", "e_u1", "e_v1", "e_u2", "e_v2", "e_u3", "e_v3",
            "cross0", "cross1", "cross2", "cross3", "mass_v")}
    d = {k: central_difference(t, v) for k, v in col.items()}
    jac = jacobian_at_steady_state(p, s)
    us, vs = s.u_star, s.v_star
    ledger = InequalityLedger(t=t, applicable=ok)

    def put(name, lhs_terms, rhs_terms):
        lhs = sum(lhs_terms)
        rhs = sum(rhs_terms)
        mag = sum(np.abs(x) for x in list(lhs_terms) + list(rhs_terms))
        ledger.slack[name] = np.where(ok, lhs - rhs, np.nan)
        ledger.scale[name] = mag

    # single-component L2 estimates
    put("u_single",
        [0.5 * d["e_u0"], 0.75 * p.D1 * col["e_u1"],
         (-jac.fu - eta * (p.a1 + p.mu1)) * col["e_u0"]],
        [p.a1 * us * col["cross0"], p.chi1 * us * col["cross1"], 0.5 * eta * p.chi1 * col["e_v1"]])
    put("v_single",
        [0.5 * d["e_v0"], 0.75 * p.D2 * col["e_v1"],
         (-jac.gv - eta * (p.a2 + p.mu2)) * col["e_v0"]],
        [-p.a2 * vs * col["cross0"], -p.chi2 * vs * col["cross1"], 0.5 * eta * p.chi2 * col["e_u1"]])
    if w.A1 > 0 and w.A2 > 0:
        put("l2_pair",
            [0.5 * (w.A1 * d["e_u0"] + w.A2 * d["e_v0"]),
             0.5 * w.A1 * p.D1 * col["e_u1"], 0.5 * w.A2 * p.D2 * col["e_v1"],
             w.A1 * (-jac.fu - eta * (p.a1 + p.mu1)) * col["e_u0"],
             w.A2 * (-jac.gv - eta * (p.a2 + p.mu2)) * col["e_v0"]],
            [(w.A1 * p.a1 * us - w.A2 * p.a2 * vs) * col["cross0"],
             (w.A1 * p.chi1 * us - w.A2 * p.chi2 * vs) * col["cross1"]])
    if w.B1 > 0 and w.B2 > 0:
        put("grad_pair",
            [0.5 * (w.B1 * d["e_u1"] + w.B2 * d["e_v1"]),
             0.5 * w.B1 * p.D1 * col["e_u2"], 0.5 * w.B2 * p.D2 * col["e_v2"]],
            [(w.B1 * p.a1 * us - w.B2 * p.a2 * vs) * col["cross1"],
             (w.B1 * p.chi1 * us - w.B2 * p.chi2 * vs) * col["cross2"]])
    if w.C1 > 0 and w.C2 > 0:
        put("lap_pair",
            [0.5 * (w.C1 * d["e_u2"] + w.C2 * d["e_v2"]),
             0.5 * w.C1 * p.D1 * col["e_u3"], 0.5 * w.C2 * p.D2 * col["e_v3"]],
            [(w.C1 * p.a1 * us - w.C2 * p.a2 * vs) * col["cross2"],
             (w.C1 * p.chi1 * us - w.C2 * p.chi2 * vs) * col["cross3"]])
    if regime.tag in (RegimeTag.H1, RegimeTag.COEXISTENCE):
        dy = composite(w, d["e_u0"], d["e_v0"], d["e_u1"], d["e_v1"], d["e_u2"], d["e_v2"])
        put("y_combined",
            [dy, 0.5 * w.C1 * p.D1 * col["e_u3"], 0.5 * w.C2 * p.D2 * col["e_v3"],
             -0.5 * w.A1 * jac.fu * col["e_u0"], -0.5 * w.A2 * jac.gv * col["e_v0"]],
            [])
    if regime.is_exclusion:
        K = min(p.D1, p.D2) / 2.0
        z = col["e_u2"] + w.C2 * col["e_v2"]
        put("lap_exclusion", [d["e_u2"] + w.C2 * d["e_v2"], K * z], [])
    if regime.tag is RegimeTag.STRICT_EXCLUSION:
        z = col["e_u0"] + w.A2 * col["e_v0"]
        put("l2_exclusion", [d["e_u0"] + w.A2 * d["e_v0"], w.K * z], [])
    if regime.tag is RegimeTag.DEGENERATE_EXCLUSION and w.X2 is not None:
        c1 = -0.5 * w.A1 * jac.fu
        c2 = 0.5 * w.X2 * p.mu2
        put("mass_functional",
            [0.5 * (w.A1 * d["e_u0"] + w.A2 * d["e_v0"]) + w.X2 * d["mass_v"],
             c1 * col["e_u0"], c2 * col["e_v0"]],
            [])
    return ledger
