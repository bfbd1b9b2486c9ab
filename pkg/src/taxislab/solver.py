"""Time stepping for the predator-prey taxis system on a Neumann box.

The state is carried as deviations ``du = u - u*``, ``dv = v - v*`` from
the homogeneous steady state.  Near equilibrium the deviations fall many
orders of magnitude below the rounding unit of ``u*``, so storing ``u``
itself would freeze every decay curve at ~1e-16.  The kinetics are written
directly in the deviations (:func:`taxislab.model.reaction_deviation`) and
the taxis fluxes only see gradients, which are the same for ``u`` and ``du``.

Schemes
-------
``imex_euler``
    backward Euler for diffusion, forward Euler for taxis and kinetics.
``strang_imex``
    kinetics for dt/2 (pointwise RK4), then taxis + diffusion for dt with
    the SSP3(3,2,2) IMEX Runge-Kutta pair, then kinetics for dt/2.  The
    transport stage borrows a stabilizing diffusion shift (see
    :func:`stabilizing_shift`).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import fft

from .functionals import FunctionalRecord, WeightSet, default_eta, record, weights_for_regime
from .grid import Grid
from .model import (
    Parameters,
    SteadyState,
    classify_regime,
    linear_growth_offsets,
    reaction_deviation,
    steady_state,
)

SCHEMES = ("imex_euler", "strang_imex")

#: multiple of the linearized cross-diffusion strength used as diffusion shift
SHIFT_FACTOR = 3.0


class SolverError(RuntimeError):
    pass


class StepRejected(SolverError):
    def __init__(self, message, cfl, suggested_dt):
        super().__init__(message)
        self.cfl = cfl
        self.suggested_dt = suggested_dt


class LinearSolveError(SolverError):
    pass


class BlowUp(SolverError):
    """Overflow sentinel tripped; kept separate from ordinary step failures."""

    def __init__(self, message, t):
        super().__init__(message)
        self.t = t


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class StepControl:
    dt: float
    scheme: str = "imex_euler"
    clip_negative: bool = True
    stability_guard: float = 0.25
    linear_rtol: float = 1e-10
    preconditioner: str = "dct"
    max_linear_iterations: int = 500
    overflow_bound: float = 1e8

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not 0 < self.stability_guard <= 1:
            raise ValueError("stability_guard must lie in (0, 1]")
        if self.preconditioner not in ("dct", "none"):
            raise ValueError("preconditioner must be 'dct' or 'none'")
        if not self.linear_rtol > 0:
            raise ValueError("linear_rtol must be positive")


@dataclass(frozen=True)
class SimState:
    grid: Grid
    du: np.ndarray
    dv: np.ndarray
    t: float
    ref: SteadyState
    #: running total of mass removed by the nonnegativity clip
    clipped_mass: float = 0.0

    @property
    def u(self) -> np.ndarray:
        return self.ref.u_star + self.du

    @property
    def v(self) -> np.ndarray:
        return self.ref.v_star + self.dv

    @classmethod
    def from_fields(cls, grid: Grid, u, v, t: float, ref: SteadyState) -> "SimState":
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape != grid.shape or v.shape != grid.shape:
            raise ValueError("field shapes must match the grid")
        return cls(grid, u - ref.u_star, v - ref.v_star, float(t), ref)


# -- linear solves -------------------------------------------------------

@lru_cache(maxsize=64)
def _dct_denominator(grid: Grid, c: float) -> np.ndarray:
    return 1.0 + c * grid.laplacian_symbol


def _apply_dct_inverse(grid: Grid, c: float, r: np.ndarray) -> np.ndarray:
    coeffs = fft.dctn(r, type=2, norm="ortho")
    return fft.idctn(coeffs / _dct_denominator(grid, c), type=2, norm="ortho")


def helmholtz_solve(grid: Grid, c: float, b: np.ndarray, rtol: float = 1e-10,
                    preconditioner: str = "dct", maxiter: int = 500):
    """Solve ``(I - c Lap) x = b`` by preconditioned conjugate gradients.

    The operator preserves the mean, so the mean of ``b`` is carried over
    unchanged and CG runs on the zero-mean part only.  Returns ``(x, iterations)``.
    """
    if c < 0:
        raise ValueError("c must be nonnegative")
    b = np.asarray(b, dtype=float)
    if c == 0:
        return b.copy(), 0
    mean = float(np.mean(b))
    r = b - mean
    scale = float(np.max(np.abs(r)))
    if scale == 0.0:
        return np.full(b.shape, mean), 0
    # work at unit scale so that inner products cannot underflow
    r = r / scale
    r_norm0 = np.sqrt(np.vdot(r, r))
    x = np.zeros_like(r)

    def precondition(res):
        if preconditioner == "dct":
            return _apply_dct_inverse(grid, c, res)
        return res

    z = precondition(r)
    p = z.copy()
    rz = np.vdot(r, z)
    for it in range(1, maxiter + 1):
        ap = p - c * grid.laplacian(p)
        alpha = rz / np.vdot(p, ap)
        x += alpha * p
        r -= alpha * ap
        if np.sqrt(np.vdot(r, r)) <= rtol * r_norm0:
            break
        z = precondition(r)
        rz_new = np.vdot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    else:
        raise LinearSolveError(f"CG did not reach rtol={rtol} in {maxiter} iterations")
    x -= np.mean(x)
    return scale * x + mean, it


# -- stepping ------------------------------------------------------------

Source = Callable[[float], tuple]


def stabilizing_shift(p: Parameters, s: SteadyState) -> float:
    """Diffusion shift that keeps the second-order transport stage stable.

    The linearized taxis terms act like an off-diagonal diffusion of
    strength ``chi1 u*`` and ``chi2 v*``.  Integrated explicitly by a
    second-order IMEX pair this blows up once ``dt * |k|^2`` is large
    unless ``shift * Lap`` is moved from the explicit to the implicit side.
    The factor was chosen by scanning the per-mode amplification matrix.
    """
    rho2 = p.chi1 * p.chi2 * s.u_star * s.v_star / (p.D1 * p.D2)
    return SHIFT_FACTOR * rho2 * np.sqrt(p.D1 * p.D2)


class Stepper:
    """Caches per-run constants; :meth:`step` advances one time step."""

    def __init__(self, grid: Grid, p: Parameters, ctl: StepControl, s: SteadyState | None = None):
        self.grid = grid
        self.p = p
        self.ctl = ctl
        self.s = steady_state(p, grid.volume) if s is None else s
        self.offsets = linear_growth_offsets(p, self.s)
        self.h_min = min(grid.spacing)
        self.shift = stabilizing_shift(p, self.s)
        self.linear_iterations = 0
        self.last_cfl = 0.0

    # pieces of the right-hand side
    def kinetics(self, du, dv):
        return reaction_deviation(self.p, self.s, du, dv, self.offsets)

    def taxis(self, du, dv):
        g, p, s = self.grid, self.p, self.s
        tu = -p.chi1 * g.taxis_divergence(s.u_star + du, dv)
        tv = p.chi2 * g.taxis_divergence(s.v_star + dv, du)
        return tu, tv

    def cfl_number(self, du, dv) -> float:
        g = self.grid
        gu = max(float(np.max(np.abs(g.face_gradient(du, a)))) for a in range(g.dim))
        gv = max(float(np.max(np.abs(g.face_gradient(dv, a)))) for a in range(g.dim))
        return max(self.p.chi1 * gv, self.p.chi2 * gu) * self.ctl.dt / self.h_min

    def _solve(self, c, rhs):
        x, it = helmholtz_solve(self.grid, c, rhs, self.ctl.linear_rtol,
                                self.ctl.preconditioner, self.ctl.max_linear_iterations)
        self.linear_iterations += it
        return x

    def _explicit(self, du, dv, t, source):
        tu, tv = self.taxis(du, dv)
        if source is not None:
            su, sv = source(t)
            tu = tu + su
            tv = tv + sv
        return tu, tv

    def _imex_euler(self, du, dv, t, source):
        dt, p = self.ctl.dt, self.p
        eu, ev = self._explicit(du, dv, t, source)
        fu, fv = self.kinetics(du, dv)
        du_new = self._solve(dt * p.D1, du + dt * (eu + fu))
        dv_new = self._solve(dt * p.D2, dv + dt * (ev + fv))
        return du_new, dv_new

    def _kinetics_rk4(self, du, dv, h):
        k1 = self.kinetics(du, dv)
        k2 = self.kinetics(du + 0.5 * h * k1[0], dv + 0.5 * h * k1[1])
        k3 = self.kinetics(du + 0.5 * h * k2[0], dv + 0.5 * h * k2[1])
        k4 = self.kinetics(du + h * k3[0], dv + h * k3[1])
        return (du + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
                dv + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]))

    def _transport_ssp322(self, du, dv, t, source):
        # implicit (D + shift) Lap, explicit taxis - shift Lap; see stabilizing_shift
        dt, g = self.ctl.dt, self.grid
        cu, cv = self.p.D1 + self.shift, self.p.D2 + self.shift
        h = 0.5 * dt

        def explicit(a, b, tt):
            eu, ev = self._explicit(a, b, tt, source)
            if self.shift:
                eu = eu - self.shift * g.laplacian(a)
                ev = ev - self.shift * g.laplacian(b)
            return eu, ev

        u1 = self._solve(h * cu, du)
        v1 = self._solve(h * cv, dv)
        i1u, i1v = cu * g.laplacian(u1), cv * g.laplacian(v1)
        u2 = self._solve(h * cu, du - h * i1u)
        v2 = self._solve(h * cv, dv - h * i1v)
        e2 = explicit(u2, v2, t)
        i2u, i2v = cu * g.laplacian(u2), cv * g.laplacian(v2)
        u3 = self._solve(h * cu, du + dt * e2[0] + h * i2u)
        v3 = self._solve(h * cv, dv + dt * e2[1] + h * i2v)
        e3 = explicit(u3, v3, t + dt)
        i3u, i3v = cu * g.laplacian(u3), cv * g.laplacian(v3)
        return (du + h * (e2[0] + e3[0] + i2u + i3u),
                dv + h * (e2[1] + e3[1] + i2v + i3v))

    def step(self, state: SimState, source: Source | None = None) -> SimState:
        ctl = self.ctl
        du, dv, t = state.du, state.dv, state.t
        cfl = self.cfl_number(du, dv)
        self.last_cfl = cfl
        if cfl > ctl.stability_guard:
            suggested = ctl.dt * ctl.stability_guard / cfl * 0.9
            raise StepRejected(
                f"explicit taxis CFL number {cfl:.3g} exceeds guard {ctl.stability_guard} "
                f"at t={t:.6g}; try dt <= {suggested:.3g}", cfl, suggested)
        if ctl.scheme == "imex_euler":
            du, dv = self._imex_euler(du, dv, t, source)
        else:
            half = 0.5 * ctl.dt
            du, dv = self._kinetics_rk4(du, dv, half)
            du, dv = self._transport_ssp322(du, dv, t, source)
            du, dv = self._kinetics_rk4(du, dv, half)
        t_new = t + ctl.dt
        clipped = state.clipped_mass
        if ctl.clip_negative:
            du, dv, removed = self._clip(du, dv)
            clipped += removed
        bound = ctl.overflow_bound
        if not (np.all(np.isfinite(du)) and np.all(np.isfinite(dv))) or \
                np.max(np.abs(du)) + self.s.u_star > bound or np.max(np.abs(dv)) + self.s.v_star > bound:
            raise BlowUp(f"field magnitude exceeded {bound:g} at t={t_new:.6g}", t_new)
        return SimState(self.grid, du, dv, t_new, self.s, clipped)

    def _clip(self, du, dv):
        removed = 0.0
        lo_u, lo_v = -self.s.u_star, -self.s.v_star
        if np.any(du < lo_u):
            removed += self.grid.integrate(np.maximum(lo_u - du, 0.0))
            du = np.maximum(du, lo_u)
        if np.any(dv < lo_v):
            removed += self.grid.integrate(np.maximum(lo_v - dv, 0.0))
            dv = np.maximum(dv, lo_v)
        return du, dv, removed


def step(state: SimState, p: Parameters, ctl: StepControl, source: Source | None = None) -> SimState:
    return Stepper(state.grid, p, ctl, state.ref).step(state, source)


# -- initial data --------------------------------------------------------

ModeSpec = Sequence[tuple]


def _combine(grid: Grid, modes: ModeSpec) -> tuple[np.ndarray, float]:
    out = np.zeros(grid.shape)
    total_amp = 0.0
    for idx, amp in modes:
        idx = tuple(int(k) for k in np.atleast_1d(idx))
        if any(k < 0 for k in idx):
            raise PerturbationError(f"mode indices must be >= 0, got {idx}")
        if any(k >= n for k, n in zip(idx, grid.points)):
            raise PerturbationError(f"mode {idx} is beyond the grid resolution {grid.points}")
        out = out + grid.cosine_mode(idx, amp)
        total_amp += abs(amp)
    return out, total_amp


def perturb_steady_state(s: SteadyState, grid: Grid, epsilon: float,
                         u_modes: ModeSpec = (((1,), 1.0),), v_modes: ModeSpec = (((1,), 1.0),),
                         seed: int | None = None, random_modes: int = 0,
                         preserve_mass: bool = False, fold_v: bool = False) -> SimState:
    """Cosine perturbation of ``s`` whose W22 distance sum is ``epsilon*(1 - 1e-6)``.

    ``u_modes``/``v_modes`` are lists of ``(mode indices, relative amplitude)``.
    ``random_modes`` adds that many modes with seeded normal amplitudes to
    each component.  ``preserve_mass`` forbids the constant mode (H1, where
    the masses are prescribed).  With ``v* = 0`` a sign-changing v
    perturbation cannot be clipped without breaking the budget; ``fold_v``
    instead lifts it by the sum of its absolute amplitudes so that it is
    nonnegative before scaling.
    """
    if not epsilon > 0:
        raise PerturbationError("epsilon must be positive")
    u_modes, v_modes = list(u_modes), list(v_modes)
    if random_modes:
        rng = np.random.default_rng(seed)
        kmax = min(grid.points)
        for modes in (u_modes, v_modes):
            for _ in range(random_modes):
                idx = tuple(int(k) for k in rng.integers(1, min(8, kmax), size=grid.dim))
                modes.append((idx, float(rng.standard_normal())))
    if preserve_mass:
        for idx, _ in u_modes + v_modes:
            if all(int(k) == 0 for k in np.atleast_1d(idx)):
                raise PerturbationError("the constant mode would change the prescribed masses")
    du, _ = _combine(grid, u_modes)
    dv, v_amp = _combine(grid, v_modes)
    if fold_v and s.v_star == 0.0 and np.min(dv) < 0:
        dv = dv + v_amp
    size = grid.norms(du).w22_equiv + grid.norms(dv).w22_equiv
    if size == 0.0:
        raise PerturbationError("the requested mode combination is identically zero")
    target = epsilon * (1.0 - 1e-6)
    alpha = target / size
    du, dv = alpha * du, alpha * dv
    u, v = s.u_star + du, s.v_star + dv
    if np.min(u) < 0 or np.min(v) < 0:
        u, v = np.maximum(u, 0.0), np.maximum(v, 0.0)
        du, dv = u - s.u_star, v - s.v_star
        got = grid.norms(du).w22_equiv + grid.norms(dv).w22_equiv
        if abs(got - target) > 1e-10 * target:
            raise PerturbationError(
                "clipping to nonnegative values breaks the W22 budget "
                f"({got:.6g} instead of {target:.6g}); fold the v modes or lower epsilon")
    return SimState(grid, du, dv, 0.0, s)


# -- trajectories --------------------------------------------------------

@dataclass
class TimeSeries:
    records: list[FunctionalRecord]
    weights: WeightSet
    eta: float
    exit_time: float | None = None
    snapshots: dict = field(default_factory=dict)
    clipped_mass: float = 0.0
    steps: int = 0
    max_cfl: float = 0.0
    final_state: SimState | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([r.t for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def distance(self) -> np.ndarray:
        return self.column("w22_u") + self.column("w22_v")


def _count(span: float, dt: float, what: str) -> int:
    n = int(round(span / dt))
    if n < 1 or abs(n * dt - span) > 1e-9 * max(span, dt):
        raise ValueError(f"{what} {span} is not a positive multiple of dt={dt}")
    return n


def simulate(initial: SimState, p: Parameters, ctl: StepControl, t_end: float,
             sample_interval: float, eta: float | None = None, weights: WeightSet | None = None,
             snapshot_times: Sequence[float] = (), source: Source | None = None) -> TimeSeries:
    """Step from ``initial`` to ``t_end``, recording functionals every ``sample_interval``.

    Leaving the eta-tube is recorded in ``exit_time`` and does not stop the run.
    """
    if not t_end > initial.t:
        raise ValueError("t_end must exceed the initial time")
    s = initial.ref
    stepper = Stepper(initial.grid, p, ctl, s)
    if weights is None:
        weights = weights_for_regime(p, s, classify_regime(p))
    eta = default_eta(s) if eta is None else eta
    n_steps = _count(t_end - initial.t, ctl.dt, "simulated span")
    every = _count(sample_interval, ctl.dt, "sample interval")
    snap_steps = {_count(ts - initial.t, ctl.dt, "snapshot time") if ts > initial.t else 0: ts
                  for ts in snapshot_times}
    series = TimeSeries([], weights, eta)
    state = initial

    def observe(k, st):
        if k % every == 0 or k == n_steps:
            rec = record(st, s, weights)
            series.records.append(rec)
            if series.exit_time is None and rec.linf_u + rec.linf_v >= eta:
                series.exit_time = rec.t
        if k in snap_steps:
            series.snapshots[snap_steps[k]] = (st.u.copy(), st.v.copy())

    observe(0, state)
    for k in range(1, n_steps + 1):
        state = stepper.step(state, source)
        series.max_cfl = max(series.max_cfl, stepper.last_cfl)
        observe(k, state)
    series.steps = n_steps
    series.clipped_mass = state.clipped_mass
    series.final_state = state
    return series


# -- checkpoints ---------------------------------------------------------

def save_checkpoint(path, state: SimState, p: Parameters, ctl: StepControl,
                    seed: int | None = None, extra: dict | None = None) -> tuple[Path, Path]:
    """Write ``<path>.csv`` (deviation fields) and ``<path>.json`` (metadata)."""
    path = Path(path)
    g = state.grid
    lines = ["du,dv"]
    for a, b in zip(np.ravel(state.du, order="F"), np.ravel(state.dv, order="F")):
        lines.append(f"{a:.17g},{b:.17g}")
    csv_path = path.with_suffix(".csv")
    csv_path.write_text("\n".join(lines) + "\n")
    meta = {
        "t": state.t,
        "clipped_mass": state.clipped_mass,
        "steady_state": [state.ref.u_star, state.ref.v_star],
        "grid": {"points": list(g.points), "lengths": list(g.lengths)},
        "parameters": p.as_dict(),
        "step_control": asdict(ctl),
        "seed": seed,
        "extra": extra or {},
    }
    json_path = path.with_suffix(".json")
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return csv_path, json_path


def load_checkpoint(path):
    """Inverse of :func:`save_checkpoint`; returns ``(state, parameters, step_control, meta)``."""
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = Grid(tuple(meta["grid"]["points"]), tuple(meta["grid"]["lengths"]))
    rows = path.with_suffix(".csv").read_text().splitlines()[1:]
    data = np.array([[float(x) for x in row.split(",")] for row in rows if row])
    if data.shape != (int(np.prod(grid.shape)), 2):
        raise ValueError("checkpoint field size does not match its grid")
    du = np.reshape(data[:, 0], grid.shape, order="F")
    dv = np.reshape(data[:, 1], grid.shape, order="F")
    ref = SteadyState(*meta["steady_state"])
    state = SimState(grid, du, dv, meta["t"], ref, meta["clipped_mass"])
    return state, Parameters(**meta["parameters"]), StepControl(**meta["step_control"]), meta
