"""The acceptance suite: nine numbered criteria, each with its own runtime budget.

Run with ``taxislab accept`` or ``pytest tests/test_acceptance.py -s``.
Tolerances are fixed constants below; they are not tuned per run.
"""

from __future__ import annotations

import csv
import filecmp
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import (
    check_monotone_decay,
    fit_exponential,
    reciprocal_r2,
    tail_window,
)
from .config import resolve_config
from .functionals import cancellation_residuals, mass_ode_residual, weights_for_regime
from .grid import Grid
from .harness import execute, run_simulate
from .inequalities import (
    FAMILIES,
    TestFieldSpec,
    estimate_constants,
    evaluate,
    family_ratios,
    poincare_ratios,
    w22_equivalence_ratio,
)
from .model import (
    Parameters,
    RegimeTag,
    classify_regime,
    discriminant,
    jacobian_at_steady_state,
    steady_state,
)
from .oracles import ManufacturedSolution, newton_steady_states, random_parameters
from .solver import SimState, StepControl, Stepper, perturb_steady_state

STEADY_TOL = 1e-10
CANCEL_TOL = 1e-12
MASS_TOL = 1e-10
MONOTONE_TOL = 1e-10
FIT_RESIDUAL_MAX = 0.05
WIN_FACTOR = 5.0
R2_MIN = 0.99
MASS_RATIO = (3.5, 4.5)
POINCARE_SLACK = 0.05
SATURATION_TOL = 0.02
SCALE_TOL = 1e-9
REFINE_BAND = (0.95, 2.0)
ORDER_EULER = (1.0, 0.15)
ORDER_STRANG = (2.0, 0.2)
ORDER_SPACE = (2.0, 0.1)

COEXISTENCE = Parameters(lambda1=1, lambda2=1, mu1=1, mu2=1, a1=1, a2=0.5)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float
    budget: float

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] criterion {self.number}: {self.title} | {self.detail} | "
                f"{self.seconds:.1f} s (budget {self.budget:g} s)")


def _finish(number, title, checks, budget, t0) -> CriterionResult:
    seconds = time.perf_counter() - t0
    ok_time = seconds < budget
    parts = [f"{name}={'ok' if ok else 'FAILED'} ({info})" for name, ok, info in checks]
    parts.append(f"runtime={'ok' if ok_time else 'FAILED'}")
    return CriterionResult(number, title, all(ok for _, ok, _ in checks) and ok_time,
                           "; ".join(parts), seconds, budget)


# 1 ----------------------------------------------------------------------

def criterion_1(draws: int = 1000, seed: int = 1) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    kinds = ("H1", "coexistence", "strict", "degenerate")
    draws_ = [(random_parameters(rng, kinds[i % 4]), float(rng.uniform(0.5, 3.0))) for i in range(draws)]
    kinetic = [p for p, _ in draws_ if not p.is_h1]
    roots = iter(newton_steady_states(kinetic))
    worst, sign_fail, oracle_fail = 0.0, 0, 0
    for p, volume in draws_:
        s = steady_state(p, volume)
        if p.is_h1:
            # the constant whose integral over the domain is the mass
            grid = Grid((8,), (volume,))
            one = grid.integrate(grid.constant(1.0))
            ref = np.array([p.m1 / one, p.m2 / one])
        else:
            ref = next(roots)
            if isinstance(ref, ArithmeticError):
                oracle_fail += 1
                continue
        err = np.max(np.abs(np.array([s.u_star, s.v_star]) - ref)) / max(1.0, np.max(np.abs(ref)))
        worst = max(worst, err)
        jac = jacobian_at_steady_state(p, s)
        strict_expected = not p.is_h1 and classify_regime(p).tag is not RegimeTag.DEGENERATE_EXCLUSION
        if not jac.weak_signs or jac.strict_signs != strict_expected:
            sign_fail += 1
    checks = [
        ("oracle", worst <= STEADY_TOL and oracle_fail == 0,
         f"max rel diff {worst:.2e} <= {STEADY_TOL:g}, oracle failures {oracle_fail}"),
        ("signs", sign_fail == 0, f"{sign_fail} sign violations in {draws} draws"),
    ]
    return _finish(1, "steady states vs Newton oracle", checks, 5.0, t0)


# 2 ----------------------------------------------------------------------

def criterion_2(draws: int = 1000, seed: int = 2) -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(draws):
        p = random_parameters(rng, "coexistence")
        s = steady_state(p)
        w = weights_for_regime(p, s)
        res = cancellation_residuals(w, p, s)
        us, vs = s.u_star, s.v_star
        scales = (
            w.A1 * p.a1 * us + w.A2 * p.a2 * vs,
            (w.A1 * p.chi1 + w.B1 * p.a1) * us + (w.A2 * p.chi2 + w.B2 * p.a2) * vs,
            (w.B1 * p.chi1 + w.C1 * p.a1) * us + (w.B2 * p.chi2 + w.C2 * p.a2) * vs,
            w.C1 * p.chi1 * us + w.C2 * p.chi2 * vs,
        )
        worst = max(worst, max(abs(r) / sc for r, sc in zip(res, scales)))
    checks = [("residuals", worst <= CANCEL_TOL, f"max relative residual {worst:.2e} <= {CANCEL_TOL:g}")]
    return _finish(2, "cancellation identities of the coexistence weights", checks, 1.0, t0)


# 3 ----------------------------------------------------------------------

def criterion_3() -> CriterionResult:
    t0 = time.perf_counter()
    res = execute(resolve_config("h1"))
    ser = res.series
    mu, mv = ser.column("mass_u"), ser.column("mass_v")
    drift = max(np.max(np.abs(mu - mu[0])) / mu[0], np.max(np.abs(mv - mv[0])) / mv[0])
    mono = check_monotone_decay(ser.column("y"), MONOTONE_TOL)
    sel = res.selection
    ex = sel.exponential
    checks = [
        ("mass", drift <= MASS_TOL, f"relative drift {drift:.2e} <= {MASS_TOL:g}"),
        ("monotone y", mono.passed, f"worst rise {mono.worst_rise:.2e} vs {mono.tolerance:.2e}"),
        ("exponential wins", sel.winner == "exponential" and ex.K2 > 0 and ex.residual <= FIT_RESIDUAL_MAX,
         f"winner {sel.winner}, K2={ex.K2:.4g}, residual {ex.residual:.2e} <= {FIT_RESIDUAL_MAX:g}"),
        ("clip", ser.clipped_mass == 0.0, f"clipped mass {ser.clipped_mass:g}"),
    ]
    return _finish(3, "H1 conservation and monotone decay", checks, 60.0, t0)


# 4 ----------------------------------------------------------------------

def _differencing_bound(y, tail):
    # size of a second-order differencing error: |third difference| / 6
    yt = y[tail]
    if len(yt) < 4:
        return 0.0
    return float(np.max(np.abs(np.diff(yt, 3)))) / 6.0


def criterion_4() -> CriterionResult:
    t0 = time.perf_counter()
    res = execute(resolve_config("coexistence"))
    ser = res.series
    sel = res.selection
    y = ser.column("y")
    tail = tail_window(len(y), res.config.monitoring.tail_fraction)
    tol_abs = max(MONOTONE_TOL * y[0], _differencing_bound(y, tail))
    rises = np.diff(y[tail])
    worst = float(np.max(rises))
    checks = [
        ("inside tube", ser.exit_time is None, f"exit_time {ser.exit_time}"),
        ("exponential wins", sel.winner == "exponential" and sel.residual_factor >= WIN_FACTOR,
         f"winner {sel.winner}, K2={sel.exponential.K2:.4g}, factor {sel.residual_factor:.3g} >= {WIN_FACTOR:g}"),
        ("monotone y on tail", worst <= tol_abs, f"worst rise {worst:.2e} vs {tol_abs:.2e}"),
        ("clip", ser.clipped_mass == 0.0, f"clipped mass {ser.clipped_mass:g}"),
    ]
    return _finish(4, "coexistence exponential decay", checks, 60.0, t0)


# 5 ----------------------------------------------------------------------

def _tail_rms(t, r, fraction):
    w = tail_window(len(r), fraction)
    return float(np.sqrt(np.mean(r[w] ** 2)))


def criterion_5() -> CriterionResult:
    t0 = time.perf_counter()
    cfg = resolve_config("degenerate")
    res = execute(cfg)
    ser = res.series
    sel = res.selection
    frac = cfg.monitoring.tail_fraction
    r2 = reciprocal_r2(ser.times, ser.column("l1_v"), frac)
    s = steady_state(cfg.parameters)
    _, r_coarse = mass_ode_residual(ser, cfg.parameters, s, "v")
    st = cfg.stepping
    half = cfg.with_value("stepping.dt", st.dt / 2).with_value(
        "stepping.sample_interval", st.sample_interval / 2)
    ser_half = execute(half).series
    _, r_fine = mass_ode_residual(ser_half, cfg.parameters, s, "v")
    ratio = _tail_rms(None, r_coarse, frac) / _tail_rms(None, r_fine, frac)
    checks = [
        ("algebraic wins", sel.winner == "algebraic" and sel.residual_factor >= WIN_FACTOR,
         f"winner {sel.winner}, K2={sel.algebraic.K2:.4g}, factor {sel.residual_factor:.3g} >= {WIN_FACTOR:g}"),
        ("1/|v|_L1 affine", r2 >= R2_MIN, f"R^2 {r2:.6f} >= {R2_MIN}"),
        ("mass ODE order", MASS_RATIO[0] <= ratio <= MASS_RATIO[1],
         f"residual ratio dt/(dt/2) {ratio:.3f} in [{MASS_RATIO[0]}, {MASS_RATIO[1]}]"),
        ("clip", ser.clipped_mass == 0.0 and ser_half.clipped_mass == 0.0,
         f"clipped mass {ser.clipped_mass:g}, {ser_half.clipped_mass:g}"),
    ]
    return _finish(5, "degenerate algebraic decay", checks, 300.0, t0)


# 6 ----------------------------------------------------------------------

def criterion_6() -> CriterionResult:
    t0 = time.perf_counter()
    cfg = resolve_config("strict_exclusion")
    res = execute(cfg)
    ser = res.series
    w = tail_window(len(ser.records), cfg.monitoring.tail_fraction)
    t = ser.times[w]
    fv = fit_exponential(t, np.sqrt(ser.column("e_v0"))[w])
    fd = fit_exponential(t, ser.distance()[w])
    checks = [
        ("regime", res.regime == RegimeTag.STRICT_EXCLUSION.value,
         f"{res.regime}, discriminant {discriminant(cfg.parameters):.3g}"),
        ("v L2 exponential", fv.K2 > 0 and fv.residual <= FIT_RESIDUAL_MAX,
         f"K2={fv.K2:.4g}, residual {fv.residual:.2e}"),
        ("W22 distance exponential", fd.K2 > 0 and fd.residual <= FIT_RESIDUAL_MAX,
         f"K2={fd.K2:.4g}, residual {fd.residual:.2e}"),
        ("clip", ser.clipped_mass == 0.0, f"clipped mass {ser.clipped_mass:g}"),
    ]
    return _finish(6, "strict-exclusion exponential decay", checks, 60.0, t0)


# 7 ----------------------------------------------------------------------

def criterion_7() -> CriterionResult:
    t0 = time.perf_counter()
    grid = Grid.uniform(128)
    spec = TestFieldSpec(seed=0, max_mode=(16,), decay=2.0, count=100)
    reports = estimate_constants(spec, grid)
    pmax = float(reports["poincare"].max_ratio[0])
    bound = (1 + POINCARE_SLACK) / np.pi**2
    _, mode = reports["poincare"].argmax

    draws = spec.draw(1)
    worst_scale = 0.0
    for coeffs in draws[:10]:
        f = evaluate(grid, coeffs)
        base = family_ratios(grid, f)
        for alpha, shift in ((1e3, 0.0), (-2.5e-4, 7.0)):
            other = family_ratios(grid, alpha * f + shift)
            for name in FAMILIES:
                a, b = np.array(base[name]), np.array(other[name])
                worst_scale = max(worst_scale, float(np.max(np.abs(a - b) / np.abs(a))))
    factors = np.concatenate([reports[n].refinement_factor for n in FAMILIES])
    lo, hi = float(np.min(factors)), float(np.max(factors))

    fine = Grid.uniform(1024)
    sat = []
    for k, target in ((1, 1 / np.pi**2), (2, 1 / (4 * np.pi**2))):
        for r in poincare_ratios(fine, fine.cosine_mode(k)):
            sat.append(abs(r / target - 1))
    w22_target = np.sqrt(1 / np.pi**4 + 1 / np.pi**2 + 1)
    sat.append(abs(w22_equivalence_ratio(fine, fine.cosine_mode(1)) / w22_target - 1))
    single = estimate_constants(TestFieldSpec(seed=3, max_mode=(1,), count=5), grid, refine=False)
    sat.append(abs(float(single["poincare"].max_ratio[0]) * np.pi**2 - 1))
    checks = [
        ("Poincare max", pmax <= bound, f"{pmax:.6f} <= {bound:.6f}"),
        ("maximizer", mode == (1,), f"dominant mode of maximizing sample {mode}"),
        ("scale invariance", worst_scale <= SCALE_TOL, f"max relative change {worst_scale:.1e} <= {SCALE_TOL:g}"),
        ("refinement", REFINE_BAND[0] <= lo and hi <= REFINE_BAND[1],
         f"max-ratio factors N->2N in [{lo:.4f}, {hi:.4f}]"),
        ("saturation", max(sat) <= SATURATION_TOL, f"worst relative deviation {max(sat):.2e} <= {SATURATION_TOL:g}"),
    ]
    return _finish(7, "discrete inequality campaign", checks, 30.0, t0)


# 8 ----------------------------------------------------------------------

def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def temporal_errors(scheme: str, n: int = 64, dt0: float = 0.01, levels: int = 4, t_end: float = 1.0):
    p = COEXISTENCE
    grid = Grid.uniform(n)
    s = steady_state(p)
    # large enough that the nonlinear terms matter, small enough to stay smooth
    eps = 0.2 * np.sqrt((1 + np.pi**2 + np.pi**4) / 2)
    init = perturb_steady_state(s, grid, eps, [((1,), 1.0)], [((2,), 0.5)])

    def run(dt):
        stepper = Stepper(grid, p, StepControl(dt, scheme, stability_guard=1.0), s)
        st = init
        for _ in range(int(round(t_end / dt))):
            st = stepper.step(st)
        return st

    ref = run(dt0 / 64)
    dts, errs = [], []
    for k in range(levels):
        dt = dt0 / 2**k
        st = run(dt)
        errs.append(np.sqrt(grid.inner(st.du - ref.du, st.du - ref.du) + grid.inner(st.dv - ref.dv, st.dv - ref.dv)))
        dts.append(dt)
    return np.array(dts), np.array(errs)


def spatial_errors(sizes=(16, 32, 64, 128), steps_per_cell: int = 32, t_end: float = 0.5):
    """Manufactured-solution errors with dt = h / steps_per_cell, so the time error also scales like h^2."""
    p = COEXISTENCE
    s = steady_state(p)
    mms = ManufacturedSolution(p, s.u_star, s.v_star)
    hs, errs = [], []
    for n in sizes:
        grid = Grid.uniform(n)
        dt = grid.spacing[0] / steps_per_cell
        x = grid.centers(0)
        u0, v0 = mms.exact(x, 0.0)
        init = SimState.from_fields(grid, u0, v0, 0.0, s)
        stepper = Stepper(grid, p, StepControl(dt, "strang_imex", stability_guard=1.0), s)
        source = mms.source_on(grid)
        st = init
        for _ in range(int(round(t_end / dt))):
            st = stepper.step(st, source)
        ue, ve = mms.exact(x, st.t)
        eu, ev = st.u - ue, st.v - ve
        errs.append(np.sqrt(grid.inner(eu, eu) + grid.inner(ev, ev)))
        hs.append(grid.spacing[0])
    return np.array(hs), np.array(errs)


def criterion_8() -> CriterionResult:
    t0 = time.perf_counter()
    dts, e1 = temporal_errors("imex_euler")
    q1 = _slope(dts, e1)
    dts, e2 = temporal_errors("strang_imex")
    q2 = _slope(dts, e2)
    hs, es = spatial_errors()
    q3 = _slope(hs, es)
    checks = [
        ("imex_euler order", abs(q1 - ORDER_EULER[0]) <= ORDER_EULER[1], f"{q1:.3f} = {ORDER_EULER[0]} +- {ORDER_EULER[1]}"),
        ("strang_imex order", abs(q2 - ORDER_STRANG[0]) <= ORDER_STRANG[1], f"{q2:.3f} = {ORDER_STRANG[0]} +- {ORDER_STRANG[1]}"),
        ("spatial order", abs(q3 - ORDER_SPACE[0]) <= ORDER_SPACE[1], f"{q3:.3f} = {ORDER_SPACE[0]} +- {ORDER_SPACE[1]}"),
    ]
    return _finish(8, "solver orders of accuracy", checks, 120.0, t0)


# 9 ----------------------------------------------------------------------

def criterion_9() -> CriterionResult:
    t0 = time.perf_counter()
    cfg = resolve_config("coexistence")
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp) / "a", Path(tmp) / "b"
        run_simulate(cfg, a)
        run_simulate(cfg, b)
        names = sorted(p.relative_to(a).as_posix() for p in a.rglob("*") if p.is_file())
        names_b = sorted(p.relative_to(b).as_posix() for p in b.rglob("*") if p.is_file())
        same = names == names_b and all(filecmp.cmp(a / n, b / n, shallow=False) for n in names)
        csvs = [n for n in names if n.endswith(".csv")]
    checks = [("byte-identical", same, f"{len(names)} files compared, {len(csvs)} CSV")]
    return _finish(9, "determinism of a repeated run", checks, 120.0, t0)


CRITERIA = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5,
    6: criterion_6, 7: criterion_7, 8: criterion_8, 9: criterion_9,
}


def _run_one(number: int) -> CriterionResult:
    return CRITERIA[number]()


def run_all(workers: int = 1, only=None) -> list[CriterionResult]:
    """Run the selected criteria; with workers > 1 they run in separate processes.

    Runtime budgets are measured per criterion, so concurrent runs can eat
    into each other's budget on a small machine.
    """
    numbers = sorted(CRITERIA) if not only else sorted(only)
    unknown = [n for n in numbers if n not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}; choose from {sorted(CRITERIA)}")
    if workers <= 1:
        return [_run_one(n) for n in numbers]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, numbers))


def write_report(results, out_dir: Path) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "acceptance.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["criterion", "title", "passed", "seconds", "budget", "detail"])
        for r in results:
            w.writerow([r.number, r.title, int(r.passed), f"{r.seconds:.3f}", r.budget, r.detail])
    return path
