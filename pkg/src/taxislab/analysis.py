"""Decay-law fits, model selection and monotonicity checks for trajectories.

Two laws are fitted by linear least squares in transformed coordinates:

    exponential  d(t) = K1 exp(-K2 t)       log d   affine in t
    algebraic    d(t) = 1 / (1/K1 + K2 t)    1/d     affine in t

Both have two parameters, so the winner is simply the smaller relative
residual.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass, fields

import numpy as np

from .model import Regime, RegimeTag

MIN_SAMPLES = 10
DEFAULT_TAIL = 0.8


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class RateFit:
    model: str
    K1: float
    K2: float
    residual: float
    t_start: float
    t_end: float
    samples: int

    @property
    def accepted(self) -> bool:
        return self.K2 > 0

    @property
    def window(self) -> tuple[float, float]:
        return self.t_start, self.t_end


def _prepare(t, d, min_samples):
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    if t.shape != d.shape or t.ndim != 1:
        raise FitError("t and d must be one-dimensional and of equal length")
    if len(t) < min_samples:
        raise FitError(f"need at least {min_samples} samples, got {len(t)}")
    if not np.all(np.isfinite(d)) or np.any(d <= 0):
        raise FitError("decay series must be finite and strictly positive")
    return t, d


def _affine(t, q):
    tc = t - t.mean()
    slope = float(np.dot(tc, q - q.mean()) / np.dot(tc, tc))
    intercept = float(q.mean() - slope * t.mean())
    misfit = q - (intercept + slope * t)
    span = float(np.ptp(q))
    rms = float(np.sqrt(np.mean(misfit**2)))
    return slope, intercept, (rms / span if span > 0 else 0.0)


def fit_exponential(t, d, min_samples: int = MIN_SAMPLES) -> RateFit:
    t, d = _prepare(t, d, min_samples)
    slope, intercept, res = _affine(t, np.log(d))
    return RateFit("exponential", float(np.exp(intercept)), -slope, res, t[0], t[-1], len(t))


def fit_algebraic(t, d, min_samples: int = MIN_SAMPLES) -> RateFit:
    t, d = _prepare(t, d, min_samples)
    slope, intercept, res = _affine(t, 1.0 / d)
    k1 = 1.0 / intercept if intercept != 0 else float("inf")
    return RateFit("algebraic", k1, slope, res, t[0], t[-1], len(t))


def tail_window(n: int, fraction: float = DEFAULT_TAIL) -> slice:
    if not 0 < fraction <= 1:
        raise ValueError("tail fraction must lie in (0, 1]")
    return slice(n - int(round(fraction * n)), n)


@dataclass(frozen=True)
class ModelSelection:
    exponential: RateFit
    algebraic: RateFit
    winner: str
    predicted: str
    tail_fraction: float

    @property
    def matches_prediction(self) -> bool:
        return self.winner == self.predicted

    @property
    def residual_factor(self) -> float:
        """Loser residual over winner residual."""
        fits = {"exponential": self.exponential, "algebraic": self.algebraic}
        loser = "algebraic" if self.winner == "exponential" else "exponential"
        w = fits[self.winner].residual
        return fits[loser].residual / w if w > 0 else float("inf")

    def winner_fit(self) -> RateFit:
        return self.exponential if self.winner == "exponential" else self.algebraic


def predicted_model(regime: Regime | RegimeTag) -> str:
    tag = regime.tag if isinstance(regime, Regime) else RegimeTag(regime)
    return "algebraic" if tag is RegimeTag.DEGENERATE_EXCLUSION else "exponential"


def select_rate_model(t, d, regime, tail_fraction: float = DEFAULT_TAIL) -> ModelSelection:
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    w = tail_window(len(t), tail_fraction)
    exp_fit = fit_exponential(t[w], d[w])
    alg_fit = fit_algebraic(t[w], d[w])
    winner = "exponential" if exp_fit.residual <= alg_fit.residual else "algebraic"
    return ModelSelection(exp_fit, alg_fit, winner, predicted_model(regime), tail_fraction)


def reciprocal_r2(t, q, tail_fraction: float = DEFAULT_TAIL) -> float:
    """Coefficient of determination of the affine fit of 1/q against t on the tail."""
    t = np.asarray(t, dtype=float)
    q = np.asarray(q, dtype=float)
    w = tail_window(len(t), tail_fraction)
    t, r = t[w], 1.0 / q[w]
    slope, intercept, _ = _affine(t, r)
    ss_res = float(np.sum((r - intercept - slope * t) ** 2))
    ss_tot = float(np.sum((r - r.mean()) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


@dataclass(frozen=True)
class MonotoneReport:
    passed: bool
    tolerance: float
    worst_rise: float
    first_violation: int | None
    violations: tuple


def check_monotone_decay(y, tol: float = 1e-10) -> MonotoneReport:
    """Flag every step where ``y`` rises by more than ``tol * y[0]``.

    Indices refer to the later sample of each offending pair.
    """
    y = np.asarray(y, dtype=float)
    rises = np.diff(y)
    allowed = tol * abs(y[0])
    bad = np.nonzero(rises > allowed)[0] + 1
    return MonotoneReport(
        passed=bad.size == 0,
        tolerance=allowed,
        worst_rise=float(np.max(rises)) if rises.size else 0.0,
        first_violation=int(bad[0]) if bad.size else None,
        violations=tuple(int(i) for i in bad),
    )


@dataclass(frozen=True)
class OdeComparison:
    K2: float
    slack: np.ndarray
    max_slack: float
    min_local_rate: float

    def holds(self, tol: float) -> bool:
        return self.max_slack <= tol


def check_ode_comparison(t, y) -> OdeComparison:
    """Endpoint rate ``K2`` with ``y(T) = exp(-2 K2 T) y(0)`` and pointwise slack of ``y' + 2 K2 y``."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(t) < 3:
        raise FitError("need at least three samples")
    if np.any(y < 0):
        raise FitError("y must be nonnegative")
    span = t[-1] - t[0]
    K2 = -np.log(y[-1] / y[0]) / (2.0 * span) if y[-1] > 0 else float("inf")
    dy = (y[2:] - y[:-2]) / (t[2:] - t[:-2])
    slack = np.full(y.shape, np.nan)
    slack[1:-1] = dy + 2.0 * K2 * y[1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        local = -dy / (2.0 * y[1:-1])
    local = local[np.isfinite(local)]
    return OdeComparison(
        K2=float(K2),
        slack=slack,
        max_slack=float(np.nanmax(slack)),
        min_local_rate=float(np.min(local)) if local.size else float("nan"),
    )


FIT_COLUMNS = tuple(f.name for f in fields(RateFit))


def fits_to_csv(fits, header=()) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIT_COLUMNS)
    for fit in fits:
        w.writerow([x if isinstance(x, str) else (str(x) if isinstance(x, int) else f"{x:.17g}")
                    for x in astuple(fit)])
    return buf.getvalue()


def summary_block(sel: ModelSelection) -> str:
    lines = [
        f"tail window      : last {sel.tail_fraction:.0%} of samples "
        f"(t in [{sel.exponential.t_start:.6g}, {sel.exponential.t_end:.6g}])",
        f"exponential fit  : K1={sel.exponential.K1:.6g} K2={sel.exponential.K2:.6g} "
        f"residual={sel.exponential.residual:.3e}",
        f"algebraic fit    : K1={sel.algebraic.K1:.6g} K2={sel.algebraic.K2:.6g} "
        f"residual={sel.algebraic.residual:.3e}",
        f"winner           : {sel.winner} (residual factor {sel.residual_factor:.3g})",
        f"expected         : {sel.predicted} -> {'match' if sel.matches_prediction else 'MISMATCH'}",
    ]
    return "\n".join(lines)
