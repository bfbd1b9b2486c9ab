"""Empirical best constants of discrete Poincare, W22 and Gagliardo-Nirenberg type inequalities.

Each quotient divides the left-hand side of an inequality by its
right-hand side without the constant, so the supremum over fields is the
best constant.  Sampling can only bound that supremum from below;
refinement trends (N against 2N) are the evidence that it stays finite.

Random test fields are finite cosine series

    f(x) = sum_k a_k prod_j cos(pi k_j x_j / L_j),   a_k ~ N(0,1) (1 + |k|)^-decay,

with the constant mode left out.  They are evaluated as functions of x,
so the same draw can be sampled on any grid.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import fft

from .grid import Grid

FAMILIES = ("poincare", "w22_laplacian", "gn_grad4", "gn_grad6", "gn_lap3")
POINCARE_COLUMNS = ("l2_over_grad", "grad_over_lap", "lap_over_gradlap")


class ConstantFieldError(ValueError):
    """The quotient is undefined because the field has no nonconstant part."""


@dataclass(frozen=True)
class TestFieldSpec:
    seed: int = 0
    max_mode: tuple = (16,)
    decay: float = 2.0
    count: int = 100

    __test__ = False  # keep pytest from collecting this class

    def __post_init__(self):
        max_mode = tuple(int(k) for k in np.atleast_1d(self.max_mode))
        object.__setattr__(self, "max_mode", max_mode)
        if not max_mode or any(k < 1 for k in max_mode):
            raise ValueError("max_mode must be >= 1 on every axis (empty spectrum)")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")
        if self.count < 1:
            raise ValueError("count must be >= 1")

    def modes(self, dim: int) -> list[tuple[int, ...]]:
        mm = self.max_mode if len(self.max_mode) == dim else self.max_mode[:1] * dim
        out = [k for k in itertools.product(*(range(m + 1) for m in mm)) if any(k)]
        return out

    def draw(self, dim: int = 1) -> list[dict]:
        """Coefficient sets, one per sample; independent of any grid."""
        rng = np.random.default_rng(self.seed)
        modes = self.modes(dim)
        weight = np.array([(1.0 + np.sqrt(sum(k * k for k in m))) ** -self.decay for m in modes])
        return [dict(zip(modes, rng.standard_normal(len(modes)) * weight)) for _ in range(self.count)]


def evaluate(grid: Grid, coeffs: dict) -> np.ndarray:
    out = np.zeros(grid.shape)
    for mode, a in coeffs.items():
        if any(k >= n for k, n in zip(mode, grid.points)):
            raise ValueError(f"mode {mode} is not resolved on a grid with {grid.points} points")
        out += grid.cosine_mode(mode, a)
    return out


def dominant_mode(grid: Grid, f: np.ndarray) -> tuple[int, ...]:
    """Index of the largest nonconstant DCT-II coefficient of ``f``."""
    c = np.abs(fft.dctn(f, type=2, norm="ortho"))
    c.flat[0] = 0.0
    return tuple(int(i) for i in np.unravel_index(int(np.argmax(c)), c.shape))


def _centered(grid: Grid, f: np.ndarray) -> np.ndarray:
    g = np.asarray(f, dtype=float) - grid.mean(f)
    scale = float(np.max(np.abs(g)))
    if scale == 0.0 or scale <= 1e-14 * max(float(np.max(np.abs(f))), 1e-300):
        raise ConstantFieldError("field is constant; every quotient is undefined")
    return g / scale


def poincare_ratios(grid: Grid, f: np.ndarray) -> tuple[float, float, float]:
    g = _centered(grid, f)
    lap = grid.laplacian(g)
    l2 = grid.inner(g, g)
    h1 = grid.grad_inner(g, g)
    l2_lap = grid.inner(lap, lap)
    h1_lap = grid.grad_inner(lap, lap)
    return l2 / h1, h1 / l2_lap, l2_lap / h1_lap


def w22_equivalence_ratio(grid: Grid, f: np.ndarray) -> float:
    g = _centered(grid, f)
    nb = grid.norms(g)
    return nb.w22_equiv / nb.laplacian_l2


def gn_ratios(grid: Grid, f: np.ndarray) -> tuple[float, float, float]:
    """``int|grad f|^4``, ``int|grad f|^6`` and ``int|Lap f|^3`` against their bounds.

    The bounds are ``|f - mean|_inf^2 int|Lap f|^2``,
    ``|f - mean|_inf^4 int|grad Lap f|^2`` and
    ``|f - mean|_inf int|grad Lap f|^2``.
    """
    g = _centered(grid, f)
    sup = float(np.max(np.abs(g)))
    grad2 = grid.gradient_magnitude(g) ** 2
    lap = grid.laplacian(g)
    lap2 = grid.inner(lap, lap)
    glap2 = grid.grad_inner(lap, lap)
    return (
        grid.integrate(grad2**2) / (sup**2 * lap2),
        grid.integrate(grad2**3) / (sup**4 * glap2),
        grid.integrate(np.abs(lap) ** 3) / (sup * glap2),
    )


def family_ratios(grid: Grid, f: np.ndarray) -> dict[str, tuple]:
    gn = gn_ratios(grid, f)
    return {
        "poincare": poincare_ratios(grid, f),
        "w22_laplacian": (w22_equivalence_ratio(grid, f),),
        "gn_grad4": (gn[0],),
        "gn_grad6": (gn[1],),
        "gn_lap3": (gn[2],),
    }


def measured_poincare_constant(grid: Grid) -> float:
    """Largest first-link quotient over the lowest cosine mode of every axis.

    On a cell-centered Neumann grid these modes are exact eigenvectors of
    the discrete Laplacian, so the result is the best discrete constant.
    """
    best = 0.0
    for axis in range(grid.dim):
        mode = [0] * grid.dim
        mode[axis] = 1
        best = max(best, poincare_ratios(grid, grid.cosine_mode(tuple(mode)))[0])
    return best


@dataclass
class RatioReport:
    """Empirical lower bound on the best constant, with refinement evidence."""
    family: str
    columns: tuple
    ratios: np.ndarray
    ratios_refined: np.ndarray | None
    grid_points: tuple
    spec: TestFieldSpec
    argmax: tuple = field(default=())

    @property
    def max_ratio(self) -> np.ndarray:
        return np.max(self.ratios, axis=0)

    @property
    def max_ratio_refined(self) -> np.ndarray | None:
        return None if self.ratios_refined is None else np.max(self.ratios_refined, axis=0)

    @property
    def refinement_factor(self) -> np.ndarray | None:
        if self.ratios_refined is None:
            return None
        return self.max_ratio_refined / self.max_ratio

    def to_csv(self, header=()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = list(self.columns)
        refined = self.ratios_refined is not None
        w.writerow(["row"] + cols + ([c + "_refined" for c in cols] if refined else []))
        for i, row in enumerate(self.ratios):
            vals = list(row) + (list(self.ratios_refined[i]) if refined else [])
            w.writerow([str(i)] + [f"{x:.17g}" for x in vals])
        summary = list(self.max_ratio) + (list(self.max_ratio_refined) if refined else [])
        w.writerow(["max"] + [f"{x:.17g}" for x in summary])
        buf.write(f"# grid_points={'x'.join(map(str, self.grid_points))} seed={self.spec.seed} "
                  f"max_mode={','.join(map(str, self.spec.max_mode))} decay={self.spec.decay!r} "
                  f"count={self.spec.count}\n")
        return buf.getvalue()


def _ratio_table(grid: Grid, draws: list[dict]):
    table = {name: [] for name in FAMILIES}
    for coeffs in draws:
        for name, vals in family_ratios(grid, evaluate(grid, coeffs)).items():
            table[name].append(vals)
    return {name: np.array(rows) for name, rows in table.items()}


def estimate_constants(spec: TestFieldSpec, grid: Grid, refine: bool = True) -> dict[str, RatioReport]:
    draws = spec.draw(grid.dim)
    coarse = _ratio_table(grid, draws)
    fine = _ratio_table(grid.refined(2), draws) if refine else None
    out = {}
    for name in FAMILIES:
        cols = POINCARE_COLUMNS if name == "poincare" else (name,)
        out[name] = RatioReport(
            family=name,
            columns=cols,
            ratios=coarse[name],
            ratios_refined=None if fine is None else fine[name],
            grid_points=grid.points,
            spec=spec,
        )
    # maximizing sample of the first Poincare quotient and its dominant mode
    rep = out["poincare"]
    i = int(np.argmax(rep.ratios[:, 0]))
    rep.argmax = (i, dominant_mode(grid, evaluate(grid, draws[i])))
    return out
