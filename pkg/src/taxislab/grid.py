"""Cell-centered finite differences on boxes with zero-flux boundaries.

Fields are plain ``numpy`` arrays of shape ``grid.shape``.  Every operator
closes the boundary by even reflection (ghost value = adjacent interior
value), i.e. all boundary-face fluxes are zero.  Energies built from
gradients use the face differences that the Laplacian is assembled from,
so that

    integrate(f * laplacian(g)) == -grad_inner(f, g)

holds to rounding for any pair of fields.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    points: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        points = tuple(int(n) for n in np.atleast_1d(self.points))
        lengths = tuple(float(x) for x in np.atleast_1d(self.lengths))
        if len(lengths) == 1 and len(points) > 1:
            lengths = lengths * len(points)
        if not 1 <= len(points) <= 3:
            raise ValueError("only 1, 2 and 3 dimensional boxes are supported")
        if len(points) != len(lengths):
            raise ValueError("points and lengths must have one entry per axis")
        if any(n < 2 for n in points):
            raise ValueError("need at least two cells per axis")
        if any(not x > 0 for x in lengths):
            raise ValueError("lengths must be positive")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def uniform(cls, n: int, length: float = 1.0, dim: int = 1) -> "Grid":
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.points)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.points

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.points))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(tuple(n * factor for n in self.points), self.lengths)

    def centers(self, axis: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        return (np.arange(self.points[axis]) + 0.5) * h

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*(self.centers(a) for a in range(self.dim)), indexing="ij"))

    def constant(self, value: float) -> np.ndarray:
        return np.full(self.shape, float(value))

    def cosine_mode(self, modes, amplitude: float = 1.0) -> np.ndarray:
        """``amplitude * prod_k cos(pi * modes[k] * x_k / L_k)`` at cell centers."""
        modes = tuple(int(k) for k in np.atleast_1d(modes))
        if len(modes) == 1 and self.dim > 1:
            modes = modes + (0,) * (self.dim - 1)
        if len(modes) != self.dim:
            raise ValueError(f"mode tuple {modes} does not match dimension {self.dim}")
        out = np.full(self.shape, float(amplitude))
        for axis, k in enumerate(modes):
            if k == 0:
                continue
            c = np.cos(np.pi * k * self.centers(axis) / self.lengths[axis])
            out = out * c.reshape([-1 if a == axis else 1 for a in range(self.dim)])
        return out

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        """Eigenvalues of ``-laplacian`` on the DCT-II basis, shape ``self.shape``."""
        total = np.zeros(self.shape)
        for axis, (n, h) in enumerate(zip(self.points, self.spacing)):
            k = np.arange(n)
            lam = (4.0 / h**2) * np.sin(np.pi * k / (2 * n)) ** 2
            total = total + lam.reshape([-1 if a == axis else 1 for a in range(self.dim)])
        return total

    @property
    def first_eigenvalue(self) -> float:
        """Smallest nonzero eigenvalue of ``-laplacian``."""
        return float(min((4.0 / h**2) * np.sin(np.pi / (2 * n)) ** 2
                         for n, h in zip(self.points, self.spacing)))

    @property
    def poincare_constant(self) -> float:
        """Best discrete constant in all three links of the Poincare chain."""
        return 1.0 / self.first_eigenvalue

    # -- operators -----------------------------------------------------

    def face_gradient(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Differences across the interior faces normal to ``axis``."""
        return np.diff(f, axis=axis) / self.spacing[axis]

    def _face_divergence(self, flux: np.ndarray, axis: int) -> np.ndarray:
        pad = [(0, 0)] * self.dim
        pad[axis] = (1, 1)
        return np.diff(np.pad(flux, pad), axis=axis) / self.spacing[axis]

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            h2 = self.spacing[0] ** 2
            out = np.empty_like(f, dtype=float)
            out[1:-1] = (f[2:] - 2.0 * f[1:-1] + f[:-2]) / h2
            out[0] = (f[1] - f[0]) / h2
            out[-1] = (f[-2] - f[-1]) / h2
            return out
        return sum(self._face_divergence(self.face_gradient(f, a), a) for a in range(self.dim))

    def gradient(self, f: np.ndarray) -> list[np.ndarray]:
        """Cell-centered central differences, one array per axis."""
        out = []
        for axis, h in enumerate(self.spacing):
            pad = [(0, 0)] * self.dim
            pad[axis] = (1, 1)
            fp = np.pad(f, pad, mode="edge")
            hi = [slice(None)] * self.dim
            lo = [slice(None)] * self.dim
            hi[axis] = slice(2, None)
            lo[axis] = slice(None, -2)
            out.append((fp[tuple(hi)] - fp[tuple(lo)]) / (2.0 * h))
        return out

    def gradient_magnitude(self, f: np.ndarray) -> np.ndarray:
        return np.sqrt(sum(g * g for g in self.gradient(f)))

    def hessian_frobenius(self, f: np.ndarray) -> np.ndarray:
        """Pointwise Frobenius norm of the second-difference Hessian.

        Diagonal entries use the reflected three-point stencil, mixed ones
        the central cross stencil.  Diagnostic only.
        """
        diag = []
        for axis in range(self.dim):
            diag.append(self._face_divergence(self.face_gradient(f, axis), axis))
        total = sum(d * d for d in diag)
        grads = self.gradient(f)
        for i in range(self.dim):
            gi = self.gradient(grads[i])
            for j in range(i + 1, self.dim):
                total = total + 2.0 * gi[j] ** 2
        return np.sqrt(total)

    def taxis_divergence(self, c: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Conservative ``div(c grad p)``: arithmetic face averages of ``c``, zero boundary flux."""
        if self.dim == 1:
            h = self.spacing[0]
            flux = 0.5 * (c[1:] + c[:-1]) * (p[1:] - p[:-1]) / h
            out = np.empty_like(p, dtype=float)
            out[1:-1] = (flux[1:] - flux[:-1]) / h
            out[0] = flux[0] / h
            out[-1] = -flux[-1] / h
            return out
        out = 0.0
        for axis in range(self.dim):
            n = self.points[axis]
            lo = np.take(c, range(n - 1), axis=axis)
            hi = np.take(c, range(1, n), axis=axis)
            flux = 0.5 * (lo + hi) * self.face_gradient(p, axis)
            out = out + self._face_divergence(flux, axis)
        return out

    # -- quadrature ----------------------------------------------------

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f)) * self.cell_volume

    def mean(self, f: np.ndarray) -> float:
        return float(np.mean(f))

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return float(np.vdot(f, g)) * self.cell_volume

    def grad_inner(self, f: np.ndarray, g: np.ndarray) -> float:
        total = 0.0
        for axis in range(self.dim):
            total += float(np.vdot(self.face_gradient(f, axis), self.face_gradient(g, axis)))
        return total * self.cell_volume

    def lap_inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.inner(self.laplacian(f), self.laplacian(g))

    def gradlap_inner(self, f: np.ndarray, g: np.ndarray) -> float:
        return self.grad_inner(self.laplacian(f), self.laplacian(g))

    def norms(self, f: np.ndarray) -> "NormBundle":
        return NormBundle.of(self, f)

    # -- serialization -------------------------------------------------

    def to_csv(self, f: np.ndarray) -> str:
        """One value per line, axis 0 varying fastest, 17 significant digits."""
        buf = io.StringIO()
        for value in np.ravel(f, order="F"):
            buf.write(f"{value:.17g}\n")
        return buf.getvalue()

    def from_csv(self, text: str) -> np.ndarray:
        values = [float(line) for line in text.splitlines() if line and not line.startswith("#")]
        if len(values) != int(np.prod(self.shape)):
            raise ValueError(f"expected {np.prod(self.shape)} values, found {len(values)}")
        return np.reshape(np.array(values), self.shape, order="F")


@dataclass(frozen=True)
class NormBundle:
    l2: float
    linf: float
    h1_seminorm: float
    laplacian_l2: float
    grad_laplacian_l2: float
    w22_equiv: float
    mean: float

    @classmethod
    def of(cls, grid: Grid, f: np.ndarray) -> "NormBundle":
        # rescale first: deviations decay far below sqrt(tiny) in long runs
        scale = float(np.max(np.abs(f))) if f.size else 0.0
        if scale == 0.0 or not np.isfinite(scale):
            z = 0.0 if scale == 0.0 else scale
            return cls(z, z, z, z, z, z, grid.mean(f))
        g = f / scale
        lap = grid.laplacian(g)
        l2_sq = grid.inner(g, g)
        h1_sq = grid.grad_inner(g, g)
        lap_sq = grid.inner(lap, lap)
        gl_sq = grid.grad_inner(lap, lap)
        return cls(
            l2=scale * np.sqrt(l2_sq),
            linf=scale,
            h1_seminorm=scale * np.sqrt(h1_sq),
            laplacian_l2=scale * np.sqrt(lap_sq),
            grad_laplacian_l2=scale * np.sqrt(gl_sq),
            w22_equiv=scale * np.sqrt(l2_sq + h1_sq + lap_sq),
            mean=grid.mean(f),
        )
