"""Uniform grids, second-order stencils, quadrature and tridiagonal solves."""

from dataclasses import dataclass
import warnings

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg.lapack import dgtsv

from .errors import (
    DiagonalDominanceWarning,
    InvalidParametersError,
    NonpositiveCoefficientError,
    SingularPivotError,
    SizeMismatchError,
)

__all__ = [
    "Grid",
    "TridiagonalSystem",
    "diff1",
    "diff2",
    "div_flux",
    "trapz",
    "cumtrapz",
    "solve_tridiagonal",
    "tridiagonal_residual",
]


@dataclass(frozen=True)
class Grid:
    """Uniform grid on ``[xi_min, xi_max]`` with ``n`` nodes."""

    xi_min: float
    xi_max: float
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InvalidParametersError(f"grid needs n >= 3 nodes, got {self.n}")
        if not (np.isfinite(self.xi_min) and np.isfinite(self.xi_max)):
            raise InvalidParametersError("grid bounds must be finite")
        if not self.xi_max > self.xi_min:
            raise InvalidParametersError(
                f"xi_max must exceed xi_min, got [{self.xi_min}, {self.xi_max}]"
            )
        if not self.xi_min <= 0 <= self.xi_max:
            raise InvalidParametersError("grid must cover xi = 0, where the profile is anchored")

    @property
    def dx(self):
        return (self.xi_max - self.xi_min) / (self.n - 1)

    @property
    def xi(self):
        return np.linspace(self.xi_min, self.xi_max, self.n)

    def refined(self, factor=2):
        """Same interval with every cell split into ``factor`` cells."""
        return Grid(self.xi_min, self.xi_max, (self.n - 1) * factor + 1)

    def index_of(self, x):
        return int(np.clip(np.rint((x - self.xi_min) / self.dx), 0, self.n - 1))


def _check(f, grid, name="f"):
    f = np.asarray(f, dtype=float)
    if f.shape != (grid.n,):
        raise SizeMismatchError(f"{name} has shape {f.shape}, grid has {grid.n} nodes")
    return f


def diff1(f, grid):
    """First derivative: central inside, second-order one-sided at the ends."""
    return np.gradient(_check(f, grid), grid.dx, edge_order=2)


def diff2(f, grid):
    """Second derivative: three-point stencil inside, four-point one-sided at the ends.

    Grids with only three nodes copy the single interior value to the ends.
    """
    f = _check(f, grid)
    h2 = grid.dx**2
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - 2 * f[1:-1] + f[:-2]) / h2
    if grid.n >= 4:
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / h2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / h2
    else:
        out[0] = out[-1] = out[1]
    return out


def _extrapolate_ends(out):
    if out.size >= 5:
        out[0] = 3 * out[1] - 3 * out[2] + out[3]
        out[-1] = 3 * out[-2] - 3 * out[-3] + out[-4]
    else:
        out[0], out[-1] = out[1], out[-2]
    return out


def div_flux(coef, f, grid):
    """Conservative discretisation of ``(coef f_x)_x``.

    Face coefficients are arithmetic means of the neighbouring nodes.  The
    two end nodes have no outer face and receive a quadratic extrapolation
    of the interior values.
    """
    coef = _check(coef, grid, "coef")
    f = _check(f, grid)
    if np.any(~(coef > 0)):
        raise NonpositiveCoefficientError("div_flux needs a strictly positive coefficient")
    a = 0.5 * (coef[1:] + coef[:-1])
    flux = a * np.diff(f) / grid.dx
    out = np.empty_like(f)
    out[1:-1] = np.diff(flux) / grid.dx
    return _extrapolate_ends(out)


def trapz(f, grid):
    """Trapezoid rule over the whole grid."""
    return float(np.trapezoid(_check(f, grid), dx=grid.dx))


def cumtrapz(f, grid):
    """Running trapezoid integral, zero at ``xi_min``."""
    return cumulative_trapezoid(_check(f, grid), dx=grid.dx, initial=0.0)


@dataclass(frozen=True)
class TridiagonalSystem:
    """Bands of a tridiagonal matrix and a right-hand side.

    Row ``i`` reads ``sub[i-1] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]``,
    so ``sub`` and ``sup`` have one entry fewer than ``diag``.
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        n = np.shape(self.diag)[0]
        if np.shape(self.rhs) != (n,) or np.shape(self.sub) != (n - 1,) or np.shape(self.sup) != (n - 1,):
            raise SizeMismatchError("tridiagonal bands must have sizes n-1, n, n-1 and rhs n")

    @property
    def diagonally_dominant(self):
        off = np.zeros(len(self.diag))
        off[1:] += np.abs(self.sub)
        off[:-1] += np.abs(self.sup)
        return bool(np.all(np.abs(self.diag) > off))

    def matvec(self, x):
        y = self.diag * x
        y[1:] += self.sub * x[:-1]
        y[:-1] += self.sup * x[1:]
        return y


def tridiagonal_residual(system, x):
    """Max-norm of ``A x - b``."""
    return float(np.max(np.abs(system.matvec(np.asarray(x)) - system.rhs)))


def solve_tridiagonal(system, *, return_residual=False, check_dominance=True):
    """Solve a tridiagonal system with LAPACK ``gtsv``.

    Parameters
    ----------
    system : TridiagonalSystem
    return_residual : bool
        Also return ``max |A x - b|``.
    check_dominance : bool
        Emit a :class:`DiagonalDominanceWarning` when the matrix is not
        strictly diagonally dominant.

    Returns
    -------
    ndarray or (ndarray, float)
    """
    diag = np.asarray(system.diag, dtype=float)
    if np.any(diag == 0):
        raise SingularPivotError(f"zero diagonal entry at row {int(np.argmin(np.abs(diag)))}")
    if check_dominance and not system.diagonally_dominant:
        warnings.warn("tridiagonal system is not strictly diagonally dominant", DiagonalDominanceWarning,
                      stacklevel=2)
    *_, x, info = dgtsv(
        np.asarray(system.sub, dtype=float),
        diag,
        np.asarray(system.sup, dtype=float),
        np.asarray(system.rhs, dtype=float),
    )
    if info != 0 or not np.all(np.isfinite(x)):
        raise SingularPivotError(f"elimination hit a zero pivot (lapack info={info})")
    if return_residual:
        return x, tridiagonal_residual(system, x)
    return x
