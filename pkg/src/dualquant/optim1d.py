"""Newton solver for 1D quadratic dual quantization grids.

The mean error power of an ordered grid is a sum of segment integrals,
so its gradient and Hessian reduce to partial moments and density
values.  The Hessian is tridiagonal; solves use the banded form.
Compact mode pins the first and last point to the support endpoints;
extended mode optimizes every coordinate and adds the tail terms of the
nearest-endpoint penalty outside the hull.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .distributions import DistributionSpec
from .errors import MaxIterationsError
from .geometry import Grid

MODES = ("compact", "extended")


@dataclass(frozen=True)
class NewtonReport:
    """Outcome of a Newton run: final grid plus convergence facts."""

    grid: Grid
    iterations: int
    final_gradient_norm: float
    converged: bool


def _checked(grid: Grid, dist: DistributionSpec, mode: str) -> np.ndarray:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if grid.dim != 1 or grid.n < 2:
        raise ValueError("need an ordered 1D grid with at least two points")
    xs = grid.points[:, 0]
    if not np.all(np.diff(xs) > 0.0):
        raise ValueError("grid points must be strictly increasing")
    if dist.dim != 1 or dist.analytics is None:
        raise ValueError("gradient formulas need 1D partial moments")
    if mode == "compact":
        if dist.support is None:
            raise ValueError("compact mode needs a bounded support")
        lo, hi = float(dist.support[0][0]), float(dist.support[1][0])
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("compact mode needs a bounded support")
        if lo < xs[0] - 1e-12 or hi > xs[-1] + 1e-12:
            raise ValueError("support exceeds the grid hull")
    return xs


def gradient_1d(grid: Grid, dist: DistributionSpec,
                mode: str = "compact") -> np.ndarray:
    """Exact gradient of the mean quadratic dual quantization error.

    Interior component i: pm1(x_{i-1}, x_{i+1}) - x_{i-1} pm0(x_{i-1}, x_i)
    - x_{i+1} pm0(x_i, x_{i+1}).  Compact mode returns zeros at the pinned
    endpoints; extended mode adds the derivative of the squared distance
    to the nearest endpoint over each tail.
    """
    xs = _checked(grid, dist, mode)
    pm = dist.analytics.partial_moment
    n = len(xs)
    g = np.zeros(n)
    for i in range(1, n - 1):
        g[i] = (pm(1, xs[i - 1], xs[i + 1])
                - xs[i - 1] * pm(0, xs[i - 1], xs[i])
                - xs[i + 1] * pm(0, xs[i], xs[i + 1]))
    if mode == "extended":
        g[0] = (2.0 * (xs[0] * pm(0, -math.inf, xs[0])
                       - pm(1, -math.inf, xs[0]))
                + pm(1, xs[0], xs[1]) - xs[1] * pm(0, xs[0], xs[1]))
        g[-1] = (2.0 * (xs[-1] * pm(0, xs[-1], math.inf)
                        - pm(1, xs[-1], math.inf))
                 + pm(1, xs[-2], xs[-1]) - xs[-2] * pm(0, xs[-2], xs[-1]))
    return g


def _tridiagonal(xs: np.ndarray, dist: DistributionSpec,
                 mode: str) -> tuple[np.ndarray, np.ndarray]:
    pm = dist.analytics.partial_moment
    pdf = dist.analytics.pdf
    n = len(xs)
    dens = np.array([pdf(float(x)) for x in xs])
    diag = np.empty(n)
    diag[1:-1] = (xs[2:] - xs[:-2]) * dens[1:-1]
    # Boundary rows: phantom neighbour at the point itself, so only the
    # inner gap contributes; extended mode adds twice the tail mass.
    diag[0] = (xs[1] - xs[0]) * dens[0]
    diag[-1] = (xs[-1] - xs[-2]) * dens[-1]
    if mode == "extended":
        diag[0] += 2.0 * pm(0, -math.inf, xs[0])
        diag[-1] += 2.0 * pm(0, xs[-1], math.inf)
    off = np.array([-pm(0, a, b) for a, b in zip(xs[:-1], xs[1:])])
    return diag, off


def hessian_1d(grid: Grid, dist: DistributionSpec,
               mode: str = "compact") -> np.ndarray:
    """Tridiagonal Hessian of the mean quadratic error, as a dense matrix.

    Interior diagonal (x_{i+1} - x_{i-1}) pdf(x_i), off-diagonal minus
    the cell mass.
    """
    xs = _checked(grid, dist, mode)
    diag, off = _tridiagonal(xs, dist, mode)
    h = np.diag(diag)
    idx = np.arange(len(xs) - 1)
    h[idx, idx + 1] = off
    h[idx + 1, idx] = off
    return h


def _solve_tridiagonal(diag: np.ndarray, off: np.ndarray,
                       rhs: np.ndarray) -> np.ndarray:
    n = len(diag)
    if n == 1:
        return rhs / diag
    ab = np.zeros((3, n))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    return solve_banded((1, 1), ab, rhs)


def newton_solve(dist: DistributionSpec, n: int, mode: str = "compact",
                 init=None, tol: float = 1e-10,
                 max_iter: int = 100) -> NewtonReport:
    """Find a stationary grid of the mean quadratic error by Newton steps.

    Steps are halved until they preserve strict ordering.  Compact mode
    pins the outer points to the support endpoints and solves the
    interior block; extended mode moves every point and starts from an
    equidistant grid across the central quantile range.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if n < 2:
        raise ValueError("need at least two points")
    if dist.dim != 1 or dist.analytics is None:
        raise ValueError("the Newton solver needs 1D partial moments")

    if mode == "compact":
        if dist.support is None or not np.all(np.isfinite(dist.support[0])) \
                or not np.all(np.isfinite(dist.support[1])):
            raise ValueError("compact mode needs a bounded support")
        lo, hi = float(dist.support[0][0]), float(dist.support[1][0])
    else:
        q = dist.analytics.quantile
        lo, hi = q(0.1), q(0.9)
    if init is None:
        xs = np.linspace(lo, hi, n)
    else:
        xs = np.asarray(init, dtype=float).reshape(-1).copy()
        if len(xs) != n or not np.all(np.diff(xs) > 0.0):
            raise ValueError("init must be a strictly increasing n-vector")
    if mode == "compact":
        xs[0], xs[-1] = lo, hi
    active = slice(1, n - 1) if mode == "compact" else slice(0, n)

    grad_norm = math.inf
    for it in range(max_iter):
        g = gradient_1d(Grid(xs), dist, mode)
        grad_norm = float(np.max(np.abs(g)))
        if grad_norm <= tol:
            return NewtonReport(Grid(xs), it, grad_norm, True)
        ga = g[active]
        diag, off = _tridiagonal(xs, dist, mode)
        if mode == "compact":
            diag, off = diag[1:-1], off[1:-1]
        if np.any(diag <= 0.0):
            raise ValueError("density vanishes at a grid point; "
                             "the Newton step is not defined")
        step = _solve_tridiagonal(diag, off, ga)
        scale = 1.0
        for _ in range(80):
            trial = xs.copy()
            trial[active] = xs[active] - scale * step
            if np.all(np.diff(trial) > 0.0):
                xs = trial
                break
            scale /= 2.0
        else:
            break
    report = NewtonReport(Grid(xs), max_iter, grad_norm, False)
    raise MaxIterationsError(
        f"Newton did not reach tolerance {tol} in {max_iter} iterations "
        f"(last gradient norm {grad_norm:.3e})", report=report)
