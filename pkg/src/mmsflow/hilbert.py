"""Discrete Hilbert-space layer.

Functions are represented by their values on a finite sample grid carrying
nonnegative quadrature weights that sum to one (an empirical measure), so

    <u, v> = sum_i w_i * u_i * v_i,      ||u|| = sqrt(<u, u>).

With the default uniform weights w_i = 1/N this is the training-grid
discrete L2 inner product.  All reductions use ``numpy.dot``; for a fixed
BLAS build the summation order, and hence the result, is deterministic.

The module also defines the energy-functional interface (value, gradient,
convexity constants) and the proximal map

    prox(v) = argmin_u  ||u - v||^2 / (2 tau) + F[u],

with a closed form for the quadratic regression energy and a damped-Newton
root-find for generic strongly convex energies.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import GridMismatchError, NumericalError, ParameterError

_WEIGHT_SUM_TOL = 1e-12


@dataclass(frozen=True)
class SampleGrid:
    """N sample points in R^d with empirical-measure weights.

    Parameters
    ----------
    points : (N, d) array
        Sample locations.
    weights : (N,) array, optional
        Nonnegative weights summing to 1.  Defaults to 1/N each.
    """

    points: np.ndarray
    weights: np.ndarray

    def __init__(self, points, weights=None):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.size == 0:
            raise ParameterError("grid needs at least one point")
        if weights is None:
            weights = np.full(points.shape[0], 1.0 / points.shape[0])
        else:
            weights = np.asarray(weights, dtype=float)
        if weights.shape != (points.shape[0],):
            raise ParameterError("one weight per grid point required")
        if np.any(weights < 0):
            raise ParameterError("grid weights must be nonnegative")
        if abs(weights.sum() - 1.0) > _WEIGHT_SUM_TOL:
            raise ParameterError(
                f"grid weights must sum to 1 (got {weights.sum()!r})"
            )
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def uniform_grid(lo: float, hi: float, n: int) -> SampleGrid:
    """Uniformly spaced 1D grid on [lo, hi] with uniform weights."""
    return SampleGrid(np.linspace(lo, hi, n).reshape(-1, 1))


def iid_uniform_grid(lo, hi, n: int, dim: int, rng: np.random.Generator) -> SampleGrid:
    """n i.i.d. uniform samples on [lo, hi]^dim with uniform weights."""
    return SampleGrid(rng.uniform(lo, hi, size=(n, dim)))


class GridFunction:
    """A function sampled on a :class:`SampleGrid`; one value per point."""

    __slots__ = ("values", "grid")

    def __init__(self, values, grid: SampleGrid):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.size,):
            raise GridMismatchError(
                f"expected {grid.size} values, got shape {values.shape}"
            )
        self.values = values
        self.grid = grid

    # -- arithmetic (same grid enforced) ------------------------------
    def _check(self, other: "GridFunction") -> None:
        if self.grid is not other.grid and (
            self.grid.size != other.grid.size
            or not np.array_equal(self.grid.points, other.grid.points)
            or not np.array_equal(self.grid.weights, other.grid.weights)
        ):
            raise GridMismatchError("grid functions live on different grids")

    def __add__(self, other):
        self._check(other)
        return GridFunction(self.values + other.values, self.grid)

    def __sub__(self, other):
        self._check(other)
        return GridFunction(self.values - other.values, self.grid)

    def __mul__(self, scalar: float):
        return GridFunction(self.values * float(scalar), self.grid)

    __rmul__ = __mul__

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy(), self.grid)

    @classmethod
    def constant(cls, c: float, grid: SampleGrid) -> "GridFunction":
        return cls(np.full(grid.size, float(c)), grid)


def inner(u: GridFunction, v: GridFunction) -> float:
    """Weighted inner product sum_i w_i u_i v_i."""
    u._check(v)
    return float(np.dot(u.grid.weights, u.values * v.values))


def norm(u: GridFunction) -> float:
    """Weighted norm sqrt(<u, u>)."""
    return float(np.sqrt(np.dot(u.grid.weights, u.values * u.values)))


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


class EnergyFunctional(ABC):
    """Strongly convex energy on grid functions.

    Implementations expose the value, the (Riesz) gradient with respect to
    the weighted inner product, and the convexity constants ``m`` (strong
    convexity) and ``lip`` (gradient Lipschitz), with 0 <= m <= lip.
    """

    @property
    @abstractmethod
    def m(self) -> float:
        """Strong-convexity constant."""

    @property
    @abstractmethod
    def lip(self) -> float:
        """Gradient Lipschitz constant."""

    @abstractmethod
    def value(self, u: GridFunction) -> float: ...

    @abstractmethod
    def gradient(self, u: GridFunction) -> GridFunction: ...

    def prox(self, v: GridFunction, tau: float) -> GridFunction:
        """Proximal map; default is the generic Newton root-find."""
        return newton_prox(v, tau, self)


class QuadraticRegressionEnergy(EnergyFunctional):
    """F[u] = 0.5 ||u - target||^2 under the grid's weighted norm.

    Unit curvature in both directions: m = lip = 1.  The proximal map has
    the closed form (v + tau * target) / (1 + tau).
    """

    def __init__(self, target: GridFunction):
        self.target = target

    @property
    def m(self) -> float:
        return 1.0

    @property
    def lip(self) -> float:
        return 1.0

    def value(self, u: GridFunction) -> float:
        d = u - self.target
        return 0.5 * float(np.dot(d.grid.weights, d.values * d.values))

    def gradient(self, u: GridFunction) -> GridFunction:
        return u - self.target

    def minimizer(self) -> GridFunction:
        return self.target

    def prox(self, v: GridFunction, tau: float) -> GridFunction:
        if tau <= 0:
            raise ParameterError("tau must be positive")
        v._check(self.target)
        return GridFunction(
            (v.values + tau * self.target.values) / (1.0 + tau), v.grid
        )


def increment_objective(
    h: GridFunction, v: GridFunction, tau: float, energy: EnergyFunctional
) -> float:
    """||h||^2 / (2 tau) + F[v + h]; equals F[v] at h = 0."""
    if tau <= 0:
        raise ParameterError("tau must be positive")
    h._check(v)
    return norm(h) ** 2 / (2.0 * tau) + energy.value(v + h)


def newton_prox(
    v: GridFunction,
    tau: float,
    energy: EnergyFunctional,
    tol: float = 1e-12,
    max_iter: int = 100,
) -> GridFunction:
    """Generic proximal map via damped Newton on the optimality condition.

    Solves R(h) = h/tau + grad F[v + h] = 0.  Newton directions are
    obtained matrix-free with conjugate gradients on the (SPD, for m > 0)
    linearization z -> z/tau + D(grad F)[z], the directional derivative
    approximated by central differences of the gradient.  The residual that
    is driven below ``tol`` is evaluated exactly, so finite-difference
    error only affects the step quality, not the certificate.
    """
    if tau <= 0:
        raise ParameterError("tau must be positive")
    if energy.m <= 0:
        raise ParameterError("generic prox requires strong convexity (m > 0)")
    grid = v.grid
    w = grid.weights
    h = np.zeros(grid.size)

    def residual(hvals):
        g = energy.gradient(GridFunction(v.values + hvals, grid)).values
        return hvals / tau + g

    def wnorm(x):
        return float(np.sqrt(np.dot(w, x * x)))

    r = residual(h)
    rn = wnorm(r)
    fd_eps = 1e-6
    for _ in range(max_iter):
        if rn <= tol:
            return GridFunction(v.values + h, grid)

        def matvec(z, _h=h.copy()):
            scale = wnorm(z)
            if scale == 0.0:
                return z / tau
            gp = energy.gradient(
                GridFunction(v.values + _h + fd_eps / scale * z, grid)
            ).values
            gm = energy.gradient(
                GridFunction(v.values + _h - fd_eps / scale * z, grid)
            ).values
            return z / tau + (gp - gm) * (scale / (2.0 * fd_eps))

        step = _weighted_cg(matvec, -r, w, rtol=1e-10, max_iters=grid.size + 10)
        # damping: halve until the exact residual norm decreases
        t = 1.0
        for _ in range(60):
            trial = h + t * step
            r_trial = residual(trial)
            rn_trial = wnorm(r_trial)
            if rn_trial < rn or rn_trial <= tol:
                h, r, rn = trial, r_trial, rn_trial
                break
            t *= 0.5
        else:
            break
    if rn <= tol:
        return GridFunction(v.values + h, grid)
    raise NumericalError(
        f"prox Newton did not reach residual {tol:g} "
        f"within {max_iter} iterations (residual {rn:.3e})"
    )


def _weighted_cg(matvec, b, w, rtol, max_iters):
    """CG in the weighted inner product; helper for :func:`newton_prox`."""
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(np.dot(w, r * r))
    bnorm = np.sqrt(float(np.dot(w, b * b)))
    if bnorm == 0.0:
        return x
    for _ in range(max_iters):
        if np.sqrt(rs) <= rtol * bnorm:
            break
        ap = matvec(p)
        denom = float(np.dot(w, p * ap))
        if denom <= 0.0:
            break
        alpha = rs / denom
        x += alpha * p
        r -= alpha * ap
        rs_new = float(np.dot(w, r * r))
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x


def exact_prox(v: GridFunction, tau: float, energy: EnergyFunctional) -> GridFunction:
    """Proximal map argmin_u ||u - v||^2/(2 tau) + F[u].

    Dispatches to the energy's closed form when it has one, otherwise to
    the damped-Newton root-find (:func:`newton_prox`).
    """
    if tau <= 0:
        raise ParameterError("tau must be positive")
    return energy.prox(v, tau)


# ---------------------------------------------------------------------------
# CSV serialization: one row per point, columns x_1..x_d, value, weight
# ---------------------------------------------------------------------------

FLOAT_FMT = "%.17g"


def save_grid_function(u: GridFunction, path) -> None:
    grid = u.grid
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x_{k + 1}" for k in range(grid.dim)] + ["value", "weight"])
        for i in range(grid.size):
            row = [FLOAT_FMT % x for x in grid.points[i]]
            row.append(FLOAT_FMT % u.values[i])
            row.append(FLOAT_FMT % grid.weights[i])
            writer.writerow(row)


def load_grid_function(path) -> GridFunction:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = len(header) - 2
        points, values, weights = [], [], []
        for row in reader:
            points.append([float(c) for c in row[:d]])
            values.append(float(row[d]))
            weights.append(float(row[d + 1]))
    grid = SampleGrid(np.asarray(points), np.asarray(weights))
    return GridFunction(np.asarray(values), grid)
