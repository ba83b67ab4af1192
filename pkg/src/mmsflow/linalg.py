"""Dense numerical kernels: conjugate gradients, symmetric eigen-extremes,
and a monotone backtracking line search with a step-norm clip.

All kernels are single-threaded per call and hold no shared state; the
operator handed to :func:`cg_solve` may parallelize internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ParameterError


@dataclass(frozen=True)
class CgConfig:
    max_iters: int = 30
    rel_tolerance: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ParameterError("max_iters must be >= 1")
        if self.rel_tolerance <= 0:
            raise ParameterError("rel_tolerance must be positive")


@dataclass(frozen=True)
class LineSearchConfig:
    contraction: float = 0.5
    max_backtracks: int = 8
    max_step_norm: float = 5.0
    initial_step: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.contraction < 1.0:
            raise ParameterError("contraction must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ParameterError("max_backtracks must be >= 1")
        if self.max_step_norm <= 0 or self.initial_step <= 0:
            raise ParameterError("step bounds must be positive")


@dataclass
class CgResult:
    x: np.ndarray
    residual_norm: float
    iters: int
    converged: bool
    indefinite: bool = False
    residual_history: list = field(default_factory=list, repr=False)


def cg_solve(matvec, rhs, cfg: CgConfig = CgConfig()) -> CgResult:
    """Conjugate gradients on a symmetric positive (semi)definite operator.

    Stops when ||A x - b|| <= rel_tolerance * ||b|| or after max_iters
    matrix products; an inexact solve is a legitimate outcome, reported
    through ``converged``.  Negative curvature (p^T A p <= 0) halts the
    iteration with the current iterate and sets ``indefinite``.

    Raises
    ------
    NumericalError
        If the operator produces NaN or Inf.
    """
    b = np.asarray(rhs, dtype=float)
    if not np.all(np.isfinite(b)):
        raise NumericalError("right-hand side contains NaN/Inf")
    x = np.zeros_like(b)
    r = b.copy()
    rs = float(r @ r)
    bnorm = math.sqrt(rs)
    history = [bnorm]
    if bnorm == 0.0:
        return CgResult(x, 0.0, 0, True, residual_history=history)
    p = r.copy()
    tol = cfg.rel_tolerance * bnorm
    iters = 0
    indefinite = False
    while iters < cfg.max_iters:
        ap = np.asarray(matvec(p), dtype=float)
        if not np.all(np.isfinite(ap)):
            raise NumericalError("operator produced NaN/Inf during CG")
        pap = float(p @ ap)
        if pap <= 0.0:
            indefinite = True
            break
        iters += 1
        alpha = rs / pap
        x = x + alpha * p
        r = r - alpha * ap
        rs_new = float(r @ r)
        history.append(math.sqrt(rs_new))
        if math.sqrt(rs_new) <= tol:
            rs = rs_new
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    res = math.sqrt(rs)
    return CgResult(x, res, iters, res <= tol, indefinite, history)


@dataclass
class LineSearchResult:
    t: float
    evals: int
    accepted: bool


def backtracking_step(
    objective, direction_norm: float, cfg: LineSearchConfig = LineSearchConfig()
) -> LineSearchResult:
    """Monotone backtracking in t with a trust-region-style norm clip.

    The first trial is min(initial_step, max_step_norm / direction_norm);
    each subsequent trial multiplies by ``contraction``, for at most
    ``max_backtracks`` trials total.  A trial is accepted on strict
    decrease, objective(t) < objective(0).  If nothing decreases, returns
    t = 0 with ``accepted=False``.
    """
    if direction_norm <= 0:
        raise ParameterError("direction_norm must be positive")
    f0 = float(objective(0.0))
    if not math.isfinite(f0):
        raise ParameterError("objective at t=0 is not finite")
    t = min(cfg.initial_step, cfg.max_step_norm / direction_norm)
    evals = 0
    for _ in range(cfg.max_backtracks):
        ft = float(objective(t))
        evals += 1
        if math.isfinite(ft) and ft < f0:
            return LineSearchResult(t, evals, True)
        t *= cfg.contraction
    return LineSearchResult(0.0, evals, False)


def smallest_eig_sym(mat: np.ndarray, sym_tol: float = 1e-10) -> float:
    """Smallest eigenvalue of a symmetric matrix (dense solver)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ParameterError("matrix must be square")
    scale = max(1.0, float(np.abs(mat).max()))
    if float(np.abs(mat - mat.T).max()) > sym_tol * scale:
        raise ParameterError("matrix is not symmetric within tolerance")
    return float(np.linalg.eigvalsh(mat)[0])


def smallest_eig_sym_inverse_power(
    mat: np.ndarray,
    shift: float | None = None,
    max_iters: int = 200,
    tol: float = 1e-10,
) -> float:
    """Smallest eigenvalue of a symmetric PSD matrix without a full
    eigendecomposition: inverse power iteration on (A + shift I), each
    solve done with conjugate gradients.  Intended for sizes where a dense
    solve is too expensive.
    """
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[0]
    if shift is None:
        shift = 1e-10 * max(1.0, float(np.trace(mat)) / n)
    cfg = CgConfig(max_iters=4 * n, rel_tolerance=1e-12)
    v = np.cos(np.arange(1, n + 1, dtype=float))
    v /= np.linalg.norm(v)
    est = float(v @ (mat @ v))
    for _ in range(max_iters):
        sol = cg_solve(lambda z: mat @ z + shift * z, v, cfg)
        w = sol.x
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
        new_est = float(v @ (mat @ v))
        if abs(new_est - est) <= tol * max(1.0, abs(new_est)):
            est = new_est
            break
        est = new_est
    return est
