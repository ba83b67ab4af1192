"""Inner solvers for one implicit-Euler (proximal) subproblem.

The per-step objective, for anchor a = u(w_start), step size tau and
energy F, is

    Q(w) = ||u(w) - a||^2 / (2 tau) + F[u(w)]

under the grid's weighted norm.  The damped Gauss-Newton step solves

    ((1 + 1/tau) J^T D J + rho I) eta = -J^T D r,
    r = (1/tau)(u - a) + grad F[u],

matrix-free with conjugate gradients (J^T J is never formed), followed by
a monotone backtracking line search on the full objective Q.  Here
D = size * weights, which is the identity for uniform empirical weights;
the common 1/N factor of the objective is cancelled from both sides of
the system, so the damping rho is calibrated against the raw Gram matrix
J^T J.

First-order baselines (Adam, plain gradient descent) run on the exact
gradient of Q, assembled as J^T (weights * r).

Vector-valued outputs (C > 1) are supported by stacking the outputs
sample-major and placing the anchor on the stacked grid produced by
:func:`stacked_grid`.

Solver calls are pure with respect to their inputs (Adam moments live in
locals); distinct subproblems can run concurrently with independent state.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import network
from .errors import ParameterError, SolverError
from .hilbert import EnergyFunctional, GridFunction, SampleGrid
from .linalg import (
    CgConfig,
    LineSearchConfig,
    backtracking_step,
    cg_solve,
)


@dataclass(frozen=True)
class GnConfig:
    inner_steps: int = 5
    lm_damping: float = 0.0
    cg: CgConfig = field(default_factory=CgConfig)
    line_search: LineSearchConfig = field(default_factory=LineSearchConfig)

    def __post_init__(self):
        if self.inner_steps < 1:
            raise ParameterError("inner_steps must be >= 1")
        if self.lm_damping < 0:
            raise ParameterError("lm_damping must be >= 0")


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    inner_iters: int = 500

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ParameterError("betas must lie in [0, 1)")


def stacked_grid(grid: SampleGrid, c_out: int) -> SampleGrid:
    """Grid for stacked network outputs: every point repeated once per
    output channel, weights split evenly across channels (so the stacked
    norm is the mean square over all N*C components)."""
    if c_out == 1:
        return grid
    return SampleGrid(
        np.repeat(grid.points, c_out, axis=0),
        np.repeat(grid.weights / c_out, c_out),
    )


@dataclass(frozen=True)
class SubproblemSpec:
    """One proximal subproblem, warm-started at the previous iterate.

    The anchor must equal the model's own output (the warm start is the
    previous outer iterate); this makes the objective at entry exactly
    F[anchor].
    """

    model: network.MlpModel
    anchor: GridFunction
    energy: EnergyFunctional
    tau: float
    grid: SampleGrid

    def __post_init__(self):
        if self.tau <= 0:
            raise ParameterError("tau must be positive")
        expected = self.grid.size * self.model.arch.output_dim
        if self.anchor.grid.size != expected:
            raise ParameterError(
                f"anchor has {self.anchor.grid.size} values, expected {expected}"
            )
        u0 = network.forward_stacked(self.model, self.grid)
        gap = float(np.max(np.abs(u0 - self.anchor.values)))
        if gap > 1e-12:
            raise ParameterError(
                f"anchor must equal the model output at entry (gap {gap:.3e})"
            )

    def output_function(self, values: np.ndarray) -> GridFunction:
        return GridFunction(values, self.anchor.grid)


def subproblem_objective(spec: SubproblemSpec, w: np.ndarray) -> float:
    """Q(w) = ||u(w) - anchor||^2 / (2 tau) + F[u(w)]."""
    u = network.forward_stacked(spec.model.with_params(w), spec.grid)
    d = u - spec.anchor.values
    wts = spec.anchor.grid.weights
    return float(np.dot(wts, d * d)) / (2.0 * spec.tau) + spec.energy.value(
        spec.output_function(u)
    )


def _residual_and_gradient(spec: SubproblemSpec, u: np.ndarray, jac: np.ndarray):
    """Raw residual r and exact objective gradient J^T (weights * r)."""
    r = (u - spec.anchor.values) / spec.tau + spec.energy.gradient(
        spec.output_function(u)
    ).values
    grad = jac.T @ (spec.anchor.grid.weights * r)
    return r, grad


@dataclass
class GnStepDiag:
    objective_before: float
    objective_after: float
    grad_norm: float
    direction_norm: float
    cg_iters: int
    cg_residual: float
    accepted_t: float
    ls_evals: int
    accepted: bool


def gn_step(spec: SubproblemSpec, cfg: GnConfig, w: np.ndarray):
    """One damped Gauss-Newton/LM step with CG solve and line search.

    Returns (w_next, diag).  A line-search rejection is not an error: the
    parameters are returned unchanged with ``diag.accepted = False``.
    """
    w = np.asarray(w, dtype=float)
    model = spec.model.with_params(w)
    u, jac = network.forward_and_jacobian(model, spec.grid)
    scale = spec.anchor.grid.weights * spec.anchor.grid.size  # 1 for uniform
    r, grad = _residual_and_gradient(spec, u, jac)
    f0 = float(np.dot(spec.anchor.grid.weights, (u - spec.anchor.values) ** 2)) / (
        2.0 * spec.tau
    ) + spec.energy.value(spec.output_function(u))

    gn_factor = 1.0 + 1.0 / spec.tau
    rho = cfg.lm_damping

    def matvec(z):
        return gn_factor * (jac.T @ (scale * (jac @ z))) + rho * z

    rhs = -(jac.T @ (scale * r))
    sol = cg_solve(matvec, rhs, cfg.cg)
    eta = sol.x
    direction_norm = float(np.linalg.norm(eta))
    grad_norm = float(np.linalg.norm(grad))

    if direction_norm == 0.0:
        diag = GnStepDiag(f0, f0, grad_norm, 0.0, sol.iters, sol.residual_norm,
                          0.0, 0, False)
        return w, diag

    ls = backtracking_step(
        lambda t: f0 if t == 0.0 else subproblem_objective(spec, w + t * eta),
        direction_norm,
        cfg.line_search,
    )
    if ls.accepted:
        w_next = w + ls.t * eta
        f1 = subproblem_objective(spec, w_next)
    else:
        w_next, f1 = w, f0
    diag = GnStepDiag(f0, f1, grad_norm, direction_norm, sol.iters,
                      sol.residual_norm, ls.t, ls.evals, ls.accepted)
    return w_next, diag


def solve_subproblem_gn(spec: SubproblemSpec, cfg: GnConfig):
    """K damped GN steps; the objective sequence is nonincreasing."""
    w = spec.model.params
    trace = []
    for _ in range(cfg.inner_steps):
        w, diag = gn_step(spec, cfg, w)
        trace.append(diag)
    return w, trace


def preconditioner_directions(spec: SubproblemSpec, w: np.ndarray):
    """Raw undamped step directions under the two preconditioner scalings,
    computed with exact dense solves: (J^T J)^{-1} J^T r versus
    ((1 + 1/tau) J^T J)^{-1} J^T r.  Diagnostic used to confirm that the
    two differ only by the scalar 1/(1 + 1/tau)."""
    model = spec.model.with_params(np.asarray(w, dtype=float))
    u, jac = network.forward_and_jacobian(model, spec.grid)
    r, _ = _residual_and_gradient(spec, u, jac)
    scale = spec.anchor.grid.weights * spec.anchor.grid.size
    gram = jac.T @ (scale[:, None] * jac)
    rhs = -(jac.T @ (scale * r))
    eta_plain = np.linalg.solve(gram, rhs)
    eta_scaled = np.linalg.solve((1.0 + 1.0 / spec.tau) * gram, rhs)
    return eta_plain, eta_scaled


def _first_order_loop(spec: SubproblemSpec, n_iters: int, update):
    """Shared driver: evaluates objective/gradient, delegates the update."""
    w = spec.model.params.copy()
    wts = spec.anchor.grid.weights
    trace = []
    for k in range(n_iters):
        u, jac = network.forward_and_jacobian(spec.model.with_params(w), spec.grid)
        d = u - spec.anchor.values
        obj = float(np.dot(wts, d * d)) / (2.0 * spec.tau) + spec.energy.value(
            spec.output_function(u)
        )
        _, grad = _residual_and_gradient(spec, u, jac)
        if not np.all(np.isfinite(grad)):
            raise SolverError("gradient contains NaN/Inf", diagnostics=trace)
        trace.append(obj)
        w = update(k, w, grad)
    return w, trace


def solve_subproblem_adam(spec: SubproblemSpec, cfg: AdamConfig):
    """Adam with bias-corrected moments on the subproblem gradient."""
    p = spec.model.arch.param_count
    m = np.zeros(p)
    v = np.zeros(p)

    def update(k, w, grad):
        nonlocal m, v
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
        m_hat = m / (1.0 - cfg.beta1 ** (k + 1))
        v_hat = v / (1.0 - cfg.beta2 ** (k + 1))
        return w - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.eps)

    return _first_order_loop(spec, cfg.inner_iters, update)


def solve_subproblem_gd(spec: SubproblemSpec, lr: float, iters: int):
    """Plain gradient descent w <- w - lr * grad Q(w)."""
    if lr < 0:
        raise ParameterError("learning rate must be nonnegative")
    return _first_order_loop(spec, iters, lambda k, w, g: w - lr * g)
