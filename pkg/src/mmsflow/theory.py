"""Convergence-theory constants and checkable certificates.

Everything here is post-hoc analysis over immutable data: given a step
size tau and an energy with strong-convexity / gradient-Lipschitz
constants (m, lip), the per-step subproblem

    g(h; v) = ||h||^2 / (2 tau) + F[v + h]

is nu-strongly convex and mu-smooth in the ambient space with

    nu = 1/tau + m,    mu = 1/tau + lip,
    kappa = mu / nu,   rho = 1 / (1 + tau * m),

rho being the contraction factor of the proximal map.  On top of these,
the module computes the network-dependent quantities (Jacobian
non-degeneracy lambda_hat, the empirical Jacobian-Lipschitz estimate
L_hat, the safe parameter radius r_w, the curvature scale Lambda, the
sublevel radius K(v) and the data condition C(v)), the inner-solver
effort thresholds (continuous horizon T, discrete iteration count K),
the tracking-error recurrence certificate, and the non-degeneracy decay
budget along a trajectory.

Conventions pinned here (factor-of-two traps):
  * lambda_hat := s_min(J) / 2, because non-degeneracy is stated as
    J^T J >= 4 lambda^2 I, i.e. s_min = 2 lambda.
  * L_hat is a sampled local estimate (never a certified global bound),
    and the network Lipschitz constant entering r_w is surrogated by the
    operator norm of J at the current parameters; r_w is therefore
    labelled empirical.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import network
from .errors import ParameterError
from .hilbert import (
    FLOAT_FMT,
    EnergyFunctional,
    GridFunction,
    SampleGrid,
    exact_prox,
    norm,
)

#: Hypotheses of the underlying theory that are not computable from samples;
#: every certificate report carries them as standing assumptions.
UNCHECKED_ASSUMPTIONS = (
    "injectivity radius of the increment manifold at 0 (assumed >= pi/Lambda)",
    "output-isolation radii around the current parameters (assumed positive)",
    "geodesic convexity of the subproblem on the reached sublevel set",
)


def convexity_constants(tau: float, m: float, lip: float):
    """(nu, mu, kappa, rho) for the per-step subproblem."""
    if tau <= 0:
        raise ParameterError("tau must be positive")
    if m < 0 or lip < m:
        raise ParameterError("need 0 <= m <= lip")
    nu = 1.0 / tau + m
    mu = 1.0 / tau + lip
    kappa = mu / nu
    rho = 1.0 / (1.0 + tau * m)
    return nu, mu, kappa, rho


def sublevel_radius(tau: float, m: float, f_value: float) -> float:
    """K(v) = sqrt(2 tau F[v] / (1 + tau m)); radius of the reached
    sublevel set around the subproblem minimizer."""
    if f_value < 0:
        raise ParameterError("energies are normalized nonnegative")
    return math.sqrt(2.0 * tau * f_value / (1.0 + tau * m))


def data_condition(
    l_hat: float, kappa: float, lambda_hat: float, h_star_norm: float, k_v: float
) -> float:
    """C(v) = (4 L kappa / lambda^2) * max(||h*(v)||, K(v)); C(v) <= 1 is
    the certifiable-convexity condition.  Degenerate lambda gives +inf."""
    peak = max(h_star_norm, k_v)
    if peak == 0.0:
        return 0.0
    if lambda_hat <= 0.0:
        return math.inf
    return 4.0 * l_hat * kappa / lambda_hat**2 * peak


def local_gram_radius(
    lambda_hat: float,
    l_hat: float,
    op_norm: float,
    lip_u: float,
    tau: float,
    m: float,
    lip: float,
) -> float:
    """Radius r_w on which the Jacobian Gram matrix stays above lambda^2.

    Minimum of three entries built from the local Jacobian data; the
    network Lipschitz constant lip_u is an empirical surrogate here.
    """
    if lambda_hat <= 0.0:
        return 0.0
    if l_hat <= 0.0:
        return math.inf
    first = lambda_hat / l_hat
    second = lambda_hat**2 / (
        2.0 * l_hat * (math.sqrt(op_norm**2 + lambda_hat**2) + op_norm)
    )
    if lip_u <= 0.0:
        third = math.inf
    else:
        third = (
            lambda_hat**2 * (1.0 + tau * m) / (4.0 * l_hat * lip_u * (1.0 + tau * lip))
        )
    return min(first, second, third)


@dataclass(frozen=True)
class TheoryConstants:
    """Full constant pack for one iterate."""

    tau: float
    m: float
    lip: float
    nu: float
    mu: float
    kappa: float
    rho: float
    lambda_hat: float = math.nan
    l_hat: float = math.nan
    j_op_norm: float = math.nan
    r_w: float = math.nan
    big_lambda: float = math.nan
    k_v: float = math.nan
    h_star_norm: float = math.nan
    c_v: float = math.nan
    epsilon: float = 0.0
    delta: float = math.nan
    degenerate: bool = False

    @classmethod
    def from_problem(cls, tau, m, lip, epsilon=0.0, delta=math.nan):
        nu, mu, kappa, rho = convexity_constants(tau, m, lip)
        return cls(tau, m, lip, nu, mu, kappa, rho, epsilon=epsilon, delta=delta)

    FIELDS = (
        "tau", "m", "lip", "nu", "mu", "kappa", "rho", "lambda_hat", "l_hat",
        "j_op_norm", "r_w", "big_lambda", "k_v", "h_star_norm", "c_v",
        "epsilon", "delta",
    )


def constants(
    tau: float,
    energy: EnergyFunctional,
    v: GridFunction,
    model: network.MlpModel,
    grid: SampleGrid,
    epsilon: float = 0.0,
    delta: float = math.nan,
    l_hat: float | None = None,
    l_hat_pairs: int = 64,
    l_hat_radius: float = 1e-2,
    l_hat_seed: int = 0,
) -> TheoryConstants:
    """Assemble the full constant pack at one iterate.

    ``v`` is the current function iterate (normally the model's own
    output).  ``l_hat`` may be supplied to reuse a previous estimate,
    otherwise it is sampled afresh.
    """
    nu, mu, kappa, rho = convexity_constants(tau, energy.m, energy.lip)
    jac = network.jacobian(model, grid)
    s_min = network.min_singular_value(jac)
    lambda_hat = 0.5 * s_min
    op = network.operator_norm(jac)
    if l_hat is None:
        l_hat = network.estimate_jacobian_lipschitz(
            model, grid, n_pairs=l_hat_pairs, radius=l_hat_radius, seed=l_hat_seed
        )
    f_v = energy.value(v)
    k_v = sublevel_radius(tau, energy.m, f_v)
    h_star_norm = norm(exact_prox(v, tau, energy) - v)
    c_v = data_condition(l_hat, kappa, lambda_hat, h_star_norm, k_v)
    degenerate = lambda_hat <= 0.0
    big_lambda = math.inf if degenerate else 2.0 * l_hat / lambda_hat**2
    r_w = local_gram_radius(lambda_hat, l_hat, op, op, tau, energy.m, energy.lip)
    return TheoryConstants(
        tau=tau, m=energy.m, lip=energy.lip, nu=nu, mu=mu, kappa=kappa, rho=rho,
        lambda_hat=lambda_hat, l_hat=l_hat, j_op_norm=op, r_w=r_w,
        big_lambda=big_lambda, k_v=k_v, h_star_norm=h_star_norm, c_v=c_v,
        epsilon=epsilon, delta=delta, degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# Inner-solver effort thresholds
# ---------------------------------------------------------------------------


def _accuracy_margin(c: TheoryConstants, delta: float | None) -> float:
    """tau*m*(delta - eps) - eps, the accuracy headroom left after the
    approximation error; must be positive for any threshold to exist."""
    d = c.delta if delta is None else delta
    if not math.isfinite(d):
        raise ParameterError("target accuracy delta is required")
    margin = c.tau * c.m * (d - c.epsilon) - c.epsilon
    if margin <= 0.0:
        raise ParameterError(
            "accuracy condition violated: need epsilon < tau*m*delta/(1+tau*m) "
            f"(epsilon={c.epsilon!r}, delta={d!r}, tau*m={c.tau * c.m!r})"
        )
    return margin


def inner_horizon_T(cbar: float, c: TheoryConstants, delta: float | None = None) -> float:
    """Continuous inner-flow horizon keeping the tracking error at delta:

        T = (2/nu) * log( cbar * (1 + tau m) / (tau m (delta-eps) - eps) ),

    clamped to 0 when the log argument falls below 1 (no inner effort
    needed at this accuracy).
    """
    if cbar <= 0:
        raise ParameterError("cbar must be positive")
    margin = _accuracy_margin(c, delta)
    arg = cbar * (1.0 + c.tau * c.m) / margin
    if arg <= 1.0:
        return 0.0
    return 2.0 / c.nu * math.log(arg)


def inner_iters_K(
    dbar: float, eta: float, c: TheoryConstants, delta: float | None = None
) -> int:
    """Discrete inner iteration count at step size eta in (0, 2/(3 mu)]:

        q = sqrt(1 - nu*eta/2),
        K = ceil( log( dbar*(1+tau m) / (tau m (delta-eps) - eps) ) / log(1/q) ),

    floored at 0 when the log argument is at most 1.
    """
    if dbar <= 0:
        raise ParameterError("dbar must be positive")
    if not 0.0 < eta <= 2.0 / (3.0 * c.mu):
        raise ParameterError(f"step size must lie in (0, 2/(3*mu)] = (0, {2.0 / (3.0 * c.mu)!r}]")
    margin = _accuracy_margin(c, delta)
    arg = dbar * (1.0 + c.tau * c.m) / margin
    if arg <= 1.0:
        return 0
    q = math.sqrt(1.0 - c.nu * eta / 2.0)
    return int(math.ceil(math.log(arg) / math.log(1.0 / q)))


def default_dbar(f_value: float, nu: float) -> float:
    """Upper bound sqrt(4 F[v] / nu) for the discrete flow-gap constant,
    built from energy data alone (the subproblem optimum is >= 0)."""
    return math.sqrt(4.0 * max(f_value, 0.0) / nu)


def effort_report(f_value: float, c: TheoryConstants) -> str:
    """Readable inner-effort thresholds for one iterate.

    Uses the default flow-gap constant sqrt(4 F[v]/nu) for both the
    continuous horizon and the discrete count at the maximal admissible
    step 2/(3 mu); reports the violated accuracy inequality instead when
    the (epsilon, delta) pair admits no threshold.
    """
    dbar = default_dbar(f_value, c.nu)
    lines = [f"  flow-gap constant (default) = {FLOAT_FMT % dbar}"]
    if dbar == 0.0:
        lines.append("  at the minimizer; no inner effort needed")
        return "\n".join(lines)
    try:
        horizon = inner_horizon_T(dbar, c)
        count = inner_iters_K(dbar, 2.0 / (3.0 * c.mu), c)
    except ParameterError as exc:
        lines.append(f"  thresholds unavailable: {exc}")
        return "\n".join(lines)
    lines.append(f"  continuous inner horizon T = {FLOAT_FMT % horizon}")
    lines.append(f"  discrete inner iterations K at eta = 2/(3 mu): {count}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Tracking certificate
# ---------------------------------------------------------------------------


@dataclass
class TrackingStep:
    step: int
    error: float
    next_error: float
    inner_residual: float
    bound: float
    passed: bool
    global_error: float = math.nan
    global_bound: float = math.nan
    global_passed: bool = True


@dataclass
class TrackingCertificate:
    tau: float
    rho: float
    epsilon: float
    sup_error: float
    steps: list
    passed: bool
    constants: TheoryConstants | None = None
    assumptions: tuple = UNCHECKED_ASSUMPTIONS

    def summary_text(self) -> str:
        lines = ["tracking certificate"]
        lines.append(f"  tau = {FLOAT_FMT % self.tau}")
        lines.append(f"  contraction rho = {FLOAT_FMT % self.rho}")
        lines.append(f"  approximation epsilon = {FLOAT_FMT % self.epsilon}")
        lines.append(f"  uniform tracking bound sup_n e_n = {FLOAT_FMT % self.sup_error}")
        if self.constants is not None:
            lines.append("  constants:")
            for name in TheoryConstants.FIELDS:
                lines.append(f"    {name} = {FLOAT_FMT % getattr(self.constants, name)}")
        lines.append("  standing assumptions (not checkable from samples):")
        for a in self.assumptions:
            lines.append(f"    - {a}")
        n_fail = sum(not s.passed for s in self.steps)
        g_fail = sum(not s.global_passed for s in self.steps)
        lines.append(
            f"  recurrence: {len(self.steps) - n_fail}/{len(self.steps)} steps pass"
        )
        if any(math.isfinite(s.global_bound) for s in self.steps):
            lines.append(
                f"  global bound: {len(self.steps) - g_fail}/{len(self.steps)} steps pass"
            )
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["step", "error", "next_error", "inner_residual", "bound",
                 "passed", "global_error", "global_bound", "global_passed"]
            )
            for s in self.steps:
                writer.writerow(
                    [s.step] + [FLOAT_FMT % x for x in
                                (s.error, s.next_error, s.inner_residual, s.bound)]
                    + [int(s.passed)]
                    + [FLOAT_FMT % x for x in (s.global_error, s.global_bound)]
                    + [int(s.global_passed)]
                )


def certify_tracking(
    nn_iterates,
    exact_iterates,
    tau: float,
    energy: EnergyFunctional,
    epsilon: float = 0.0,
    u_star: GridFunction | None = None,
    constants: TheoryConstants | None = None,
    slack: float = 1e-10,
) -> TrackingCertificate:
    """Check the per-step error recurrence along two aligned trajectories.

    For e_n = ||u_n_nn - u_n_exact|| and the observed inner residual
    res_n = ||u_{n+1}_nn - prox(u_n_nn)|| the contraction of the proximal
    map forces

        e_{n+1} <= rho * e_n + res_n + epsilon,

    which is verified at every step (up to a small floating-point slack).
    When the energy minimizer ``u_star`` is supplied, the derived global
    bound  ||u_n_nn - u*|| <= sup_m e_m + rho^n ||u_0_exact - u*||  is
    checked as well.  Raises on length mismatch.
    """
    if len(nn_iterates) != len(exact_iterates):
        raise ParameterError(
            f"trajectory lengths differ: {len(nn_iterates)} vs {len(exact_iterates)}"
        )
    if len(nn_iterates) == 0:
        raise ParameterError("empty trajectories")
    rho = 1.0 / (1.0 + tau * energy.m)
    errors = [norm(u - v) for u, v in zip(nn_iterates, exact_iterates)]
    sup_error = max(errors)
    steps = []
    all_pass = True
    init_gap = norm(exact_iterates[0] - u_star) if u_star is not None else math.nan
    for n in range(len(nn_iterates) - 1):
        res = norm(nn_iterates[n + 1] - exact_prox(nn_iterates[n], tau, energy))
        bound = rho * errors[n] + res + epsilon
        ok = errors[n + 1] <= bound + slack * max(1.0, bound)
        row = TrackingStep(n, errors[n], errors[n + 1], res, bound, ok)
        if u_star is not None:
            row.global_error = norm(nn_iterates[n] - u_star)
            row.global_bound = sup_error + rho**n * init_gap
            row.global_passed = row.global_error <= row.global_bound + slack * max(
                1.0, row.global_bound
            )
        all_pass = all_pass and ok and row.global_passed
        steps.append(row)
    return TrackingCertificate(tau, rho, epsilon, sup_error, steps, all_pass,
                               constants=constants)


# ---------------------------------------------------------------------------
# Non-degeneracy budget along a trajectory
# ---------------------------------------------------------------------------


@dataclass
class LambdaBudget:
    proxy: list
    empirical: list
    exhausted_at: int | None
    violations: list  # steps where proxy > empirical (soft check)


def lambda_budget(
    param_step_norms, lambda0: float, l_hat: float, empirical=None
) -> LambdaBudget:
    """Worst-case non-degeneracy decay lambda_n = lambda_0 - (L/2) sum Delta_k.

    ``param_step_norms`` are the per-step parameter displacements Delta_k.
    The returned proxy sequence has one more entry than the input; the
    budget is exhausted at the first index where the proxy is no longer
    positive (None if it stays positive throughout).

    ``empirical``, when given, holds the measured s_min(J)/2 values
    aligned with the proxy; the proxy should lower-bound them, but since
    L is itself an estimate this is a soft check — exceptions are listed
    in ``violations`` rather than raised.
    """
    if lambda0 <= 0:
        raise ParameterError("lambda0 must be positive")
    if l_hat <= 0:
        raise ParameterError("l_hat must be positive")
    seq = [float(lambda0)]
    for d in param_step_norms:
        seq.append(seq[-1] - 0.5 * l_hat * float(d))
    exhausted = next((n for n, lam in enumerate(seq) if lam <= 0.0), None)
    empirical = list(empirical) if empirical is not None else []
    violations = [
        n for n, (lam, emp) in enumerate(zip(seq, empirical))
        if lam > emp + 1e-12
    ]
    return LambdaBudget(seq, empirical, exhausted, violations)


def locality_threshold(
    rho_isolation: float, grad_norm: float, c: TheoryConstants
) -> float:
    """Largest tau with rho >= 2 tau ||grad F[v]|| / (1 + tau m).

    Returns +inf when the condition holds for every tau (near-minimizer
    regime, rho * m >= 2 ||grad F[v]||), else rho / (2 g - rho m).
    """
    if rho_isolation < 0 or grad_norm < 0:
        raise ParameterError("inputs must be nonnegative")
    if rho_isolation == 0.0:
        return 0.0 if grad_norm > 0 else math.inf
    denom = 2.0 * grad_norm - rho_isolation * c.m
    if denom <= 0.0:
        return math.inf
    return rho_isolation / denom
