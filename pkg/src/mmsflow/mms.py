"""Outer minimizing-movement driver.

Each outer step solves one proximal subproblem warm-started at the
previous parameters, so the subproblem objective at entry equals the
current energy exactly and any monotone inner solver guarantees the
implicit-Euler energy inequality

    F[u_{n+1}] + ||u_{n+1} - u_n||^2 / (2 tau) <= F[u_n].

Anchors are stored as sampled values (never re-evaluated from old
parameters), keeping the subproblem definition bit-stable across steps.
Records are emitted for every outer step, including rejected (stalled)
ones, so trajectory files always have ``outer_steps`` rows.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import network, solvers, theory
from .errors import ParameterError, SolverError
from .hilbert import FLOAT_FMT, EnergyFunctional, GridFunction, SampleGrid, norm

_SOLVERS = ("gn", "adam", "gd")


@dataclass(frozen=True)
class PretrainConfig:
    target: GridFunction
    iters: int = 2000
    lr: float = 1e-3
    method: str = "adam"  # adam | gn


@dataclass(frozen=True)
class MmsConfig:
    tau: float
    outer_steps: int
    solver: str = "gn"
    gn: solvers.GnConfig = field(default_factory=solvers.GnConfig)
    adam: solvers.AdamConfig = field(default_factory=solvers.AdamConfig)
    gd_lr: float = 1e-3
    gd_iters: int = 500
    seed: int = 0
    pretrain: PretrainConfig | None = None
    theory_every: int = 0  # 0 disables per-step constant packs
    theory_epsilon: float = 0.0
    theory_delta: float = math.nan
    l_hat_pairs: int = 64

    def __post_init__(self):
        if self.tau <= 0:
            raise ParameterError("tau must be positive")
        if self.outer_steps < 1:
            raise ParameterError("outer_steps must be >= 1")
        if self.solver not in _SOLVERS:
            raise ParameterError(f"solver must be one of {_SOLVERS}")


@dataclass
class MmsRecord:
    step: int
    energy: float
    objective_start: float
    objective_end: float
    energy_after: float
    tracking_error: float
    s_min: float
    param_step_norm: float
    function_step_norm: float
    param_proxy_ratio: float
    stalled: bool
    wall_time: float
    theory: theory.TheoryConstants | None = None
    inner_trace: list = field(default_factory=list, repr=False)


@dataclass
class MmsRunResult:
    records: list
    iterates: list  # GridFunction, length outer_steps + 1 when not failed
    final_model: network.MlpModel
    failed: bool = False
    error: str = ""

    @property
    def tracking_errors(self):
        return [r.tracking_error for r in self.records]


@dataclass
class PretrainResult:
    model: network.MlpModel
    fit_error: float


def pretrain_initial(
    arch: network.MlpArchitecture,
    target: GridFunction,
    iters: int = 2000,
    lr: float = 1e-3,
    seed: int = 0,
    method: str = "adam",
    model: network.MlpModel | None = None,
) -> PretrainResult:
    """Fit a fresh (or given) model to the prescribed initial condition.

    ``adam`` runs the standard recurrences on the least-squares fit
    objective; ``gn`` takes Gauss-Newton steps with the normal equations
    solved densely (exact in one step for linear-in-parameter models).
    Reports the final fit error ||u(w) - target||.
    """
    if model is None:
        model = network.init_model(arch, seed)
    grid = target.grid
    w = model.params.copy()
    wts = grid.weights
    d_scale = wts * grid.size
    if method == "adam":
        m = np.zeros_like(w)
        v = np.zeros_like(w)
        for k in range(iters):
            u, jac = network.forward_and_jacobian(model.with_params(w), grid)
            grad = jac.T @ (wts * (u - target.values))
            if not np.all(np.isfinite(grad)):
                raise SolverError("pretraining diverged (NaN/Inf gradient)")
            m = 0.9 * m + 0.1 * grad
            v = 0.999 * v + 0.001 * grad * grad
            m_hat = m / (1.0 - 0.9 ** (k + 1))
            v_hat = v / (1.0 - 0.999 ** (k + 1))
            w = w - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
    elif method == "gn":
        sq = np.sqrt(d_scale)

        def fit_value(params):
            u = network.forward_stacked(model.with_params(params), grid)
            return 0.5 * float(np.dot(wts, (u - target.values) ** 2))

        for _ in range(iters):
            u, jac = network.forward_and_jacobian(model.with_params(w), grid)
            step, *_ = np.linalg.lstsq(
                sq[:, None] * jac, -sq * (u - target.values), rcond=None
            )
            if not np.all(np.isfinite(step)):
                raise SolverError("pretraining diverged (NaN/Inf step)")
            # full step first; halve on non-decrease (keeps the linear case exact)
            f0 = fit_value(w)
            t = 1.0
            for _ in range(30):
                if fit_value(w + t * step) < f0:
                    w = w + t * step
                    break
                t *= 0.5
            else:
                break
    else:
        raise ParameterError(f"unknown pretraining method {method!r}")
    fitted = model.with_params(w)
    fit_error = norm(network.forward(fitted, grid) - target)
    return PretrainResult(fitted, fit_error)


def initial_model_for(arch: network.MlpArchitecture, cfg: MmsConfig) -> network.MlpModel:
    """Seeded initialization, pretrained when the config prescribes it."""
    if cfg.pretrain is None:
        return network.init_model(arch, cfg.seed)
    p = cfg.pretrain
    return pretrain_initial(arch, p.target, iters=p.iters, lr=p.lr,
                            seed=cfg.seed, method=p.method).model


def _solve(spec: solvers.SubproblemSpec, cfg: MmsConfig):
    """Dispatch one subproblem solve; returns (w_final, inner_trace)."""
    if cfg.solver == "gn":
        return solvers.solve_subproblem_gn(spec, cfg.gn)
    if cfg.solver == "adam":
        return solvers.solve_subproblem_adam(spec, cfg.adam)
    return solvers.solve_subproblem_gd(spec, cfg.gd_lr, cfg.gd_iters)


def run_mms(
    initial: network.MlpModel,
    cfg: MmsConfig,
    energy: EnergyFunctional,
    grid: SampleGrid,
    reference=None,
) -> MmsRunResult:
    """Run the outer proximal iteration and record per-step diagnostics.

    ``reference``, when given, is a sequence of grid functions aligned by
    step (entry n compares against iterate n); tracking errors are NaN
    otherwise.  Solver failures abort the loop and return the partial
    records with ``failed=True``.
    """
    model = initial
    sgrid = solvers.stacked_grid(grid, model.arch.output_dim)
    u = GridFunction(network.forward_stacked(model, grid), sgrid)
    iterates = [u]
    records = []
    for n in range(cfg.outer_steps):
        t_start = time.perf_counter()
        spec = solvers.SubproblemSpec(model, u, energy, cfg.tau, grid)
        jac = network.jacobian(model, grid)
        s_min = network.min_singular_value(jac)
        energy_before = energy.value(u)
        objective_start = solvers.subproblem_objective(spec, model.params)

        snapshot = None
        if cfg.theory_every and n % cfg.theory_every == 0:
            snapshot = theory.constants(
                cfg.tau, energy, u, model, grid,
                epsilon=cfg.theory_epsilon, delta=cfg.theory_delta,
                l_hat_pairs=cfg.l_hat_pairs,
            )

        tracking = math.nan
        if reference is not None:
            tracking = norm(u - reference[n])

        try:
            w_next, inner_trace = _solve(spec, cfg)
        except SolverError as exc:
            return MmsRunResult(records, iterates, model, True, str(exc))

        objective_end = solvers.subproblem_objective(spec, w_next)
        delta_w = float(np.linalg.norm(w_next - model.params))
        model = model.with_params(w_next)
        u_next = GridFunction(network.forward_stacked(model, grid), sgrid)
        step_norm = norm(u_next - u)
        ratio = delta_w * s_min / step_norm if step_norm > 0 else math.nan
        records.append(
            MmsRecord(
                step=n,
                energy=energy_before,
                objective_start=objective_start,
                objective_end=objective_end,
                energy_after=energy.value(u_next),
                tracking_error=tracking,
                s_min=s_min,
                param_step_norm=delta_w,
                function_step_norm=step_norm,
                param_proxy_ratio=ratio,
                stalled=delta_w == 0.0,
                wall_time=time.perf_counter() - t_start,
                theory=snapshot,
                inner_trace=inner_trace,
            )
        )
        u = u_next
        iterates.append(u)
    return MmsRunResult(records, iterates, model)


# ---------------------------------------------------------------------------
# Trajectory serialization (stable column order; wall_time last)
# ---------------------------------------------------------------------------

RECORD_COLUMNS = (
    "step", "energy", "objective_start", "objective_end", "energy_after",
    "tracking_error", "s_min", "param_step_norm", "function_step_norm",
    "param_proxy_ratio", "stalled",
)
THEORY_COLUMNS = tuple(f"tc_{name}" for name in theory.TheoryConstants.FIELDS)


def records_to_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RECORD_COLUMNS + THEORY_COLUMNS + ("wall_time",))
        for r in records:
            row = [
                r.step,
                FLOAT_FMT % r.energy,
                FLOAT_FMT % r.objective_start,
                FLOAT_FMT % r.objective_end,
                FLOAT_FMT % r.energy_after,
                FLOAT_FMT % r.tracking_error,
                FLOAT_FMT % r.s_min,
                FLOAT_FMT % r.param_step_norm,
                FLOAT_FMT % r.function_step_norm,
                FLOAT_FMT % r.param_proxy_ratio,
                int(r.stalled),
            ]
            if r.theory is None:
                row.extend([""] * len(THEORY_COLUMNS))
            else:
                row.extend(
                    FLOAT_FMT % getattr(r.theory, name)
                    for name in theory.TheoryConstants.FIELDS
                )
            row.append(FLOAT_FMT % r.wall_time)
            writer.writerow(row)


def iterates_to_csv(iterates, path) -> None:
    """One row per outer step: step index, then the sampled values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_vals = iterates[0].grid.size
        writer.writerow(["step"] + [f"v_{i}" for i in range(n_vals)])
        for n, u in enumerate(iterates):
            writer.writerow([n] + [FLOAT_FMT % v for v in u.values])


def iterates_from_csv(path, grid: SampleGrid) -> list:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            out.append(GridFunction(np.asarray([float(c) for c in row[1:]]), grid))
    return out


def inner_traces_to_csv(records, path) -> None:
    """Flattened inner-solver trace: one row per inner step."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["outer_step", "inner_step", "objective", "grad_norm", "cg_iters",
             "cg_residual", "accepted_t", "direction_norm"]
        )
        for r in records:
            for k, entry in enumerate(r.inner_trace):
                if isinstance(entry, solvers.GnStepDiag):
                    writer.writerow(
                        [r.step, k, FLOAT_FMT % entry.objective_after,
                         FLOAT_FMT % entry.grad_norm, entry.cg_iters,
                         FLOAT_FMT % entry.cg_residual,
                         FLOAT_FMT % entry.accepted_t,
                         FLOAT_FMT % entry.direction_norm]
                    )
                else:  # first-order solvers trace plain objective values
                    writer.writerow([r.step, k, FLOAT_FMT % entry, "", "", "", "", ""])
