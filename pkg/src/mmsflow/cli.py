"""Experiment runner.

Presets reproduce the regression benchmarks at desk scale:

  * ``track1d``     -- 1D regression on 256 uniformly spaced points on
                       [-1, 1], target x^2 + 0.30 sin(2 pi x) + 0.20 cos(3 pi x),
                       prescribed initial condition x^2 fitted by pretraining,
                       tracked against the closed-form reference trajectory.
  * ``regress10d``  -- 10D regression of sum_k cos(pi x_k) on 1000 i.i.d.
                       uniform points, tracked from the network's own
                       initial output.
  * ``csv_regression`` -- any user CSV with numeric feature/target columns.
  * ``custom``      -- everything explicit.

Configuration precedence: command-line flags > config file > preset
defaults; the resolved configuration is echoed into the output directory.
Exit status: 0 when every certificate passes, 2 on certificate failure,
1 on a runtime error.  All numeric output uses 17 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import mms, network, reference, solvers, theory
from .errors import IngestError, ParameterError
from .hilbert import (
    FLOAT_FMT,
    GridFunction,
    QuadraticRegressionEnergy,
    SampleGrid,
    iid_uniform_grid,
    load_grid_function,
    norm,
    save_grid_function,
    uniform_grid,
)

# ---------------------------------------------------------------------------
# Builtin target formulas
# ---------------------------------------------------------------------------


def _target_track1d(x):
    t = x[:, 0]
    return t**2 + 0.30 * np.sin(2.0 * np.pi * t) + 0.20 * np.cos(3.0 * np.pi * t)


def _target_parabola(x):
    return x[:, 0] ** 2


def _target_cos_sum(x):
    return np.cos(np.pi * x).sum(axis=1)


BUILTIN_TARGETS = {
    "track1d": _target_track1d,
    "parabola": _target_parabola,
    "cos_sum": _target_cos_sum,
}


def sample_target(name: str, grid: SampleGrid) -> GridFunction:
    if name not in BUILTIN_TARGETS:
        raise ParameterError(f"unknown builtin target {name!r}")
    return GridFunction(BUILTIN_TARGETS[name](grid.points), grid)


# ---------------------------------------------------------------------------
# Experiment configuration
# ---------------------------------------------------------------------------

PRESETS = ("track1d", "regress10d", "csv_regression", "custom")


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str = "custom"
    seed: int = 0
    out_dir: str = "runs/out"
    solvers: str = "gn"  # comma-separated sweep: gn, adam, gd, exact

    # outer scheme
    tau: float = 0.1
    outer_steps: int = 30

    # grid + target (exactly one target source: builtin name or CSV path)
    grid_count: int = 256
    grid_dim: int = 1
    grid_lo: float = -1.0
    grid_hi: float = 1.0
    grid_sampling: str = "uniform-grid"  # uniform-grid | iid-uniform
    target: str = "track1d"  # builtin id, or "csv" with csv_path
    csv_path: str = ""
    feature_cols: str = ""  # comma-separated header names ("" = all but target)
    target_col: str = ""
    standardize: bool = True

    # network
    hidden_widths: str = "32"
    init: str = "xavier_normal_zero_bias"

    # initial condition: builtin target id pretrained into the network,
    # or "" to start from the raw initialization
    initial_condition: str = ""
    pretrain_iters: int = 2000
    pretrain_lr: float = 1e-3
    pretrain_method: str = "adam"

    # inner solvers
    gn_inner_steps: int = 5
    lm_damping: float = 0.0
    cg_max_iters: int = 30
    cg_rel_tolerance: float = 1e-8
    ls_contraction: float = 0.5
    ls_max_backtracks: int = 8
    ls_max_step_norm: float = 5.0
    ls_initial_step: float = 1.0
    adam_lr: float = 1e-3
    adam_iters: int = 500
    gd_lr: float = 1e-3
    gd_iters: int = 500

    # theory / certification
    epsilon: float = 0.0
    delta: float = math.nan
    theory_every: int = 0
    l_hat_pairs: int = 64

    # test metrics (builtin targets only)
    test_count: int = 1000

    # run solver-sweep entries in separate processes
    parallel: bool = False

    def hidden_tuple(self):
        s = self.hidden_widths.strip()
        return tuple(int(w) for w in s.split(",") if w) if s else ()

    def solver_list(self):
        return [s.strip() for s in self.solvers.split(",") if s.strip()]


PRESET_DEFAULTS = {
    "track1d": dict(
        grid_count=256, grid_dim=1, grid_lo=-1.0, grid_hi=1.0,
        grid_sampling="uniform-grid", target="track1d",
        initial_condition="parabola", hidden_widths="32",
        tau=0.1, outer_steps=30, theory_every=1,
    ),
    "regress10d": dict(
        grid_count=1000, grid_dim=10, grid_lo=-1.0, grid_hi=1.0,
        grid_sampling="iid-uniform", target="cos_sum",
        initial_condition="", hidden_widths="32",
        tau=0.1, outer_steps=30, theory_every=0,
    ),
    "csv_regression": dict(
        target="csv", grid_sampling="iid-uniform", initial_condition="",
        hidden_widths="32", tau=0.1, outer_steps=30, theory_every=0,
    ),
    "custom": {},
}


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ParameterError(f"unknown configuration key {name!r}")
    kind = _FIELD_TYPES[name]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("1", "true", "yes", "on"):
            return True
        if raw.lower() in ("0", "false", "no", "off"):
            return False
        raise ParameterError(f"cannot parse boolean {name}={raw!r}")
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    return raw


def read_config_file(path) -> dict:
    """Flat ``key = value`` file; '#' starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(f"{path}:{lineno}: expected key = value")
            key, raw = line.split("=", 1)
            values[key.strip()] = _coerce(key.strip(), raw)
    return values


def resolve_config(
    file_values: dict, flag_values: dict, require_seed: bool = False
) -> ExperimentConfig:
    """defaults < preset < file < flags."""
    preset = flag_values.get("preset", file_values.get("preset", "custom"))
    if preset not in PRESETS:
        raise ParameterError(f"unknown preset {preset!r}")
    if require_seed and "seed" not in file_values and "seed" not in flag_values:
        raise ParameterError("seed is required (flag --seed or config key)")
    merged = dict(PRESET_DEFAULTS[preset])
    merged.update(file_values)
    merged.update(flag_values)
    merged["preset"] = preset
    cfg = ExperimentConfig(**merged)
    if cfg.target == "csv":
        if not cfg.csv_path or not cfg.target_col:
            raise ParameterError("csv target requires csv_path and target_col")
    elif cfg.csv_path:
        raise ParameterError(
            "exactly one target source: drop csv_path or set target = csv"
        )
    return cfg


def echo_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w") as fh:
        for f in fields(ExperimentConfig):
            value = getattr(cfg, f.name)
            if isinstance(value, float):
                value = FLOAT_FMT % value
            fh.write(f"{f.name} = {value}\n")


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


@dataclass
class IngestResult:
    grid: SampleGrid
    target: GridFunction
    transform: dict  # column -> (mean, std); empty when not standardized


def ingest_csv(path, feature_cols, target_col, standardize: bool) -> IngestResult:
    """Read a numeric regression table.

    ``feature_cols`` is a list of header names (empty = every column except
    the target).  Standardization maps each feature and the target to zero
    mean and unit variance using population (1/N) statistics computed from
    the ingested rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError("empty file") from None
        header = [h.strip() for h in header]
        if target_col not in header:
            raise IngestError(f"target column {target_col!r} not in header")
        if not feature_cols:
            feature_cols = [h for h in header if h != target_col]
        missing = [c for c in feature_cols if c not in header]
        if missing:
            raise IngestError(f"feature columns not in header: {missing}")
        col_idx = {name: header.index(name) for name in feature_cols + [target_col]}
        rows = []
        for rownum, row in enumerate(reader, 2):  # header is line 1
            parsed = {}
            for name, idx in col_idx.items():
                cell = row[idx].strip() if idx < len(row) else ""
                try:
                    value = float(cell)
                except ValueError:
                    raise IngestError(
                        f"non-numeric cell at row {rownum}, column {name!r}: {cell!r}",
                        row=rownum, column=name,
                    ) from None
                if not math.isfinite(value):
                    raise IngestError(
                        f"non-finite cell at row {rownum}, column {name!r}",
                        row=rownum, column=name,
                    )
                parsed[name] = value
            rows.append(parsed)
    if not rows:
        raise IngestError("no data rows")
    features = np.asarray([[r[c] for c in feature_cols] for r in rows])
    target = np.asarray([r[target_col] for r in rows])
    transform = {}
    if standardize:
        for k, name in enumerate(feature_cols):
            mean, std = features[:, k].mean(), features[:, k].std()
            if std == 0.0:
                raise IngestError(f"constant column {name!r} cannot be standardized",
                                  column=name)
            features[:, k] = (features[:, k] - mean) / std
            transform[name] = (mean, std)
        mean, std = target.mean(), target.std()
        if std == 0.0:
            raise IngestError(f"constant column {target_col!r} cannot be standardized",
                              column=target_col)
        target = (target - mean) / std
        transform[target_col] = (mean, std)
    grid = SampleGrid(features)
    return IngestResult(grid, GridFunction(target, grid), transform)


def _write_transform(transform: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["column", "mean", "std"])
        for name, (mean, std) in transform.items():
            writer.writerow([name, FLOAT_FMT % mean, FLOAT_FMT % std])


# ---------------------------------------------------------------------------
# Experiment driver
# ---------------------------------------------------------------------------


@dataclass
class SolverOutcome:
    name: str
    final_energy: float
    final_tracking_error: float
    rel_l2: float
    wall_time: float
    certificate_passed: bool
    failed: bool


def _build_problem(cfg: ExperimentConfig, out: Path | None):
    """Grid, target function, energy, and optional test data.

    Fully determined by the configuration (seeded), so it can be rebuilt
    identically in worker processes; artifacts are only written when an
    output directory is given.
    """
    rng = np.random.default_rng(cfg.seed)
    if cfg.target == "csv":
        if not cfg.csv_path:
            raise ParameterError("csv target requires csv_path")
        feature_cols = [c.strip() for c in cfg.feature_cols.split(",") if c.strip()]
        ingest = ingest_csv(cfg.csv_path, feature_cols, cfg.target_col,
                            cfg.standardize)
        if ingest.transform and out is not None:
            _write_transform(ingest.transform, out / "standardization.csv")
        return ingest.grid, ingest.target, None
    if cfg.grid_sampling == "uniform-grid":
        if cfg.grid_dim != 1:
            raise ParameterError("uniform-grid sampling is 1D; use iid-uniform")
        grid = uniform_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_count)
    elif cfg.grid_sampling == "iid-uniform":
        grid = iid_uniform_grid(cfg.grid_lo, cfg.grid_hi, cfg.grid_count,
                                cfg.grid_dim, rng)
    else:
        raise ParameterError(f"unknown grid sampling {cfg.grid_sampling!r}")
    target = sample_target(cfg.target, grid)
    # held-out test grid for the summary's relative L2 column
    if cfg.grid_dim == 1:
        test_grid = uniform_grid(cfg.grid_lo, cfg.grid_hi, cfg.test_count)
    else:
        test_grid = iid_uniform_grid(cfg.grid_lo, cfg.grid_hi, cfg.test_count,
                                     cfg.grid_dim, np.random.default_rng(cfg.seed + 1))
    return grid, target, (test_grid, sample_target(cfg.target, test_grid))


def _initial_model(cfg: ExperimentConfig, grid: SampleGrid, out: Path | None):
    arch = network.MlpArchitecture(grid.dim, cfg.hidden_tuple(), init=cfg.init)
    if not cfg.initial_condition:
        return network.init_model(arch, cfg.seed), None
    prescribed = sample_target(cfg.initial_condition, grid)
    result = mms.pretrain_initial(
        arch, prescribed, iters=cfg.pretrain_iters, lr=cfg.pretrain_lr,
        seed=cfg.seed, method=cfg.pretrain_method,
    )
    if out is not None:
        with open(out / "pretrain.txt", "w") as fh:
            fh.write(f"fit_error = {FLOAT_FMT % result.fit_error}\n")
    return result.model, prescribed


def _mms_config(cfg: ExperimentConfig, solver: str) -> mms.MmsConfig:
    return mms.MmsConfig(
        tau=cfg.tau,
        outer_steps=cfg.outer_steps,
        solver=solver,
        gn=solvers.GnConfig(
            inner_steps=cfg.gn_inner_steps,
            lm_damping=cfg.lm_damping,
            cg=solvers.CgConfig(cfg.cg_max_iters, cfg.cg_rel_tolerance),
            line_search=solvers.LineSearchConfig(
                cfg.ls_contraction, cfg.ls_max_backtracks,
                cfg.ls_max_step_norm, cfg.ls_initial_step,
            ),
        ),
        adam=solvers.AdamConfig(learning_rate=cfg.adam_lr, inner_iters=cfg.adam_iters),
        gd_lr=cfg.gd_lr,
        gd_iters=cfg.gd_iters,
        seed=cfg.seed,
        theory_every=cfg.theory_every,
        theory_epsilon=cfg.epsilon,
        theory_delta=cfg.delta,
        l_hat_pairs=cfg.l_hat_pairs,
    )


def _exact_records(ref: reference.ExactTrajectory, energy) -> list:
    records = []
    for n in range(len(ref) - 1):
        u, u_next = ref[n], ref[n + 1]
        gap = norm(u_next - u)
        records.append(mms.MmsRecord(
            step=n,
            energy=energy.value(u),
            objective_start=energy.value(u),
            objective_end=gap**2 / (2.0 * ref.tau) + energy.value(u_next),
            energy_after=energy.value(u_next),
            tracking_error=0.0,
            s_min=math.nan,
            param_step_norm=math.nan,
            function_step_norm=gap,
            param_proxy_ratio=math.nan,
            stalled=False,
            wall_time=0.0,
        ))
    return records


def _run_single_solver(cfg: ExperimentConfig, solver_name: str) -> SolverOutcome:
    """One sweep entry, rebuilt deterministically from the configuration.

    Self-contained (no shared state) so that entries can run in separate
    processes; output files are confined to the per-solver directory.
    """
    out = Path(cfg.out_dir)
    solver_dir = out / solver_name
    solver_dir.mkdir(parents=True, exist_ok=True)
    grid, target, test_data = _build_problem(cfg, None)
    energy = QuadraticRegressionEnergy(target)
    model0, prescribed = _initial_model(cfg, grid, None)
    ref_start = prescribed if prescribed is not None else network.forward(model0, grid)
    ref = reference.ExactTrajectory.generate(ref_start, target, cfg.tau,
                                             cfg.outer_steps)

    t0 = time.perf_counter()
    if solver_name == "exact":
        iterates = list(ref.steps)
        records = _exact_records(ref, energy)
        final_model = None
        failed = False
    else:
        result = mms.run_mms(model0, _mms_config(cfg, solver_name), energy,
                             grid, reference=ref.steps)
        iterates, records = result.iterates, result.records
        final_model = result.final_model
        failed = result.failed
        if failed:
            print(f"{solver_name}: solver failed: {result.error}", file=sys.stderr)
    wall = time.perf_counter() - t0

    mms.records_to_csv(records, solver_dir / "records.csv")
    mms.iterates_to_csv(iterates, solver_dir / "iterates.csv")
    mms.inner_traces_to_csv(records, solver_dir / "inner_trace.csv")
    if final_model is not None:
        network.save_checkpoint(final_model, solver_dir / "checkpoint.csv")

    certified = False
    tracking = math.nan
    if len(iterates) == len(ref.steps):
        pack = next((r.theory for r in records if r.theory is not None), None)
        cert = theory.certify_tracking(
            iterates, ref.steps, cfg.tau, energy, epsilon=cfg.epsilon,
            u_star=energy.minimizer(), constants=pack,
        )
        cert.to_csv(solver_dir / "certificate.csv")
        report = cert.summary_text()
        if pack is not None and math.isfinite(cfg.delta):
            report += "\ninner-effort thresholds at the first iterate:\n"
            report += theory.effort_report(energy.value(iterates[0]), pack)
        (solver_dir / "certificate.txt").write_text(report + "\n")
        certified = cert.passed
        tracking = norm(iterates[-1] - ref.steps[-1])

    rel_l2 = math.nan
    if test_data is not None and final_model is not None and not failed:
        test_grid, test_target = test_data
        pred = network.forward(final_model, test_grid)
        denom = norm(test_target)
        rel_l2 = norm(pred - test_target) / denom if denom > 0 else math.nan
    return SolverOutcome(
        name=solver_name,
        final_energy=energy.value(iterates[-1]),
        final_tracking_error=tracking,
        rel_l2=rel_l2,
        wall_time=wall,
        certificate_passed=certified,
        failed=failed,
    )


def run_experiment(cfg: ExperimentConfig) -> int:
    """Run the solver sweep; returns the process exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, out / "config_echo.txt")

    # shared artifacts written once by the parent
    grid, target, _ = _build_problem(cfg, out)
    save_grid_function(target, out / "grid.csv")
    _initial_model(cfg, grid, out)

    names = cfg.solver_list()
    if cfg.parallel and len(names) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=len(names)) as pool:
            outcomes = list(pool.map(_run_single_solver, [cfg] * len(names), names))
    else:
        outcomes = [_run_single_solver(cfg, name) for name in names]

    _write_summary(outcomes, out / "summary.csv")
    _print_summary(outcomes)
    if any(o.failed for o in outcomes):
        return 1
    return 0 if all(o.certificate_passed for o in outcomes) else 2


SUMMARY_COLUMNS = ("solver", "energy", "tracking_error", "rel_l2", "time_s",
                   "certificate")


def _write_summary(outcomes, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_COLUMNS)
        for o in outcomes:
            writer.writerow([
                o.name, FLOAT_FMT % o.final_energy,
                FLOAT_FMT % o.final_tracking_error, FLOAT_FMT % o.rel_l2,
                FLOAT_FMT % o.wall_time,
                "pass" if o.certificate_passed else "fail",
            ])


def _print_summary(outcomes) -> None:
    print(f"{'solver':<8} {'energy':<24} {'tracking':<24} {'rel_l2':<24} "
          f"{'time_s':<12} cert")
    for o in outcomes:
        print(f"{o.name:<8} {FLOAT_FMT % o.final_energy:<24} "
              f"{FLOAT_FMT % o.final_tracking_error:<24} "
              f"{FLOAT_FMT % o.rel_l2:<24} {o.wall_time:<12.3f} "
              f"{'pass' if o.certificate_passed else 'fail'}")


# ---------------------------------------------------------------------------
# Post-hoc verbs
# ---------------------------------------------------------------------------


def certify_run(run_dir) -> int:
    """Recompute the tracking certificate for an existing run directory."""
    run_dir = Path(run_dir)
    cfg = resolve_config(read_config_file(run_dir.parent / "config_echo.txt"), {})
    target = load_grid_function(run_dir.parent / "grid.csv")
    energy = QuadraticRegressionEnergy(target)
    iterates = mms.iterates_from_csv(run_dir / "iterates.csv", target.grid)
    ref = reference.ExactTrajectory.generate(iterates[0], target, cfg.tau,
                                             len(iterates) - 1)
    # the stored reference start may be the prescribed initial condition
    if cfg.initial_condition:
        prescribed = sample_target(cfg.initial_condition, target.grid)
        ref = reference.ExactTrajectory.generate(prescribed, target, cfg.tau,
                                                 len(iterates) - 1)
    cert = theory.certify_tracking(iterates, ref.steps, cfg.tau, energy,
                                   epsilon=cfg.epsilon,
                                   u_star=energy.minimizer())
    cert.to_csv(run_dir / "certificate.csv")
    (run_dir / "certificate.txt").write_text(cert.summary_text() + "\n")
    print(cert.summary_text())
    return 0 if cert.passed else 2


def compare_runs(path_a, path_b, grid_csv, out_path) -> int:
    """Tracking-error series between two iterate files on a shared grid."""
    target = load_grid_function(grid_csv)
    a = mms.iterates_from_csv(path_a, target.grid)
    b = mms.iterates_from_csv(path_b, target.grid)
    n = min(len(a), len(b))
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "error"])
        for k in range(n):
            writer.writerow([k, FLOAT_FMT % norm(a[k] - b[k])])
    final = norm(a[n - 1] - b[n - 1])
    print(f"compared {n} steps; final error {FLOAT_FMT % final}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value configuration file")
    p.add_argument("--preset", choices=PRESETS)
    p.add_argument("--out", dest="out_dir")
    p.add_argument("--seed", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--outer-steps", dest="outer_steps", type=int)
    p.add_argument("--solvers", help="comma-separated sweep: gn,adam,gd,exact")
    p.add_argument("--hidden", dest="hidden_widths")
    p.add_argument("--target")
    p.add_argument("--csv-path", dest="csv_path")
    p.add_argument("--feature-cols", dest="feature_cols")
    p.add_argument("--target-col", dest="target_col")
    p.add_argument("--standardize", dest="standardize", action="store_true",
                   default=None)
    p.add_argument("--no-standardize", dest="standardize", action="store_false",
                   default=None)
    p.add_argument("--grid-count", dest="grid_count", type=int)
    p.add_argument("--grid-dim", dest="grid_dim", type=int)
    p.add_argument("--gn-steps", dest="gn_inner_steps", type=int)
    p.add_argument("--lm-damping", dest="lm_damping", type=float)
    p.add_argument("--cg-max-iters", dest="cg_max_iters", type=int)
    p.add_argument("--adam-lr", dest="adam_lr", type=float)
    p.add_argument("--adam-iters", dest="adam_iters", type=int)
    p.add_argument("--gd-lr", dest="gd_lr", type=float)
    p.add_argument("--gd-iters", dest="gd_iters", type=int)
    p.add_argument("--pretrain-iters", dest="pretrain_iters", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--theory-every", dest="theory_every", type=int)
    p.add_argument("--parallel", dest="parallel", action="store_true",
                   default=None, help="run sweep entries in separate processes")
    p.add_argument("--set", dest="extra", action="append", default=[],
                   metavar="KEY=VALUE", help="override any configuration key")


def _flag_values(args) -> dict:
    skip = {"command", "config", "extra", "run_dir", "a", "b", "grid", "out_path"}
    values = {k: v for k, v in vars(args).items()
              if k not in skip and v is not None}
    for item in getattr(args, "extra", []):
        if "=" not in item:
            raise ParameterError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = item.split("=", 1)
        values[key.strip()] = _coerce(key.strip(), raw)
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmsflow",
        description="Proximal time-stepping of neural regression energies "
                    "with Gauss-Newton and first-order inner solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a preset or custom experiment sweep")
    _add_run_flags(run)
    cert = sub.add_parser("certify", help="re-certify an existing solver run")
    cert.add_argument("run_dir", help="solver output directory (contains iterates.csv)")
    comp = sub.add_parser("compare", help="tracking-error series between two runs")
    comp.add_argument("--a", required=True, help="first iterates.csv")
    comp.add_argument("--b", required=True, help="second iterates.csv")
    comp.add_argument("--grid", required=True, help="grid.csv defining the norm")
    comp.add_argument("--out", dest="out_path", default="compare.csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            file_values = read_config_file(args.config) if args.config else {}
            cfg = resolve_config(file_values, _flag_values(args), require_seed=True)
            return run_experiment(cfg)
        if args.command == "certify":
            return certify_run(args.run_dir)
        if args.command == "compare":
            return compare_runs(args.a, args.b, args.grid, args.out_path)
    except (ParameterError, IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 1


if __name__ == "__main__":
    sys.exit(main())
