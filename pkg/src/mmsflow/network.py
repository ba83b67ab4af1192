"""Small smooth multilayer perceptrons with exact per-sample Jacobians.

A model is an architecture descriptor plus a flat parameter vector w; the
map w -> u(.; w) is C^2 because only smooth activations (tanh) are
allowed.  ``hidden_widths = ()`` gives the affine model u(x) = W x + b,
which is linear in its parameters and serves as the exactly solvable case
throughout the test-suite oracles.

Evaluation and Jacobian assembly go through the kernel backend selected in
:mod:`mmsflow._kernels` (compiled extension when built, NumPy otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import GridMismatchError, ParameterError
from .hilbert import FLOAT_FMT, GridFunction, SampleGrid
from .linalg import smallest_eig_sym, smallest_eig_sym_inverse_power

_ACTIVATIONS = ("tanh",)
_INITS = ("xavier_normal_zero_bias", "small_uniform")
_TANH_GAIN = 5.0 / 3.0
_SMALL_UNIFORM_SCALE = 0.1


@dataclass(frozen=True)
class MlpArchitecture:
    """Layer sizes, activation and initialization scheme."""

    input_dim: int
    hidden_widths: tuple
    output_dim: int = 1
    activation: str = "tanh"
    init: str = "xavier_normal_zero_bias"

    def __post_init__(self):
        object.__setattr__(self, "hidden_widths", tuple(self.hidden_widths))
        if self.input_dim < 1 or self.output_dim < 1:
            raise ParameterError("layer dimensions must be positive")
        if any(h < 1 for h in self.hidden_widths):
            raise ParameterError("hidden widths must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ParameterError(f"unsupported activation {self.activation!r}")
        if self.init not in _INITS:
            raise ParameterError(f"unsupported init {self.init!r}")

    @property
    def dims(self) -> tuple:
        return (self.input_dim, *self.hidden_widths, self.output_dim)

    @property
    def param_count(self) -> int:
        d = self.dims
        return sum((fin + 1) * fout for fin, fout in zip(d[:-1], d[1:]))


@dataclass(frozen=True)
class MlpModel:
    """Architecture plus flat parameter vector; immutable.

    Parameter updates produce new models via :meth:`with_params`.
    """

    arch: MlpArchitecture
    params: np.ndarray = field(repr=False)

    def __post_init__(self):
        params = np.asarray(self.params, dtype=float)
        if params.shape != (self.arch.param_count,):
            raise ParameterError(
                f"architecture needs {self.arch.param_count} parameters, "
                f"got shape {params.shape}"
            )
        object.__setattr__(self, "params", params)

    def with_params(self, params) -> "MlpModel":
        return MlpModel(self.arch, np.asarray(params, dtype=float))


def init_params(arch: MlpArchitecture, rng: np.random.Generator) -> np.ndarray:
    """Draw an initial parameter vector per the architecture's scheme.

    Xavier normal uses std = gain * sqrt(2 / (fan_in + fan_out)) with the
    tanh gain 5/3 and zero biases.
    """
    dims = arch.dims
    chunks = []
    for fin, fout in zip(dims[:-1], dims[1:]):
        if arch.init == "xavier_normal_zero_bias":
            std = _TANH_GAIN * np.sqrt(2.0 / (fin + fout))
            chunks.append(rng.normal(0.0, std, size=fin * fout))
            chunks.append(np.zeros(fout))
        else:
            chunks.append(
                rng.uniform(-_SMALL_UNIFORM_SCALE, _SMALL_UNIFORM_SCALE, fin * fout)
            )
            chunks.append(
                rng.uniform(-_SMALL_UNIFORM_SCALE, _SMALL_UNIFORM_SCALE, fout)
            )
    return np.concatenate(chunks)


def init_model(arch: MlpArchitecture, seed: int) -> MlpModel:
    return MlpModel(arch, init_params(arch, np.random.default_rng(seed)))


def _check_grid(model: MlpModel, grid: SampleGrid) -> None:
    if grid.dim != model.arch.input_dim:
        raise GridMismatchError(
            f"grid dimension {grid.dim} != network input dim "
            f"{model.arch.input_dim}"
        )


def forward_stacked(model: MlpModel, grid: SampleGrid) -> np.ndarray:
    """Network outputs stacked sample-major into a length N*C vector."""
    _check_grid(model, grid)
    out = _kernels.forward(grid.points, model.params, model.arch.dims)
    return np.asarray(out).reshape(-1)

def forward(model: MlpModel, grid: SampleGrid) -> GridFunction:
    """Evaluate a scalar-output network on the grid."""
    if model.arch.output_dim != 1:
        raise ParameterError(
            "forward() returns a GridFunction for scalar outputs only; "
            "use forward_stacked() for output_dim > 1"
        )
    return GridFunction(forward_stacked(model, grid), grid)


def forward_and_jacobian(model: MlpModel, grid: SampleGrid):
    """Stacked outputs (N*C,) together with the Jacobian (N*C, p).

    Row i*C + c of the Jacobian holds the gradient of output channel c at
    grid point i with respect to the flat parameter vector.
    """
    _check_grid(model, grid)
    out, jac = _kernels.forward_jacobian(grid.points, model.params, model.arch.dims)
    return np.asarray(out).reshape(-1), np.asarray(jac)


def jacobian(model: MlpModel, grid: SampleGrid) -> np.ndarray:
    return forward_and_jacobian(model, grid)[1]


def min_singular_value(jac: np.ndarray, dense_cutoff: int = 2048) -> float:
    """Smallest singular value of the Jacobian, via its p x p Gram matrix.

    Dense symmetric eigensolver up to ``dense_cutoff`` parameters; shifted
    inverse power iteration on J^T J beyond that.
    """
    jac = np.asarray(jac, dtype=float)
    if jac.size == 0:
        raise ParameterError("empty matrix")
    p = jac.shape[1]
    gram = jac.T @ jac
    if p <= dense_cutoff:
        lam = smallest_eig_sym(gram)
    else:
        lam = smallest_eig_sym_inverse_power(gram)
    return float(np.sqrt(max(lam, 0.0)))


def operator_norm(mat: np.ndarray, max_iters: int = 200, tol: float = 1e-12) -> float:
    """Largest singular value by power iteration on the Gram matrix."""
    mat = np.asarray(mat, dtype=float)
    n = mat.shape[1]
    # deterministic non-degenerate start
    v = np.cos(np.arange(1, n + 1, dtype=float))
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iters):
        w = mat.T @ (mat @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v_new = w / nw
        if abs(nw - est) <= tol * max(1.0, nw):
            est = nw
            break
        est = nw
        v = v_new
    return float(np.sqrt(est))


def estimate_jacobian_lipschitz(
    model: MlpModel,
    grid: SampleGrid,
    n_pairs: int = 64,
    radius: float = 1e-2,
    seed: int = 0,
) -> float:
    """Empirical Jacobian Lipschitz constant around the current parameters.

    Samples parameter pairs at the given radius and returns the largest
    observed ratio ||J(w1) - J(w2)||_op / ||w1 - w2||.  This is a local
    estimate, not a global constant.
    """
    rng = np.random.default_rng(seed)
    p = model.arch.param_count
    w = model.params
    best = 0.0
    for _ in range(n_pairs):
        d1 = rng.normal(size=p)
        d1 *= radius / np.linalg.norm(d1)
        d2 = rng.normal(size=p)
        d2 *= radius / np.linalg.norm(d2)
        j1 = jacobian(model.with_params(w + d1), grid)
        j2 = jacobian(model.with_params(w + d2), grid)
        gap = np.linalg.norm(d1 - d2)
        if gap == 0.0:
            continue
        best = max(best, operator_norm(j1 - j2) / gap)
    return best


# ---------------------------------------------------------------------------
# Parameter checkpoints: one architecture header line, then one value per row
# ---------------------------------------------------------------------------


def save_checkpoint(model: MlpModel, path) -> None:
    arch = model.arch
    hidden = ",".join(str(h) for h in arch.hidden_widths) or "-"
    with open(path, "w") as fh:
        fh.write(
            f"# mlp input_dim={arch.input_dim} hidden={hidden} "
            f"output_dim={arch.output_dim} activation={arch.activation} "
            f"init={arch.init}\n"
        )
        for v in model.params:
            fh.write(FLOAT_FMT % v + "\n")


def load_checkpoint(path) -> MlpModel:
    with open(path) as fh:
        header = fh.readline().strip()
        values = [float(line) for line in fh if line.strip()]
    fields = dict(
        item.split("=", 1) for item in header.lstrip("# ").split() if "=" in item
    )
    hidden = fields["hidden"]
    widths = () if hidden == "-" else tuple(int(h) for h in hidden.split(","))
    arch = MlpArchitecture(
        input_dim=int(fields["input_dim"]),
        hidden_widths=widths,
        output_dim=int(fields["output_dim"]),
        activation=fields["activation"],
        init=fields.get("init", "xavier_normal_zero_bias"),
    )
    return MlpModel(arch, np.asarray(values))
