import numpy as np
import pytest

from mmsflow.hilbert import EnergyFunctional, GridFunction, SampleGrid


class CoshEnergy(EnergyFunctional):
    """F[u] = sum_i w_i (cosh(u_i) - 1): smooth, 1-strongly convex, and
    non-quadratic, so it exercises the generic Newton prox path.  The
    gradient Lipschitz constant is only valid on bounded data; tests keep
    values within [-3, 3]."""

    @property
    def m(self):
        return 1.0

    @property
    def lip(self):
        return float(np.cosh(3.0))

    def value(self, u):
        return float(np.dot(u.grid.weights, np.cosh(u.values) - 1.0))

    def gradient(self, u):
        return GridFunction(np.sinh(u.values), u.grid)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def diverse_tanh_model(dim, width, seed):
    """Random one-hidden-layer tanh net with moderate weights and spread
    biases, so the Jacobian Gram matrix is numerically well conditioned
    (zero-bias initializations make the hidden features nearly collinear,
    which would defeat any dense-solve comparison)."""
    from mmsflow.network import MlpArchitecture, MlpModel

    grng = np.random.default_rng(seed)
    arch = MlpArchitecture(dim, (width,))
    params = np.concatenate([
        grng.uniform(0.3, 1.2, dim * width) * grng.choice([-1, 1], dim * width),
        grng.uniform(-1.5, 1.5, width),
        grng.uniform(0.5, 1.5, width) * grng.choice([-1, 1], width),
        grng.uniform(-0.5, 0.5, 1),
    ])
    return MlpModel(arch, params)


def random_grid(rng, n=32, dim=1, weights="uniform"):
    pts = rng.uniform(-1.0, 1.0, size=(n, dim))
    if weights == "uniform":
        return SampleGrid(pts)
    w = rng.uniform(0.5, 1.5, size=n)
    return SampleGrid(pts, w / w.sum())


def random_function(rng, grid, scale=1.0):
    return GridFunction(rng.normal(scale=scale, size=grid.size), grid)
