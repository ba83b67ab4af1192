"""Backend parity: the compiled and NumPy kernels must agree to roundoff."""

import numpy as np
import pytest

from mmsflow import _kernels

needs_compiled = pytest.mark.skipif(
    "compiled" not in _kernels.available_backends(),
    reason="compiled extension not built",
)

DIMS_CASES = [
    (1, 1),          # affine scalar
    (3, 1),          # affine multivariate
    (1, 32, 1),      # one hidden layer
    (2, 8, 8, 1),    # two hidden layers
    (4, 6, 5, 3),    # vector output
    (10, 32, 1),
]


def _param_count(dims):
    return sum((a + 1) * b for a, b in zip(dims[:-1], dims[1:]))


@needs_compiled
@pytest.mark.parametrize("dims", DIMS_CASES)
def test_forward_parity(dims, rng):
    nb = _kernels.get_backend("numpy")
    cb = _kernels.get_backend("compiled")
    params = rng.normal(size=_param_count(dims))
    x = rng.uniform(-1, 1, size=(23, dims[0]))
    a = np.asarray(nb.forward(x, params, dims))
    b = np.asarray(cb.forward(x, params, dims))
    assert a.shape == b.shape == (23, dims[-1])
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-14)


@needs_compiled
@pytest.mark.parametrize("dims", DIMS_CASES)
def test_jacobian_parity(dims, rng):
    nb = _kernels.get_backend("numpy")
    cb = _kernels.get_backend("compiled")
    params = rng.normal(size=_param_count(dims))
    x = rng.uniform(-1, 1, size=(11, dims[0]))
    ua, ja = nb.forward_jacobian(x, params, dims)
    ub, jb = cb.forward_jacobian(x, params, dims)
    np.testing.assert_allclose(np.asarray(ua), np.asarray(ub), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(np.asarray(ja), np.asarray(jb), rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("dims", DIMS_CASES)
def test_jacobian_consistent_with_forward(dims, rng):
    # whichever backend is selected: forward_jacobian's output must equal forward
    params = rng.normal(size=_param_count(dims))
    x = rng.uniform(-1, 1, size=(7, dims[0]))
    u1 = np.asarray(_kernels.forward(x, params, dims))
    u2, _ = _kernels.forward_jacobian(x, params, dims)
    np.testing.assert_array_equal(u1.reshape(-1), np.asarray(u2).reshape(-1))


def test_selected_backend_is_listed():
    assert _kernels.BACKEND in _kernels.available_backends()


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")
