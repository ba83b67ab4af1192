import numpy as np
import pytest

from mmsflow import network
from mmsflow.errors import GridMismatchError, ParameterError
from mmsflow.hilbert import SampleGrid, uniform_grid
from mmsflow.network import (
    MlpArchitecture,
    MlpModel,
    estimate_jacobian_lipschitz,
    forward,
    forward_and_jacobian,
    forward_stacked,
    init_model,
    jacobian,
    load_checkpoint,
    min_singular_value,
    operator_norm,
    save_checkpoint,
)

from conftest import random_grid


def width1_model(w, b, a, a0):
    # one hidden unit: a * tanh(w x + b) + a0; layout [w, b, a, a0]
    return MlpModel(MlpArchitecture(1, (1,)), np.array([w, b, a, a0], float))


class TestArchitecture:
    def test_param_count(self):
        assert MlpArchitecture(1, (32,)).param_count == 2 * 32 + 33
        assert MlpArchitecture(10, (32,)).param_count == 385
        assert MlpArchitecture(19, ()).param_count == 20

    def test_validation(self):
        with pytest.raises(ParameterError):
            MlpArchitecture(0, (4,))
        with pytest.raises(ParameterError):
            MlpArchitecture(1, (4,), activation="relu")
        with pytest.raises(ParameterError):
            MlpModel(MlpArchitecture(1, (4,)), np.zeros(3))


class TestForward:
    def test_zero_parameters_give_zero_function(self):
        arch = MlpArchitecture(2, (8, 8))
        model = MlpModel(arch, np.zeros(arch.param_count))
        g = random_grid(np.random.default_rng(1), n=9, dim=2)
        assert np.all(forward(model, g).values == 0.0)

    def test_affine_identity(self):
        # u(x) = w . (x, 1) with w = (1, 2, 3) at x = (1, 1) -> 6
        model = MlpModel(MlpArchitecture(2, ()), np.array([1.0, 2.0, 3.0]))
        g = SampleGrid([[1.0, 1.0]])
        assert forward(model, g).values[0] == pytest.approx(6.0)

    def test_width1_at_origin(self):
        g = SampleGrid([[0.0]])
        assert forward(width1_model(1, 0, 1, 0), g).values[0] == 0.0

    def test_dimension_mismatch(self):
        model = init_model(MlpArchitecture(3, (4,)), 0)
        with pytest.raises(GridMismatchError):
            forward(model, uniform_grid(-1, 1, 5))

    def test_vector_output_requires_stacked(self):
        model = init_model(MlpArchitecture(1, (4,), output_dim=2), 0)
        g = uniform_grid(-1, 1, 5)
        with pytest.raises(ParameterError):
            forward(model, g)
        assert forward_stacked(model, g).shape == (10,)


class TestJacobian:
    def test_linear_model_rows_are_features(self, rng):
        g = random_grid(rng, n=20, dim=4)
        arch = MlpArchitecture(4, ())
        for seed in (0, 1):
            model = init_model(arch, seed)
            jac = jacobian(model, g)
            expected = np.hstack([g.points, np.ones((20, 1))])
            np.testing.assert_allclose(jac, expected, atol=1e-15)

    def test_width1_hand_derivatives(self):
        g = SampleGrid([[0.0]])
        jac = jacobian(width1_model(1, 0, 1, 0), g)
        # layout [w, b, a, a0]: du/dw = a sech^2(0) x = 0, du/db = a sech^2(0) = 1,
        # du/da = tanh(0) = 0, du/da0 = 1
        np.testing.assert_allclose(jac[0], [0.0, 1.0, 0.0, 1.0], atol=1e-15)

    @pytest.mark.parametrize("width", [4, 8, 16, 32])
    def test_finite_difference_agreement(self, width, rng):
        arch = MlpArchitecture(2, (width,))
        model = init_model(arch, width)
        g = random_grid(rng, n=12, dim=2)
        _, jac = forward_and_jacobian(model, g)
        h = 1e-5
        p = arch.param_count
        fd = np.empty_like(jac)
        for j in range(p):
            e = np.zeros(p)
            e[j] = h
            up = forward_stacked(model.with_params(model.params + e), g)
            dn = forward_stacked(model.with_params(model.params - e), g)
            fd[:, j] = (up - dn) / (2 * h)
        rel = np.abs(jac - fd) / np.maximum(1.0, np.abs(fd))
        assert rel.max() <= 1e-5

    def test_directional_consistency(self, rng):
        arch = MlpArchitecture(1, (6, 5))
        model = init_model(arch, 7)
        g = random_grid(rng, n=8, dim=1)
        jac = jacobian(model, g)
        t = 1e-6
        for j in rng.choice(arch.param_count, size=5, replace=False):
            e = np.zeros(arch.param_count)
            e[j] = 1.0
            up = forward_stacked(model.with_params(model.params + t * e), g)
            dn = forward_stacked(model.with_params(model.params - t * e), g)
            np.testing.assert_allclose((up - dn) / (2 * t), jac[:, j], atol=1e-7)


class TestMinSingularValue:
    def test_identity(self):
        assert min_singular_value(np.eye(7)) == pytest.approx(1.0)

    def test_diagonal(self):
        assert min_singular_value(np.diag([3.0, 2.0, 0.5])) == pytest.approx(0.5)

    def test_matches_dense_svd(self, rng):
        jac = rng.normal(size=(50, 20))
        oracle = np.linalg.svd(jac, compute_uv=False).min()
        assert min_singular_value(jac) == pytest.approx(oracle, abs=1e-8)

    def test_inverse_power_path(self, rng):
        jac = rng.normal(size=(40, 12))
        oracle = np.linalg.svd(jac, compute_uv=False).min()
        assert min_singular_value(jac, dense_cutoff=4) == pytest.approx(
            oracle, abs=1e-6
        )

    def test_rayleigh_upper_bound(self, rng):
        jac = rng.normal(size=(30, 10))
        s = min_singular_value(jac)
        gram = jac.T @ jac
        for _ in range(25):
            z = rng.normal(size=10)
            z /= np.linalg.norm(z)
            assert s**2 <= z @ gram @ z + 1e-10

    def test_empty_rejected(self):
        with pytest.raises(ParameterError):
            min_singular_value(np.empty((0, 0)))


class TestOperatorNorm:
    def test_matches_dense(self, rng):
        for shape in [(20, 7), (7, 20), (15, 15)]:
            m = rng.normal(size=shape)
            assert operator_norm(m) == pytest.approx(
                np.linalg.norm(m, 2), rel=1e-9
            )

    def test_zero_matrix(self):
        assert operator_norm(np.zeros((4, 3))) == 0.0


class TestLipschitzEstimate:
    def test_linear_model_has_constant_jacobian(self, rng):
        g = random_grid(rng, n=10, dim=3)
        model = init_model(MlpArchitecture(3, ()), 0)
        assert estimate_jacobian_lipschitz(model, g, n_pairs=8) <= 1e-12

    def test_positive_for_tanh_net(self, rng):
        g = random_grid(rng, n=10, dim=1)
        model = init_model(MlpArchitecture(1, (8,)), 0)
        assert estimate_jacobian_lipschitz(model, g, n_pairs=8) > 0.0


class TestCheckpoints:
    def test_round_trip(self, tmp_path):
        model = init_model(MlpArchitecture(3, (5, 4), init="small_uniform"), 11)
        path = tmp_path / "ckpt.csv"
        save_checkpoint(model, path)
        back = load_checkpoint(path)
        assert back.arch == model.arch
        np.testing.assert_array_equal(back.params, model.params)

    def test_affine_round_trip(self, tmp_path):
        model = init_model(MlpArchitecture(2, ()), 0)
        path = tmp_path / "ckpt.csv"
        save_checkpoint(model, path)
        assert load_checkpoint(path).arch.hidden_widths == ()


class TestInit:
    def test_xavier_zero_biases(self):
        arch = MlpArchitecture(1, (16,))
        model = init_model(arch, 0)
        # layout: W1 (16), b1 (16), W2 (16), b2 (1)
        assert np.all(model.params[16:32] == 0.0)
        assert model.params[-1] == 0.0

    def test_seeded_determinism(self):
        arch = MlpArchitecture(2, (8,))
        a = init_model(arch, 42).params
        b = init_model(arch, 42).params
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, init_model(arch, 43).params)

    def test_immutability_via_with_params(self):
        model = init_model(MlpArchitecture(1, (4,)), 0)
        other = model.with_params(model.params + 1.0)
        assert not np.array_equal(model.params, other.params)
