import math

import numpy as np
import pytest

from mmsflow import network, solvers, theory
from mmsflow.errors import ParameterError
from mmsflow.hilbert import (
    GridFunction,
    QuadraticRegressionEnergy,
    SampleGrid,
    norm,
)
from mmsflow.linalg import CgConfig, LineSearchConfig
from mmsflow.mms import MmsConfig, run_mms
from mmsflow.network import MlpArchitecture, init_model
from mmsflow.reference import ExactTrajectory
from mmsflow.theory import (
    TheoryConstants,
    certify_tracking,
    constants,
    convexity_constants,
    data_condition,
    default_dbar,
    effort_report as theory_effort_report,
    inner_horizon_T,
    inner_iters_K,
    lambda_budget,
    locality_threshold,
    sublevel_radius,
)

EXACT_GN = solvers.GnConfig(
    inner_steps=1,
    cg=CgConfig(max_iters=400, rel_tolerance=1e-14),
    line_search=LineSearchConfig(max_step_norm=1e12),
)


def linear_run(rng, tau=0.1, steps=10, n=60, d=9):
    """Exactly solvable neural MMS run plus its ambient reference."""
    grid = SampleGrid(rng.normal(size=(n, d)))
    model = init_model(MlpArchitecture(d, ()), 3)
    phi = np.hstack([grid.points, np.ones((n, 1))])
    f_star = GridFunction(phi @ rng.normal(size=d + 1), grid)
    energy = QuadraticRegressionEnergy(f_star)
    u0 = network.forward(model, grid)
    ref = ExactTrajectory.generate(u0, f_star, tau, steps)
    cfg = MmsConfig(tau=tau, outer_steps=steps, solver="gn", gn=EXACT_GN)
    result = run_mms(model, cfg, energy, grid, reference=ref.steps)
    return result, ref, energy, tau


class TestConvexityConstants:
    def test_hand_case(self):
        nu, mu, kappa, rho = convexity_constants(0.1, 1.0, 1.0)
        assert nu == pytest.approx(11.0)
        assert mu == pytest.approx(11.0)
        assert kappa == pytest.approx(1.0)
        assert rho == pytest.approx(1.0 / 1.1)

    def test_coherence_identities(self, rng):
        for _ in range(200):
            tau = 10.0 ** rng.uniform(-3, 1)
            m = 10.0 ** rng.uniform(-2, 1)
            lip = m * rng.uniform(1.0, 100.0)
            nu, mu, kappa, rho = convexity_constants(tau, m, lip)
            assert abs(kappa * nu - mu) <= 1e-12 * mu
            assert abs(rho * (1.0 + tau * m) - 1.0) <= 1e-12
            assert nu <= mu and kappa >= 1.0 and 0.0 < rho < 1.0

    def test_sublevel_radius(self):
        assert sublevel_radius(1.0, 1.0, 1.0) == pytest.approx(1.0)
        assert sublevel_radius(0.5, 2.0, 0.0) == 0.0

    def test_validation(self):
        with pytest.raises(ParameterError):
            convexity_constants(-1.0, 1.0, 1.0)
        with pytest.raises(ParameterError):
            convexity_constants(1.0, 2.0, 1.0)


class TestConstantsPack:
    def test_at_target_everything_vanishes(self, rng):
        grid = SampleGrid(rng.normal(size=(30, 3)))
        model = init_model(MlpArchitecture(3, ()), 1)
        f_star = network.forward(model, grid)  # model exactly fits target
        energy = QuadraticRegressionEnergy(f_star)
        tc = constants(0.1, energy, f_star, model, grid, l_hat_pairs=2)
        assert tc.k_v == 0.0
        assert tc.h_star_norm <= 1e-15
        assert tc.c_v == 0.0
        assert not tc.degenerate

    def test_data_condition_degenerate_lambda(self):
        assert data_condition(1.0, 2.0, 0.0, 0.5, 0.1) == math.inf
        assert data_condition(1.0, 2.0, 0.0, 0.0, 0.0) == 0.0

    def test_linear_model_radius_infinite(self, rng):
        # constant Jacobian: l_hat = 0 so the safe radius is unbounded
        grid = SampleGrid(rng.normal(size=(30, 3)))
        model = init_model(MlpArchitecture(3, ()), 1)
        energy = QuadraticRegressionEnergy(network.forward(model, grid))
        tc = constants(0.1, energy, energy.target, model, grid, l_hat_pairs=2)
        assert tc.r_w == math.inf
        assert tc.l_hat <= 1e-12

    def test_tanh_net_pack_is_finite(self, rng):
        from conftest import diverse_tanh_model

        model = diverse_tanh_model(2, 3, 4)
        grid = SampleGrid(rng.uniform(-3, 3, size=(50, 2)))
        energy = QuadraticRegressionEnergy(
            GridFunction(np.sin(grid.points.sum(axis=1)), grid)
        )
        v = network.forward(model, grid)
        tc = constants(0.1, energy, v, model, grid, l_hat_pairs=8)
        assert tc.lambda_hat > 0 and tc.l_hat > 0
        assert 0 < tc.r_w < math.inf
        assert tc.big_lambda == pytest.approx(2 * tc.l_hat / tc.lambda_hat**2)
        assert tc.c_v > 0 and math.isfinite(tc.c_v)


class TestInnerHorizon:
    def c(self, tau=1.0, m=1.0, lip=None, eps=0.0, delta=1.0):
        lip = m if lip is None else lip
        return TheoryConstants.from_problem(tau, m, lip, epsilon=eps, delta=delta)

    def test_log_argument_one_gives_zero(self):
        c = self.c(delta=2.0)  # cbar*(1+tau*m)/(tau*m*delta) = 1*2/2 = 1
        assert inner_horizon_T(1.0, c) == 0.0

    def test_hand_case_log_two(self):
        c = self.c()
        # nu = 2; argument = 1*2/1 = 2 -> T = (2/2) log 2
        assert inner_horizon_T(1.0, c) == pytest.approx(math.log(2.0))

    def test_doubling_cbar_adds_log_two_over_half_nu(self):
        c = self.c(tau=0.5, m=2.0, delta=0.5)
        t1 = inner_horizon_T(1.0, c)
        t2 = inner_horizon_T(2.0, c)
        assert t2 - t1 == pytest.approx(2.0 / c.nu * math.log(2.0), rel=1e-12)

    def test_epsilon_too_large_raises(self):
        c = self.c(eps=0.6, delta=1.0)  # need eps < tau*m*delta/(1+tau*m) = 0.5
        with pytest.raises(ParameterError, match="epsilon"):
            inner_horizon_T(1.0, c)

    def test_clamped_below_one(self):
        c = self.c(delta=100.0)
        assert inner_horizon_T(1.0, c) == 0.0


class TestInnerIters:
    def c(self, tau=1.0, m=1.0, lip=None, eps=0.0, delta=1.0):
        lip = m if lip is None else lip
        return TheoryConstants.from_problem(tau, m, lip, epsilon=eps, delta=delta)

    def test_log_argument_below_one_gives_zero(self):
        c = self.c(delta=10.0)
        assert inner_iters_K(1.0, 0.25, c) == 0

    def test_hand_case(self):
        # nu = mu = 2, eta = 1/2 (= 2/(3 mu) * 1.5 -> must stay within cap):
        # cap is 2/(3*2) = 1/3, so use eta = 1/3: q = sqrt(1 - nu*eta/2)
        c = self.c()
        eta = 1.0 / 3.0
        q = math.sqrt(1.0 - c.nu * eta / 2.0)
        # delta = 1: argument = dbar * 2; choose dbar = 1 -> argument 2
        expected = math.ceil(math.log(2.0) / math.log(1.0 / q))
        assert inner_iters_K(1.0, eta, c) == expected

    def test_hand_case_at_maximal_step(self):
        # nu = mu = 2, maximal admissible eta = 1/3: q = sqrt(2/3); with
        # log argument 2 the count is ceil(log 2 / log sqrt(3/2)) = 4
        c = self.c()
        assert inner_iters_K(1.0, 1.0 / 3.0, c) == 4
        assert math.ceil(math.log(2.0) / math.log(math.sqrt(1.5))) == 4

    def test_eta_out_of_range(self):
        c = self.c()
        with pytest.raises(ParameterError):
            inner_iters_K(1.0, 0.0, c)
        with pytest.raises(ParameterError):
            inner_iters_K(1.0, 1.0, c)  # cap 2/(3*2) = 1/3

    def test_euler_limit_matches_continuous_horizon(self):
        # as eta -> 0 the discrete count approaches twice the continuous
        # horizon (the flow-gap bound carries rate nu/4 per unit time
        # against the continuous nu/2)
        c = self.c(tau=0.5, m=2.0, lip=2.0, delta=2.0)
        t = inner_horizon_T(3.0, c)
        eta = 1e-4
        k = inner_iters_K(3.0, eta, c)
        assert k * eta == pytest.approx(2.0 * t, rel=0.05)

    def test_default_dbar(self):
        assert default_dbar(1.0, 4.0) == 1.0
        assert default_dbar(0.0, 4.0) == 0.0

    def test_effort_report_variants(self):
        c = self.c(delta=0.5)
        text = theory_effort_report(4.0, c)
        assert "continuous inner horizon" in text
        assert "discrete inner iterations" in text
        assert "at the minimizer" in theory_effort_report(0.0, c)
        starved = self.c(eps=0.9, delta=1.0)
        assert "unavailable" in theory_effort_report(1.0, starved)


class TestCertifyTracking:
    def test_zero_error_zero_residual(self, rng):
        _, ref, energy, tau = linear_run(rng, steps=6)
        cert = certify_tracking(ref.steps, ref.steps, tau, energy)
        assert cert.passed
        assert cert.sup_error == 0.0
        for s in cert.steps:
            assert s.inner_residual <= 1e-14

    def test_linear_run_certificate(self, rng):
        result, ref, energy, tau = linear_run(rng, steps=10)
        cert = certify_tracking(result.iterates, ref.steps, tau, energy,
                                u_star=energy.minimizer())
        assert cert.passed
        for s in cert.steps:
            assert s.inner_residual <= 1e-8
            assert s.global_passed

    def test_recurrence_violation_detected(self):
        # with the observed inner residual the recurrence is a triangle
        # inequality, so it can only fail via a wrong proximal map or a
        # wrong contraction factor; fake an identity "prox" to trip it
        grid = SampleGrid([[0.0], [1.0]])

        class IdentityProxEnergy(QuadraticRegressionEnergy):
            def prox(self, v, tau):
                return v

        energy = IdentityProxEnergy(GridFunction([0.0, 0.0], grid))
        zero = GridFunction.constant(0.0, grid)
        one = GridFunction.constant(1.0, grid)
        nn = [zero, one, one]
        exact = [zero, zero, zero]
        cert = certify_tracking(nn, exact, 1.0, energy)  # rho = 1/2
        # step 1: e_2 = 1 > rho * e_1 + res_1 = 0.5
        assert not cert.passed
        assert not cert.steps[1].passed

    def test_length_mismatch_raises(self, rng):
        _, ref, energy, tau = linear_run(rng, steps=4)
        with pytest.raises(ParameterError):
            certify_tracking(ref.steps[:-1], ref.steps, tau, energy)

    def test_csv_and_summary(self, rng, tmp_path):
        result, ref, energy, tau = linear_run(rng, steps=4)
        cert = certify_tracking(result.iterates, ref.steps, tau, energy)
        cert.to_csv(tmp_path / "cert.csv")
        text = cert.summary_text()
        assert "PASS" in text
        assert "assumptions" in text
        assert (tmp_path / "cert.csv").exists()

    def test_summary_includes_constants_table(self, rng):
        result, ref, energy, tau = linear_run(rng, steps=3)
        pack = TheoryConstants.from_problem(tau, energy.m, energy.lip)
        cert = certify_tracking(result.iterates, ref.steps, tau, energy,
                                constants=pack)
        text = cert.summary_text()
        assert "constants:" in text and "kappa" in text

    def test_geometric_tracking_bound_on_linear_run(self, rng):
        # with e_0 = 0 and inner residuals below eta0 * rho^n, the error
        # obeys e_n <= rho^n e_0 + n eta0 rho^(n-1)
        result, ref, energy, tau = linear_run(rng, steps=20)
        rho = 1.0 / (1.0 + tau)
        eta0 = 1e-8
        errors = [norm(u - v) for u, v in zip(result.iterates, ref.steps)]
        cert = certify_tracking(result.iterates, ref.steps, tau, energy)
        for n, s in enumerate(cert.steps):
            assert s.inner_residual <= eta0 * rho**n
        e0 = errors[0]
        for n, e in enumerate(errors):
            if n == 0:
                continue
            assert e <= rho**n * e0 + n * eta0 * rho ** (n - 1) + 1e-12

    def test_global_bound_shape(self, rng):
        result, ref, energy, tau = linear_run(rng, steps=12)
        rho = 1.0 / (1.0 + tau)
        u_star = energy.minimizer()
        sup_e = max(norm(u - v) for u, v in zip(result.iterates, ref.steps))
        init_gap = norm(ref.steps[0] - u_star)
        for n, u in enumerate(result.iterates):
            assert norm(u - u_star) <= sup_e + rho**n * init_gap + 1e-10


class TestLambdaBudget:
    def test_constant_when_no_motion(self):
        out = lambda_budget([0.0, 0.0, 0.0], 1.0, 2.0)
        assert out.proxy == [1.0, 1.0, 1.0, 1.0]
        assert out.exhausted_at is None

    def test_exhaustion_flagged(self):
        out = lambda_budget([0.5, 0.5], 1.0, 2.0)
        assert out.proxy == [1.0, 0.5, 0.0]
        assert out.exhausted_at == 2

    def test_proxy_below_empirical_on_gn_run(self, rng):
        # soft check: the worst-case decay lower-bounds the measured
        # non-degeneracy; violations are reported, not raised
        result, ref, energy, tau = linear_run(rng, steps=8)
        deltas = [r.param_step_norm for r in result.records]
        empirical = [r.s_min / 2.0 for r in result.records]
        lambda0 = empirical[0]
        out = lambda_budget(deltas, lambda0, l_hat=1e-9, empirical=empirical)
        assert out.violations == []
        for lam, emp in zip(out.proxy, empirical):
            assert lam <= emp + 1e-9

    def test_violations_reported_not_raised(self):
        # an overconfident lambda0 must surface as a reported violation
        out = lambda_budget([0.0], 5.0, 1.0, empirical=[1.0, 1.0])
        assert out.violations == [0, 1]

    def test_validation(self):
        with pytest.raises(ParameterError):
            lambda_budget([0.1], 0.0, 1.0)
        with pytest.raises(ParameterError):
            lambda_budget([0.1], 1.0, 0.0)


class TestLocalityThreshold:
    def c(self, m=1.0):
        return TheoryConstants.from_problem(1.0, m, m)

    def test_zero_gradient_infinite(self):
        assert locality_threshold(1.0, 0.0, self.c()) == math.inf

    def test_hand_case_unit(self):
        assert locality_threshold(1.0, 1.0, self.c()) == pytest.approx(1.0)

    def test_hand_case_two_thirds(self):
        assert locality_threshold(1.0, 1.0, self.c(m=0.5)) == pytest.approx(2.0 / 3.0)

    def test_near_minimizer_regime(self):
        # rho * m >= 2 * grad: condition holds for every tau
        assert locality_threshold(4.0, 1.0, self.c()) == math.inf

    def test_negative_inputs_rejected(self):
        with pytest.raises(ParameterError):
            locality_threshold(-1.0, 0.0, self.c())
