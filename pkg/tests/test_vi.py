"""Variational inference tests: sampling, ELBO estimator, gradients, fit."""

import numpy as np
import pytest

import prefbo.vi as vi
from prefbo.model import ComparisonRecord, ModelHyper, Outcome
from prefbo.vi import (DivergenceError, FitConfig, VariationalParams,
                       elbo_estimate, elbo_gradient, elbo_value_and_grad, fit,
                       sample_q, softplus, softplus_inv)


def hyper_1d(**kw):
    return ModelHyper(alpha=np.array([[0.1, 2.0]]), **kw)


def random_instance(rng, n, d, m, beta=1.5):
    X = rng.uniform(-1, 1, (n, d))
    alpha = np.tile([0.2, 2.5], (d, 1))
    hyper = ModelHyper(alpha=alpha, beta=beta)
    comps = []
    for _ in range(m):
        i, j = rng.choice(n, 2, replace=False)
        comps.append(ComparisonRecord(int(i), int(j), Outcome(int(rng.choice([-1, 0, 1])))))
    lam = VariationalParams(mu=rng.normal(0, 0.5, n + d),
                            rho=rng.normal(0, 0.5, n + d),
                            n_points=n, n_dims=d)
    return X, comps, hyper, lam


class TestVariationalParams:
    def test_parameter_count(self):
        lam = VariationalParams.initial(7, 3)
        assert lam.n_params == 2 * (7 + 3)

    def test_initial_scales(self):
        lam = VariationalParams.initial(2, 2)
        np.testing.assert_allclose(lam.sigma[:2], 0.5, rtol=1e-12)
        np.testing.assert_allclose(lam.sigma[2:], 1.0, rtol=1e-12)

    def test_extended_preserves_fitted_values(self):
        lam = VariationalParams(mu=np.array([1.0, 2.0, 9.0]),
                                rho=np.array([0.1, 0.2, 0.9]),
                                n_points=2, n_dims=1)
        grown = lam.extended(2)
        assert grown.n_points == 4 and grown.n_dims == 1
        np.testing.assert_array_equal(grown.mu[[0, 1, 4]], [1.0, 2.0, 9.0])
        np.testing.assert_array_equal(grown.mu[2:4], [0.0, 0.0])
        np.testing.assert_allclose(softplus(grown.rho[2:4]), 0.5, rtol=1e-12)

    def test_size_validation(self):
        with pytest.raises(ValueError):
            VariationalParams(mu=np.zeros(3), rho=np.zeros(3), n_points=3, n_dims=1)

    def test_softplus_inverse(self):
        for y in [0.01, 0.5, 1.0, 5.0]:
            assert softplus(softplus_inv(y)) == pytest.approx(y, rel=1e-12)


class TestSampleQ:
    def test_tiny_scale_is_deterministic(self):
        lam = VariationalParams(mu=np.array([1.5, -0.5]),
                                rho=np.full(2, -60.0), n_points=1, n_dims=1)
        s = sample_q(lam, np.array([[0.0]]), hyper_1d(), np.random.default_rng(0))
        assert s.f[0] == pytest.approx(1.5, abs=1e-12)
        assert s.gamma[0] == pytest.approx(-0.5, abs=1e-12)

    def test_fixed_seed_reproducible(self):
        lam = VariationalParams.initial(2, 1)
        X = np.array([[0.0], [1.0]])
        a = sample_q(lam, X, hyper_1d(), np.random.default_rng(11))
        b = sample_q(lam, X, hyper_1d(), np.random.default_rng(11))
        np.testing.assert_array_equal(a.f, b.f)
        np.testing.assert_array_equal(a.gamma, b.gamma)
        np.testing.assert_array_equal(a.theta, b.theta)

    def test_derived_fields_consistent(self):
        lam = VariationalParams.initial(3, 1)
        X = np.array([[0.0], [0.4], [1.0]])
        s = sample_q(lam, X, hyper_1d(), np.random.default_rng(3))
        from prefbo.model import lengthscale_transform
        np.testing.assert_allclose(s.theta,
                                   lengthscale_transform(s.gamma, hyper_1d().alpha))
        assert s.cov.K.shape == (3, 3)

    def test_empirical_mean_matches_clt_bound(self):
        lam = VariationalParams(mu=np.array([0.7, -0.3]),
                                rho=np.array([softplus_inv(0.4), softplus_inv(1.2)]),
                                n_points=1, n_dims=1)
        X = np.array([[0.5]])
        hyper = hyper_1d()
        rng = np.random.default_rng(7)
        n = 100_000
        total = np.zeros(2)
        for _ in range(n):
            s = sample_q(lam, X, hyper, rng)
            total += (s.f[0], s.gamma[0])
        mean = total / n
        bound = 4.0 * lam.sigma / np.sqrt(n)
        assert abs(mean[0] - 0.7) <= bound[0]
        assert abs(mean[1] + 0.3) <= bound[1]


class TestElboEstimate:
    def test_matches_prior_exactly_when_q_is_prior(self):
        # one point: f ~ N(0, v + jitter) independent of gamma, so setting
        # q to those marginals makes log p - log q vanish pointwise
        hyper = hyper_1d()
        scale_f = np.sqrt(1.0 + 1e-6)
        lam = VariationalParams(
            mu=np.zeros(2),
            rho=np.array([softplus_inv(scale_f), softplus_inv(1.0)]),
            n_points=1, n_dims=1)
        value = elbo_estimate(lam, np.array([[0.2]]), [], hyper, 10_000,
                              np.random.default_rng(0))
        assert abs(value) <= 0.02

    def test_prior_match_kl_quadrature_oracle(self):
        # independent grid quadrature of KL(q || p) over the (f, gamma)
        # plane; with one point and no data the joint p factorizes as
        # N(f; 0, v + jitter) * N(gamma; 0, 1), so KL should vanish
        scale_f = np.sqrt(1.0 + 1e-6)
        fs = np.linspace(-10, 10, 1601)
        gs = np.linspace(-10, 10, 1601)
        df, dg = fs[1] - fs[0], gs[1] - gs[0]
        F, G = np.meshgrid(fs, gs, indexing="ij")
        log_q = (-0.5 * (F / scale_f) ** 2 - np.log(scale_f)
                 - 0.5 * G**2 - np.log(2 * np.pi))
        log_p = (-0.5 * F**2 / (1.0 + 1e-6) - 0.5 * np.log(1.0 + 1e-6)
                 - 0.5 * G**2 - np.log(2 * np.pi))
        kl = np.sum(np.exp(log_q) * (log_q - log_p)) * df * dg
        assert kl == pytest.approx(0.0, abs=1e-10)

    def test_unbiasedness_paired_seeds(self):
        rng = np.random.default_rng(9)
        X, comps, hyper, lam = random_instance(rng, 3, 1, 3)
        diffs = []
        for seed in range(200):
            e1 = elbo_estimate(lam, X, comps, hyper, 32, np.random.default_rng(seed))
            e2 = elbo_estimate(lam, X, comps, hyper, 64, np.random.default_rng(seed))
            diffs.append(e2 - e1)
        diffs = np.array(diffs)
        se = diffs.std(ddof=1) / np.sqrt(diffs.size)
        assert abs(diffs.mean()) <= 3.0 * se

    def test_comparison_order_invariance(self):
        rng = np.random.default_rng(10)
        X, comps, hyper, lam = random_instance(rng, 4, 2, 5)
        e1 = elbo_estimate(lam, X, comps, hyper, 64, np.random.default_rng(1))
        e2 = elbo_estimate(lam, X, comps[::-1], hyper, 64, np.random.default_rng(1))
        assert e1 == pytest.approx(e2, rel=1e-12)

    def test_upper_bounded_by_log_evidence(self, quadrature_log_evidence):
        # N=2, D=1, one comparison: 3 latent dimensions, brute-force oracle
        X = np.array([[0.0], [1.0]])
        hyper = hyper_1d(beta=1.5)
        comps = [ComparisonRecord(0, 1, Outcome.FIRST_BETTER)]
        log_z = quadrature_log_evidence(X, comps, hyper)
        lam = fit(VariationalParams.initial(2, 1), X, comps, hyper,
                  FitConfig(seed=0, max_steps=2000))
        elbo = elbo_estimate(lam, X, comps, hyper, 8192, np.random.default_rng(5))
        assert elbo <= log_z + 0.01


class TestElboGradient:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        n, d = int(rng.integers(2, 5)), int(rng.integers(1, 3))
        X, comps, hyper, lam = random_instance(rng, n, d, int(rng.integers(0, 6)))
        eps = rng.standard_normal((1, n + d))
        _, grad = elbo_value_and_grad(lam, X, comps, hyper, eps)
        h = 1e-5
        size = n + d
        for k in range(2 * size):
            mu_p, rho_p = lam.mu.copy(), lam.rho.copy()
            mu_m, rho_m = lam.mu.copy(), lam.rho.copy()
            if k < size:
                mu_p[k] += h
                mu_m[k] -= h
            else:
                rho_p[k - size] += h
                rho_m[k - size] -= h
            vp, _ = elbo_value_and_grad(
                VariationalParams(mu_p, rho_p, n, d), X, comps, hyper, eps)
            vm, _ = elbo_value_and_grad(
                VariationalParams(mu_m, rho_m, n, d), X, comps, hyper, eps)
            fd = (vp - vm) / (2 * h)
            assert abs(grad[k] - fd) <= max(1e-4, 1e-3 * abs(grad[k]))

    def test_gradient_small_at_optimum(self):
        # optimize the frozen-noise ELBO surface (deterministic) with an
        # independent optimizer; our gradient must vanish at its optimum
        from scipy.optimize import minimize

        X = np.array([[0.25], [0.75]])
        hyper = hyper_1d()
        comps = [ComparisonRecord(0, 1, Outcome.FIRST_BETTER)]
        eps = np.random.default_rng(3).standard_normal((64, 3))
        lam0 = fit(VariationalParams.initial(2, 1), X, comps, hyper,
                   FitConfig(seed=3, max_steps=500))

        def objective(params):
            lam = VariationalParams(params[:3], params[3:], 2, 1)
            value, grad = elbo_value_and_grad(lam, X, comps, hyper, eps)
            return -value, -grad

        start = np.concatenate([lam0.mu, lam0.rho])
        result = minimize(objective, start, jac=True, method="L-BFGS-B",
                          options={"maxiter": 500, "gtol": 1e-10})
        _, grad = objective(result.x)
        assert np.linalg.norm(grad) < 1e-3

    def test_unreferenced_points_see_only_prior_mismatch(self):
        # the likelihood must not leak into coordinates of points that no
        # comparison touches: their gradient matches the no-data gradient
        rng = np.random.default_rng(4)
        X = rng.uniform(-1, 1, (4, 1))
        hyper = hyper_1d()
        lam = VariationalParams(mu=rng.normal(0, 0.5, 5),
                                rho=rng.normal(0, 0.3, 5), n_points=4, n_dims=1)
        comps = [ComparisonRecord(0, 1, Outcome.FIRST_BETTER),
                 ComparisonRecord(1, 0, Outcome.EQUIVALENT)]
        eps = rng.standard_normal((8, 5))
        _, g_with = elbo_value_and_grad(lam, X, comps, hyper, eps)
        _, g_without = elbo_value_and_grad(lam, X, [], hyper, eps)
        size = 5
        for k in (2, 3):  # f coordinates of untouched points
            assert g_with[k] == pytest.approx(g_without[k], rel=1e-12, abs=1e-12)
            assert g_with[size + k] == pytest.approx(g_without[size + k],
                                                     rel=1e-12, abs=1e-12)


class TestFit:
    def test_prior_recovery_without_comparisons(self):
        # single point: gamma decouples from f exactly, so its fitted
        # marginal should approach the standard normal prior
        X = np.array([[0.5]])
        hyper = hyper_1d()
        lam = fit(VariationalParams.initial(1, 1), X, [], hyper,
                  FitConfig(seed=5, max_steps=3000))
        gamma_mu = lam.mu[1]
        gamma_sigma = softplus(lam.rho[1])
        assert abs(gamma_mu) < 0.1
        assert abs(gamma_sigma - 1.0) < 0.15

    def test_ordering_recovery(self):
        X = np.array([[0.0], [0.5], [1.0]])
        hyper = hyper_1d()
        comps = ([ComparisonRecord(0, 1, Outcome.FIRST_BETTER)] * 20
                 + [ComparisonRecord(1, 2, Outcome.FIRST_BETTER)] * 20)
        lam = fit(VariationalParams.initial(3, 1), X, comps, hyper,
                  FitConfig(seed=6))
        f = lam.f_mean()
        assert f[0] > f[1] > f[2]

    def test_warm_start_is_a_fixed_point(self):
        X = np.array([[0.1], [0.9]])
        hyper = hyper_1d()
        comps = [ComparisonRecord(0, 1, Outcome.FIRST_BETTER)] * 3
        lam1 = fit(VariationalParams.initial(2, 1), X, comps, hyper,
                   FitConfig(seed=7, max_steps=3000))
        lam2 = fit(lam1, X, comps, hyper, FitConfig(seed=8, max_steps=3000))
        diffs = []
        for seed in range(8):
            rng_pair = (np.random.default_rng(seed), np.random.default_rng(seed))
            e1 = elbo_estimate(lam1, X, comps, hyper, 256, rng_pair[0])
            e2 = elbo_estimate(lam2, X, comps, hyper, 256, rng_pair[1])
            diffs.append(e2 - e1)
        diffs = np.array(diffs)
        se = diffs.std(ddof=1) / np.sqrt(diffs.size)
        assert abs(diffs.mean()) <= max(2.0 * se, 0.05)

    def test_final_elbo_not_worse_than_initial(self):
        rng = np.random.default_rng(11)
        X, comps, hyper, _ = random_instance(rng, 3, 1, 4)
        lam0 = VariationalParams.initial(3, 1)
        lam1 = fit(lam0, X, comps, hyper, FitConfig(seed=12))
        e0 = elbo_estimate(lam0, X, comps, hyper, 1024, np.random.default_rng(0))
        e1 = elbo_estimate(lam1, X, comps, hyper, 1024, np.random.default_rng(0))
        assert e1 >= e0 - 0.1

    def test_scales_stay_positive(self):
        rng = np.random.default_rng(13)
        X, comps, hyper, _ = random_instance(rng, 3, 2, 5)
        lam = VariationalParams(mu=np.zeros(5), rho=np.full(5, -8.0),
                                n_points=3, n_dims=2)
        fitted = fit(lam, X, comps, hyper, FitConfig(seed=14, max_steps=200))
        assert np.all(fitted.sigma > 0)

    def test_divergence_guard(self, monkeypatch):
        calls = {"n": 0}

        def bad_batch(*args, **kwargs):
            calls["n"] += 1
            return float("nan"), np.zeros(3), np.zeros(3)

        monkeypatch.setattr(vi, "_elbo_batch", bad_batch)
        X = np.array([[0.0], [1.0]])
        with pytest.raises(DivergenceError, match="step_size"):
            fit(VariationalParams.initial(2, 1), X, [], hyper_1d(),
                FitConfig(seed=1, max_steps=50))
        assert calls["n"] == 10

    def test_mismatched_params_rejected(self):
        X = np.array([[0.0], [1.0]])
        lam = VariationalParams.initial(3, 1)
        with pytest.raises(ValueError):
            fit(lam, X, [], hyper_1d(), FitConfig(seed=0, max_steps=5))

    def test_time_budget_truncates(self):
        import time as _time

        rng = np.random.default_rng(15)
        X, comps, hyper, _ = random_instance(rng, 4, 2, 5)
        started = _time.monotonic()
        lam = fit(VariationalParams.initial(4, 2), X, comps, hyper,
                  FitConfig(seed=16, max_steps=1_000_000, time_budget_s=0.2))
        assert _time.monotonic() - started < 2.0
        assert np.all(np.isfinite(lam.mu)) and np.all(np.isfinite(lam.rho))
