import math

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from uqpipe import calib, pce, polybasis
from uqpipe.errors import (
    InsufficientSamplesError,
    ShapeError,
    ValidationError,
)
from uqpipe.sampling import Chain, RwmConfig


class TestPriors:
    def test_truncated_normal_integrates_to_one(self):
        prior = calib.default_parameter_prior(0.5, 1.1)
        x, w = leggauss(200)
        xs = 0.5 * (x + 1) * 0.6 + 0.5
        ws = w * 0.3
        integral = np.sum(ws * np.exp([prior.logpdf(v) for v in xs]))
        assert integral == pytest.approx(1.0, abs=1e-10)

    def test_truncated_normal_moments_match_quadrature(self):
        prior = calib.TruncatedNormal(mu=0.2, sigma=0.5, lo=0.0, hi=1.0)
        x, w = leggauss(400)
        xs = 0.5 * (x + 1)
        ws = w * 0.5
        dens = np.exp([prior.logpdf(v) for v in xs])
        mean = np.sum(ws * xs * dens)
        var = np.sum(ws * (xs - mean) ** 2 * dens)
        assert prior.mean == pytest.approx(mean, abs=1e-10)
        assert prior.sd == pytest.approx(math.sqrt(var), abs=1e-10)

    def test_outside_support(self):
        prior = calib.default_parameter_prior(0.5, 1.1)
        assert prior.logpdf(0.49) == -math.inf
        assert prior.logpdf(1.11) == -math.inf

    def test_uniform_density(self):
        assert calib.Uniform(0, 100).logpdf(50.0) \
            == pytest.approx(math.log(1 / 100))

    def test_laplace_mode_density(self):
        assert calib.Laplace(0, 10).logpdf(0.0) \
            == pytest.approx(math.log(1 / 20))

    def test_sampling_respects_support(self):
        rng = np.random.default_rng(0)
        prior = calib.TruncatedNormal(mu=0.0, sigma=1.0, lo=0.3, hi=0.6)
        draws = [prior.sample(rng) for _ in range(500)]
        assert min(draws) >= 0.3 and max(draws) <= 0.6

    def test_default_prior_shape(self):
        prior = calib.default_parameter_prior(0.5, 1.1)
        assert prior.mu == pytest.approx(0.8)
        assert prior.sigma == pytest.approx(0.1)


class TestIidLikelihood:
    def test_zero_residual_closed_form(self):
        y = np.zeros(601)
        want = -(601 / 2) * math.log(2 * math.pi)
        assert calib.log_likelihood_iid(y, y, 1.0) == pytest.approx(want)

    def test_sigma_doubling(self):
        y = np.zeros(601)
        low = calib.log_likelihood_iid(y, y, 1.0)
        high = calib.log_likelihood_iid(y, y, 2.0)
        assert low - high == pytest.approx(601 * math.log(2))

    def test_single_point(self):
        r, sigma = 0.7, 1.3
        want = -0.5 * math.log(2 * math.pi * sigma**2) \
            - r**2 / (2 * sigma**2)
        assert calib.log_likelihood_iid(np.array([r]), np.zeros(1), sigma) \
            == pytest.approx(want)

    def test_invalid_sigma(self):
        with pytest.raises(ValidationError):
            calib.log_likelihood_iid(np.zeros(3), np.zeros(3), 0.0)


class TestDiscrepancy:
    def setup_method(self):
        self.times = np.arange(601) * 120.0

    def test_constant_coefficient(self):
        delta = calib.discrepancy(np.array([3.0, 0.0, 0.0]), self.times)
        assert np.allclose(delta, 3.0)

    def test_linear_endpoints(self):
        delta = calib.discrepancy(np.array([0.0, 1.0]), self.times)
        assert delta[0] == pytest.approx(-math.sqrt(3))
        assert delta[-1] == pytest.approx(math.sqrt(3))

    def test_zero_vector(self):
        delta = calib.discrepancy(np.zeros(6), self.times)
        assert np.all(delta == 0)

    def test_empty_grid(self):
        with pytest.raises(ValidationError):
            calib.discrepancy(np.array([1.0]), np.array([]))


class TestCorrelatedLikelihood:
    def setup_method(self):
        self.times = np.arange(601) * 120.0
        self.rng = np.random.default_rng(42)

    def test_matches_dense_oracle(self):
        for _ in range(10):
            sigma = self.rng.uniform(0.5, 50)
            tau = self.rng.uniform(10, 12000)
            resid = self.rng.normal(0, sigma, 601)
            fast = calib.log_likelihood_corr(resid, np.zeros(601), sigma,
                                             tau, self.times)
            dense = calib.dense_exp_loglik(resid, sigma, tau, self.times)
            assert fast == pytest.approx(dense, rel=1e-8)

    def test_small_tau_is_iid(self):
        resid = self.rng.normal(0, 3, 601)
        iid = calib.log_likelihood_iid(resid, np.zeros(601), 3.0)
        corr = calib.log_likelihood_corr(resid, np.zeros(601), 3.0,
                                         120.0 / 45.0, self.times)
        assert corr == pytest.approx(iid, abs=1e-8)

    def test_zero_residual_closed_form(self):
        rho = 0.5
        tau = -120.0 / math.log(rho)
        sigma = 2.0
        want = -0.5 * (601 * math.log(2 * math.pi * sigma**2)
                       + 600 * math.log(1 - rho**2))
        got = calib.log_likelihood_corr(np.zeros(601), np.zeros(601),
                                        sigma, tau, self.times)
        assert got == pytest.approx(want)

    def test_non_uniform_grid_falls_back(self):
        times = np.array([0.0, 100.0, 300.0, 350.0])
        resid = np.array([1.0, -0.5, 0.3, 0.8])
        with pytest.warns(UserWarning):
            got = calib.log_likelihood_corr(resid, np.zeros(4), 1.5, 200.0,
                                            times)
        dense = calib.dense_exp_loglik(resid, 1.5, 200.0, times)
        assert got == pytest.approx(dense, rel=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(ValidationError):
            calib.log_likelihood_corr(np.zeros(3), np.zeros(3), 1.0, 0.0,
                                      np.arange(3.0))


@pytest.fixture(scope="module")
def tiny_problem(small_surrogate_module):
    design, outputs, surr = small_surrogate_module
    rng = np.random.default_rng(7)
    data = outputs[0] + rng.normal(0, 0.5, outputs.shape[1])
    times = np.arange(outputs.shape[1]) * 120.0
    model = calib.DiscrepancyError(discrepancy_degree=2,
                                   sigma_prior=calib.Uniform(0.0, 10.0),
                                   tau_prior=calib.Uniform(0.0, 1200.0),
                                   b_prior_scale=5.0)
    return calib.CalibrationProblem(surrogate=surr, data=data, times=times,
                                    error_model=model)


@pytest.fixture(scope="module")
def small_surrogate_module():
    # module-local copy of the session fixture recipe (4 outputs)
    from uqpipe import doe

    rng = np.random.default_rng(31)
    bounds = [(-1.0, 1.0), (2.0, 6.0)]
    design = doe.scale(bounds, doe.lhs(220, 2, 17), seed=17)
    spec = polybasis.BasisSpec.legendre(bounds)
    u_pts = polybasis.standardize(spec, design.points)
    cands = polybasis.total_degree_set(2, 3)
    psi = polybasis.basis_matrix(spec, cands, u_pts)
    outputs = psi @ rng.normal(size=(len(cands), 4))
    surr = pce.fit_multi(design, outputs, 1.0, (3, 3))
    return design, outputs, surr


class TestCalibrationProblem:
    def test_layout_model2(self, tiny_problem):
        names = tiny_problem.parameter_names
        assert names == ["x1", "x2", "b0", "b1", "b2", "sigma", "tau"]
        assert tiny_problem.dim == 7
        assert tiny_problem.default_blocks() == ((0, 1), (2, 3, 4, 5, 6))

    def test_layout_model1(self, small_surrogate_module):
        design, outputs, surr = small_surrogate_module
        times = np.arange(outputs.shape[1]) * 120.0
        problem = calib.CalibrationProblem(
            surrogate=surr, data=outputs[0], times=times,
            error_model=calib.IidError())
        assert problem.parameter_names == ["x1", "x2", "sigma"]
        assert problem.default_blocks() == ((0, 1, 2),)

    def test_log_prior_fast_path_matches_slow(self, tiny_problem):
        rng = np.random.default_rng(3)
        for _ in range(50):
            theta = np.array([p.sample(rng) for p in tiny_problem.priors()])
            fast = tiny_problem.log_prior(theta)
            slow = sum(p.logpdf(float(v)) for p, v in
                       zip(tiny_problem.priors(), theta))
            assert fast == pytest.approx(slow, rel=1e-12)

    def test_log_prior_out_of_bounds(self, tiny_problem):
        theta = tiny_problem.prior_means()
        theta[0] = -5.0
        assert tiny_problem.log_prior(theta) == -math.inf

    def test_posterior_finite_at_prior_mean(self, tiny_problem):
        lp = tiny_problem.log_posterior(tiny_problem.prior_means())
        assert math.isfinite(lp)

    def test_sigma_tau_guards(self, tiny_problem):
        theta = tiny_problem.prior_means()
        theta[-2] = 0.0
        assert tiny_problem.log_likelihood(theta) == -math.inf
        theta = tiny_problem.prior_means()
        theta[-1] = 0.0
        assert tiny_problem.log_likelihood(theta) == -math.inf

    def test_likelihood_uses_cached_series(self, tiny_problem):
        theta = tiny_problem.prior_means()
        first = tiny_problem.log_likelihood(theta)
        again = tiny_problem.log_likelihood(theta)
        assert first == again

    def test_data_length_checked(self, small_surrogate_module):
        _, outputs, surr = small_surrogate_module
        with pytest.raises(ShapeError):
            calib.CalibrationProblem(
                surrogate=surr, data=np.zeros(3),
                times=np.arange(3.0) * 120.0,
                error_model=calib.IidError())

    def test_chain_samples_respect_support(self, tiny_problem):
        cfg = RwmConfig(n_iterations=400, n_chains=2, seed=1,
                        proposal_scales=tiny_problem.proposal_scales(),
                        blocks=tiny_problem.default_blocks())
        chains = calib.rwm_sample(tiny_problem, cfg)
        for chain in chains:
            for i, prior in enumerate(tiny_problem.priors()):
                lo, hi = prior.support
                col = chain.samples[:, i]
                if lo is not None:
                    assert col.min() >= lo
                if hi is not None:
                    assert col.max() <= hi


class TestMapOnPriorOnly:
    def test_flat_likelihood_gives_prior_modes(self, tiny_problem):
        from uqpipe import sampling

        theta, _ = sampling.map_estimate(
            tiny_problem.log_prior, tiny_problem.draw_prior,
            tiny_problem.support_bounds(), n_starts=4, seed=11)
        priors = tiny_problem.priors()
        # simplex precision is limited by the flat uniform directions
        # and the Laplace kinks; midpoints/zero modes are still clear
        for i, prior in enumerate(priors):
            if isinstance(prior, calib.TruncatedNormal):
                assert theta[i] == pytest.approx(prior.mode, abs=1e-2)
            elif isinstance(prior, calib.Laplace):
                assert theta[i] == pytest.approx(0.0, abs=5e-2)


class TestSummarize:
    def make_chains(self, rng, n_chains=4, n_iter=2000, dim=2):
        chains = []
        for c in range(n_chains):
            samples = rng.normal(size=(n_iter, dim))
            chains.append(Chain(
                samples=samples, log_posterior=np.zeros(n_iter),
                accept_counts=np.array([1]), proposal_counts=np.array([1]),
                seed=0, chain_index=c, blocks=((0, 1),)))
        return chains

    def test_iid_normal_chains(self):
        rng = np.random.default_rng(5)
        summary = calib.summarize(self.make_chains(rng), 0.2, 1)
        assert np.all(np.abs(summary.mean) < 0.05)
        assert np.all(summary.rhat < 1.01)
        assert np.all(np.diff(summary.quantiles, axis=0) > 0)

    def test_no_burn_in_no_thin_counts(self):
        rng = np.random.default_rng(6)
        chains = self.make_chains(rng, n_chains=3, n_iter=500)
        summary = calib.summarize(chains, 0.0, 1)
        assert summary.n_pooled == 1500

    def test_kde_normalized(self):
        rng = np.random.default_rng(7)
        summary = calib.summarize(self.make_chains(rng), 0.0, 1)
        for d in range(2):
            grid = summary.kde_grid[d]
            dens = summary.kde_density[d]
            integral = np.trapezoid(dens, grid)
            assert integral == pytest.approx(1.0, abs=1e-3)

    def test_insufficient_samples(self):
        rng = np.random.default_rng(8)
        chains = self.make_chains(rng, n_chains=1, n_iter=50)
        with pytest.raises(InsufficientSamplesError):
            calib.summarize(chains, 0.0, 1)

    def test_auto_thin_caps_pool(self):
        rng = np.random.default_rng(9)
        chains = self.make_chains(rng, n_chains=2, n_iter=80000, dim=1)
        summary = calib.summarize(chains, 0.0, None)
        assert summary.n_pooled <= 10**5

    def test_split_rhat_detects_disagreement(self):
        rng = np.random.default_rng(10)
        chains = self.make_chains(rng, n_chains=2, n_iter=1000, dim=1)
        chains[0].samples += 5.0
        summary = calib.summarize(chains, 0.0, 1)
        assert summary.rhat[0] > 1.5
