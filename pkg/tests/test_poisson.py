"""Poisson hierarchical model: marginal likelihood, calibration and baselines."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from partialbayes import poisson
from partialbayes.distributions import gamma_quantile
from partialbayes.errors import DataError, DomainError
from partialbayes.poisson import (
    LambdaLattice,
    PoissonData,
    PoissonPlausibility,
    PoissonPriorConfig,
    b_statistic_poisson,
    classical_interval_poisson,
    eb_exp_interval,
    eb_exp_prior_fit,
    eb_gamma_prior_interval,
    fit_gamma_scale,
    marginal_loglik_lambda1,
    mle_lambda1,
    pb_interval_poisson,
    pl_poisson,
    solve_pb_poisson,
    wb_sample_poisson,
)
from partialbayes.rng import RandomStream


def brute_loglik(counts, exposures, s, lambdas, nodes=4000):
    """Trapezoid in log v over a wide fixed range; independent of the package quadrature.

    Like the package, it drops the lambda-free constants ``sum log x_i!`` and ``x_1 log t_1``.
    """
    counts = np.asarray(counts, float)
    t = np.asarray(exposures, float)
    u = np.linspace(-25, 8, nodes)
    v = np.exp(u)
    lam = np.atleast_1d(lambdas)[:, None]
    logw = s * u - v - special.gammaln(s)  # Gamma(s) density times the Jacobian v
    total = logw[None, :] + np.zeros_like(lam)
    for x, ti in zip(counts[1:], t[1:]):
        p = 1.0 / (1.0 + lam * ti / v[None, :])
        total = total + stats.nbinom.logpmf(x, s, p) + special.gammaln(x + 1)
    m = total.max(axis=1, keepdims=True)
    log_int = np.log(integrate.trapezoid(np.exp(total - m), u, axis=1)) + m[:, 0]
    head = counts[0] * np.log(lam[:, 0]) - lam[:, 0] * t[0]
    return head + log_int


class TestMarginalLikelihood:
    def test_single_record_closed_form(self):
        data = PoissonData([3])
        cfg = PoissonPriorConfig(2.0)
        for lam in (0.5, 1.0, 3.0, 7.0):
            assert marginal_loglik_lambda1(data, cfg, lam) == pytest.approx(3 * math.log(lam) - lam, abs=1e-12)

    def test_single_record_maximum(self):
        data = PoissonData([3])
        cfg = PoissonPriorConfig(2.0)
        assert marginal_loglik_lambda1(data, cfg, 3.0) > marginal_loglik_lambda1(data, cfg, 2.99)
        assert marginal_loglik_lambda1(data, cfg, 3.0) > marginal_loglik_lambda1(data, cfg, 3.01)

    def test_two_records_brute_force(self):
        # fine trapezoid over v_1 in (0, 50]
        v = np.linspace(0, 50, 100_001)[1:]
        nb = stats.nbinom.pmf(1, 2, 1 / (1 + 1.0 / v))
        oracle = math.log(integrate.trapezoid(nb * stats.gamma.pdf(v, 2), v)) + math.log(1.0) - 1.0
        val = marginal_loglik_lambda1(PoissonData([1, 1]), PoissonPriorConfig(2.0), 1.0)
        assert val == pytest.approx(oracle, abs=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(
        st.lists(st.integers(0, 40), min_size=2, max_size=8),
        st.floats(0.5, 12),
        st.floats(0.05, 30),
        st.floats(0.2, 4),
    )
    def test_matches_brute_force(self, counts, s, lam, t_scale):
        exposures = t_scale * (1 + np.arange(len(counts)) % 3)
        data = PoissonData(counts, exposures)
        val = marginal_loglik_lambda1(data, PoissonPriorConfig(s), lam)
        assert val == pytest.approx(brute_loglik(counts, exposures, s, lam)[0], abs=1e-6)

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(DomainError):
            marginal_loglik_lambda1(PoissonData([1, 2]), PoissonPriorConfig(2.0), 0.0)


class TestMle:
    def test_single_record(self):
        assert mle_lambda1(PoissonData([3], [2.0]), PoissonPriorConfig(2.0)) == pytest.approx(1.5, rel=1e-9)

    def test_zero_count_floor(self):
        cfg = PoissonPriorConfig(2.0)
        assert mle_lambda1(PoissonData([0]), cfg) == pytest.approx(cfg.lambda_floor, rel=1e-12)
        assert mle_lambda1(PoissonData([0, 0, 0]), cfg) == pytest.approx(cfg.lambda_floor, rel=1e-12)

    def test_grid_search(self):
        counts = [3, 2, 4, 1, 2]
        grid = np.linspace(0.002, 20, 10_000)
        coarse = grid[np.argmax(brute_loglik(counts, np.ones(5), 2.0, grid))]
        fine = np.linspace(coarse - 0.004, coarse + 0.004, 10_001)
        oracle = fine[np.argmax(brute_loglik(counts, np.ones(5), 2.0, fine))]
        assert mle_lambda1(PoissonData(counts), PoissonPriorConfig(2.0)) == pytest.approx(oracle, abs=1e-4)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(0, 30), min_size=2, max_size=10), st.floats(0.5, 10))
    def test_stationary(self, counts, s):
        data = PoissonData(counts)
        cfg = PoissonPriorConfig(s)
        lam = mle_lambda1(data, cfg)
        if lam <= cfg.lambda_floor * (1 + 1e-9):
            return
        best = marginal_loglik_lambda1(data, cfg, lam)
        for f in (0.999, 1.001):
            assert marginal_loglik_lambda1(data, cfg, lam * f) <= best + 1e-9


class TestBStatistic:
    data = PoissonData([3, 2, 4, 1, 2])
    cfg = PoissonPriorConfig(2.0)

    def test_zero_at_mle(self):
        assert b_statistic_poisson(self.data, self.cfg, mle_lambda1(self.data, self.cfg)) == pytest.approx(0, abs=1e-9)

    def test_positive_elsewhere(self):
        lam_hat = mle_lambda1(self.data, self.cfg)
        b = b_statistic_poisson(self.data, self.cfg, lam_hat * np.array([0.2, 0.9, 0.99, 1.01, 1.1, 5.0]))
        assert np.all(b > 0)

    def test_single_record_closed_form(self):
        val = b_statistic_poisson(PoissonData([3]), self.cfg, 1.0)
        assert val == pytest.approx(3 * math.log(3) - 2, abs=1e-10)
        assert val == pytest.approx(1.2958, abs=1e-4)

    def test_array_input(self):
        out = b_statistic_poisson(self.data, self.cfg, [1.0, 2.0])
        assert out.shape == (2,)
        assert out[1] == pytest.approx(b_statistic_poisson(self.data, self.cfg, 2.0))


class TestCalibration:
    cfg = PoissonPriorConfig(2.0, mc_count=2000)

    def test_nonnegative_and_repeatable(self):
        template = PoissonData([3, 2, 4, 1, 2])
        a = wb_sample_poisson(2.0, template, self.cfg, RandomStream(5))
        b = wb_sample_poisson(2.0, template, self.cfg, RandomStream(5))
        assert np.all(a.sorted_samples >= 0)
        assert np.array_equal(a.sorted_samples, b.sorted_samples)

    def test_single_record_enumeration(self):
        lam = 3.0
        cfg = PoissonPriorConfig(5.0, mc_count=10_000)
        F = wb_sample_poisson(lam, PoissonData([0]), cfg, RandomStream(6))
        x = np.arange(0, 51)
        b = special.xlogy(x, x / lam) - x + lam
        p = stats.poisson.pmf(x, lam)
        atoms = np.unique(np.round(b, 9))
        # compare between atoms so that rounding of b at a tie cannot matter
        for s in 0.5 * (atoms[:-1] + atoms[1:]):
            assert F(s) == pytest.approx(p[b <= s].sum(), abs=0.01)

    def test_threads_do_not_change_draws(self):
        from concurrent.futures import ThreadPoolExecutor

        template = PoissonData([3, 2, 4, 1, 2])
        lams = [0.5, 1.0, 2.0, 4.0]
        serial = PoissonPlausibility(template.exposures, self.cfg, RandomStream(8))
        expected = [serial.ecdf(l).sorted_samples for l in lams]
        shared = PoissonPlausibility(template.exposures, self.cfg, RandomStream(8))
        with ThreadPoolExecutor(4) as pool:
            got = list(pool.map(lambda l: shared.ecdf(l).sorted_samples, lams * 3))
        for i, arr in enumerate(got):
            assert np.array_equal(arr, expected[i % 4])

    def test_plausibility_at_mle_and_far_away(self):
        data = PoissonData([3, 2, 4, 1, 2])
        lam_hat = mle_lambda1(data, self.cfg)
        assert pl_poisson(data, self.cfg, lam_hat, RandomStream(9)) == 1.0
        assert pl_poisson(data, self.cfg, 60.0, RandomStream(9)) == 0.0

    def test_monotone_in_b(self):
        engine = PoissonPlausibility(np.ones(4), self.cfg, RandomStream(10))
        b = np.linspace(0, 8, 50)
        pl = engine.plausibility(b, np.full(b.size, 2.0))
        assert np.all(np.diff(pl) <= 0)


class TestPbInterval:
    cfg = PoissonPriorConfig(2.0, mc_count=1000, lambda_grid_size=101)

    @pytest.fixture
    def solution(self):
        data = PoissonData([3, 2, 4, 1, 2, 0, 5, 2])
        return data, solve_pb_poisson(data, self.cfg, RandomStream(11))

    def test_contains_mle(self, solution):
        data, sol = solution
        assert sol.interval.contains(mle_lambda1(data, self.cfg))
        assert sol.interval.lower > 0

    def test_curve_has_one_component(self, solution):
        _, sol = solution
        above = sol.curve.values >= self.cfg.alpha
        assert np.sum(np.diff(above.astype(int)) != 0) <= 2

    def test_lattice_search_agrees(self, solution):
        data, sol = solution
        lat = solve_pb_poisson(
            data, self.cfg, RandomStream(11), search="lattice", lattice=LambdaLattice(0.01), refine_steps=4
        )
        assert lat.interval.lower == pytest.approx(sol.interval.lower, rel=0.05)
        assert lat.interval.upper == pytest.approx(sol.interval.upper, rel=0.05)

    def test_repeatable(self):
        data = PoissonData([1, 0, 2, 3])
        a = pb_interval_poisson(data, self.cfg, RandomStream(12), search="lattice")
        b = pb_interval_poisson(data, self.cfg, RandomStream(12), search="lattice")
        assert (a.lower, a.upper) == (b.lower, b.upper)

    def test_larger_count_moves_interval_up(self):
        low = pb_interval_poisson(PoissonData([0, 2, 3, 1]), self.cfg, RandomStream(13), search="lattice")
        high = pb_interval_poisson(PoissonData([6, 2, 3, 1]), self.cfg, RandomStream(13), search="lattice")
        assert low.lower < high.lower and low.upper < high.upper


class TestClassical:
    def test_zero_count(self):
        assert classical_interval_poisson(0, 7.0).lower == 0.0

    def test_values(self):
        iv = classical_interval_poisson(3, 10.0, 0.10)
        assert iv.lower == pytest.approx(0.08177, abs=1e-5)
        assert iv.upper == pytest.approx(0.77537, abs=1e-5)

    @pytest.mark.parametrize("x", range(1, 101))
    def test_point_inside(self, x):
        iv = classical_interval_poisson(x, 3.0)
        assert iv.lower < x / 3.0 < iv.upper

    def test_domain(self):
        with pytest.raises(DomainError):
            classical_interval_poisson(1, 0.0)


class TestEbExponential:
    def test_single_record(self):
        assert eb_exp_prior_fit([(1, 1.0)]) == pytest.approx(1.0, rel=1e-9)

    @given(st.floats(0.1, 20))
    def test_exposure_scaling(self, c):
        records = [(3, 10.0), (0, 4.0), (7, 20.0), (2, 5.0)]
        base = eb_exp_prior_fit(records)
        scaled = eb_exp_prior_fit([(x, c * t) for x, t in records])
        assert scaled == pytest.approx(base / c, rel=1e-8)

    def test_consistency(self):
        rng = RandomStream(14).generator()
        fits = []
        for _ in range(20):
            attempts = rng.integers(50, 400, size=90)
            p = rng.exponential(0.4, size=90)
            fits.append(eb_exp_prior_fit(list(zip(rng.poisson(attempts * p), attempts))))
        fits = np.array(fits)
        assert np.mean((fits > 0.3) & (fits < 0.5)) >= 0.9

    def test_all_zero_warns(self):
        with pytest.warns(RuntimeWarning):
            assert eb_exp_prior_fit([(0, 1.0), (0, 2.0)]) == 1e-8

    def test_interval_values(self):
        iv = eb_exp_interval(3, 10.0, 0.5, 0.10)
        assert iv.lower == pytest.approx(gamma_quantile(4, 0.05) / 12, rel=1e-12)
        assert iv.upper == pytest.approx(gamma_quantile(4, 0.95) / 12, rel=1e-12)
        # published five-digit figures are loose in the fourth decimal
        assert iv.lower == pytest.approx(0.11380, abs=2e-4)
        assert iv.upper == pytest.approx(0.64602, abs=2e-4)

    def test_flat_limit(self):
        iv = eb_exp_interval(3, 10.0, 1e12)
        assert iv.lower == pytest.approx(gamma_quantile(4, 0.025) / 10, rel=1e-9)
        assert iv.upper == pytest.approx(gamma_quantile(4, 0.975) / 10, rel=1e-9)

    @pytest.mark.parametrize("x", range(0, 51))
    def test_narrower_than_classical(self, x):
        assert eb_exp_interval(x, 10.0, 0.5).width < classical_interval_poisson(x, 10.0).width


class TestEbGamma:
    def test_conjugacy(self):
        data = PoissonData([0, 3, 1, 4, 2])
        cfg = PoissonPriorConfig(2.0)
        g = fit_gamma_scale(data, 2.0)
        iv = eb_gamma_prior_interval(data, cfg)
        rate = 1 + 1 / g
        assert iv.lower == pytest.approx(gamma_quantile(2.0, 0.025) / rate, rel=1e-10)
        assert iv.upper == pytest.approx(gamma_quantile(2.0, 0.975) / rate, rel=1e-10)
        assert iv.contains(2.0 / rate)

    def test_scale_is_marginal_mle(self):
        data = PoissonData([0, 3, 1, 4, 2, 8], [1.0, 2.0, 1.0, 3.0, 1.0, 2.0])
        g = fit_gamma_scale(data, 2.0)

        def nll(gam):
            p = 1 / (1 + gam * data.exposures)
            return -stats.nbinom.logpmf(data.counts, 2.0, p).sum()

        assert nll(g) <= min(nll(g * 0.999), nll(g * 1.001))

    def test_index(self):
        data = PoissonData([0, 9, 1])
        cfg = PoissonPriorConfig(2.0)
        assert eb_gamma_prior_interval(data, cfg, index=1).point > eb_gamma_prior_interval(data, cfg).point


class TestDataValidation:
    def test_bad_counts(self):
        with pytest.raises(DataError):
            PoissonData([1, -1])
        with pytest.raises(DataError):
            PoissonData([1.5])
        with pytest.raises(DataError):
            PoissonData([1, 2], [1.0])
        with pytest.raises(DataError):
            PoissonData([1, 2], [1.0, 0.0])

    def test_reordered(self):
        data = PoissonData([1, 2, 3], [1.0, 2.0, 3.0]).reordered(2)
        assert list(data.counts) == [3, 1, 2]
        assert list(data.exposures) == [3.0, 1.0, 2.0]
