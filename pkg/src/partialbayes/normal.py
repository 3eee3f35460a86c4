"""Interval estimators for mu_1 in the normal hierarchical model.

``X_i | mu_i ~ N(mu_i, sigma^2)`` and ``mu_i ~ N(mu, tau^2)`` with ``mu`` unknown.
Known-tau estimators are closed form. The unknown-tau estimator conditions on
a t-distributed ancillary and takes a CDF envelope over the nuisance
``omega = 1 / (1 + tau^2)``; all of its constants assume ``sigma = 1`` so data are
rescaled on entry and the interval is scaled back on exit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import optimize, special

from .distributions import scaled_chi2_logpdf, std_normal_cdf, std_normal_quantile
from .errors import ConfigurationError, DataError, DegenerateDataError, NumericError
from .im import (
    CdfEnvelope,
    IntervalEstimate,
    PlausibilityCurve,
    cpl_from_cdf,
    cpl_from_envelope,
)
from .rng import RandomStream


@dataclass
class NormalData:
    observations: np.ndarray
    sigma: float = 1.0

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=float).ravel()
        if self.observations.size < 2:
            raise DataError("normal data need at least 2 observations")
        if not np.all(np.isfinite(self.observations)):
            raise DataError("observations must be finite")
        if not self.sigma > 0:
            raise DataError("sigma must be positive")

    @property
    def n(self) -> int:
        return self.observations.size

    @property
    def x1(self) -> float:
        return float(self.observations[0])

    @property
    def mean(self) -> float:
        return float(self.observations.mean())

    @property
    def rest(self) -> np.ndarray:
        return self.observations[1:]

    def scaled(self) -> "NormalData":
        return NormalData(self.observations / self.sigma, 1.0)


@dataclass
class KnownTauConfig:
    tau: float
    alpha: float = 0.05

    def __post_init__(self):
        if not self.tau > 0:
            raise ConfigurationError("tau must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")


@dataclass
class UnknownTauConfig:
    alpha: float = 0.05
    tempering_gamma: float = 1.0 / 3.0
    omega_grid_size: int = 101
    omega_range: tuple[float, float] = (1e-4, 1.0 - 1e-4)
    quad_nodes: int = 64
    tail_mass: float = 1e-13
    refine: bool = True

    def __post_init__(self):
        if not 0 < self.tempering_gamma < 0.5:
            raise ConfigurationError("tempering_gamma must lie in (0, 1/2)")
        if self.omega_grid_size < 2:
            raise ConfigurationError("omega grid needs at least 2 points")
        lo, hi = self.omega_range
        if not 0 < lo < hi < 1:
            raise ConfigurationError("omega_range must satisfy 0 < lo < hi < 1")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")

    def omega_grid(self) -> np.ndarray:
        return np.linspace(*self.omega_range, self.omega_grid_size)


def shrinkage_omega(sigma: float, tau: float) -> float:
    return sigma**2 / (tau**2 + sigma**2)


# --------------------------------------------------------------------------
# known tau


def eb_interval_known_tau(data: NormalData, cfg: KnownTauConfig) -> IntervalEstimate:
    w = shrinkage_omega(data.sigma, cfg.tau)
    center = (1 - w) * data.x1 + w * data.mean
    half = std_normal_quantile(1 - cfg.alpha / 2) * data.sigma * math.sqrt(1 - w)
    return IntervalEstimate(
        center - half, center + half, 1 - cfg.alpha, "eb-known-tau", point=center, diagnostics={"shrinkage_omega": w}
    )


def _pb_center_scale(data: NormalData, cfg: KnownTauConfig) -> tuple[float, float]:
    w = shrinkage_omega(data.sigma, cfg.tau)
    center = (1 - w) * data.x1 + w * data.mean
    scale = data.sigma * math.sqrt(1 - w * (data.n - 1) / data.n)
    return center, scale


def pb_interval_known_tau(data: NormalData, cfg: KnownTauConfig) -> IntervalEstimate:
    center, scale = _pb_center_scale(data, cfg)
    half = std_normal_quantile(1 - cfg.alpha / 2) * scale
    return IntervalEstimate(
        center - half, center + half, 1 - cfg.alpha, "pb-known-tau", point=center,
        diagnostics={"shrinkage_omega": shrinkage_omega(data.sigma, cfg.tau)},
    )


def wb_conditional_law_known_tau(data: NormalData, cfg: KnownTauConfig) -> tuple[float, float]:
    """Mean and variance of ``W_b = mean(X) - mu_1`` given the location-free residuals.

    Returned in the units of the data (computed at sigma = 1 and rescaled).
    """
    s = data.sigma
    t2 = (cfg.tau / s) ** 2
    xs = data.observations / s
    n = data.n
    mean = t2 / (1 + t2) * (xs.mean() - xs[0])
    var = (n * t2 + 1) / (n * (t2 + 1))
    return mean * s, var * s * s


def pb_cpl_known_tau(data: NormalData, cfg: KnownTauConfig, mu1):
    mean, var = wb_conditional_law_known_tau(data, cfg)
    sd = math.sqrt(var)
    w = data.mean - np.asarray(mu1, dtype=float)
    return cpl_from_cdf(lambda v: special.ndtr((v - mean) / sd), w)


def pb_curve_known_tau(data: NormalData, cfg: KnownTauConfig, points: int = 201, span: float = 4.0):
    center, scale = _pb_center_scale(data, cfg)
    grid = np.linspace(center - span * scale, center + span * scale, points)
    return PlausibilityCurve(grid, pb_cpl_known_tau(data, cfg, grid))


def optimal_interval_conjugate(
    data: NormalData, cfg: KnownTauConfig, hyperprior: tuple[float, float]
) -> IntervalEstimate:
    """Posterior credible interval for mu_1 when ``mu ~ N(m0, s0^2)`` is fully known.

    ``s0 = 0`` fixes ``mu = m0``; ``s0 = inf`` gives the flat-prior limit.
    """
    m0, s0 = hyperprior
    if s0 < 0:
        raise ConfigurationError("hyperprior sd must be non-negative")
    sigma, n = data.sigma, data.n
    w = shrinkage_omega(sigma, cfg.tau)
    marg_var = cfg.tau**2 + sigma**2
    if s0 == 0:
        post_mean_mu, post_var_mu = m0, 0.0
    else:
        prior_prec = 0.0 if math.isinf(s0) else 1.0 / s0**2
        prec = prior_prec + n / marg_var
        post_mean_mu = (prior_prec * m0 + n * data.mean / marg_var) / prec
        post_var_mu = 1.0 / prec
    center = (1 - w) * data.x1 + w * post_mean_mu
    sd = math.sqrt(sigma**2 * (1 - w) + w**2 * post_var_mu)
    half = std_normal_quantile(1 - cfg.alpha / 2) * sd
    return IntervalEstimate(center - half, center + half, 1 - cfg.alpha, "oracle-conjugate", point=center)


def eb_coverage_variance(n: int, tau: float, sigma: float) -> float:
    w = shrinkage_omega(sigma, tau)
    return (1 - w) ** 2 * sigma**2 + w**2 * (tau**2 + (sigma**2 - tau**2) / n) + 2 * w * (1 - w) * sigma**2 / n


def eb_coverage_analytic(n: int, tau: float, sigma: float = 1.0, alpha: float = 0.05) -> float:
    """Exact joint coverage of the known-tau EB interval; ``n = 1`` centers at ``x1`` but keeps the shrunk width."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    w = shrinkage_omega(sigma, tau)
    z = std_normal_quantile(1 - alpha / 2)
    v = eb_coverage_variance(n, tau, sigma)
    return 2 * std_normal_cdf(z * sigma * math.sqrt(1 - w) / math.sqrt(v)) - 1


# --------------------------------------------------------------------------
# unknown tau


def h_statistic(data: NormalData) -> float:
    if data.n < 4:
        raise DataError("unknown-tau inference needs n >= 4")
    rest = data.rest
    sd = float(np.std(rest, ddof=1))
    if sd <= 0:
        raise DegenerateDataError("observations 2..n have zero spread")
    n = data.n
    return math.sqrt((n - 1) / n) * (data.x1 - float(rest.mean())) / sd


def mu_sigma_tilde(data: NormalData, cfg: UnknownTauConfig) -> tuple[float, float]:
    """Centering and scaling constants of the unknown-tau pivot (sigma = 1 units)."""
    scaled = data.scaled()
    h = h_statistic(scaled)
    n = scaled.n
    s_rest = float(np.std(scaled.rest, ddof=1))
    mu_t = math.sqrt((n - 1) / n) * h * ((n - 2) / (h * h + n - 2) / s_rest - s_rest)
    corr = (n - 1) * (n - 2) * (n - 3 - h * h) / (n * (n - 2 + h * h) ** 2) / s_rest**2
    sig2 = max(n ** (-cfg.tempering_gamma), 1.0 - corr)
    return mu_t, math.sqrt(sig2)


def _pivot_constants(h: float, n: int) -> tuple[float, float, float]:
    c1 = (n - 2) * (n - 3 - h * h) / (n * (h * h + n - 2))
    c2 = (n - 1) * h / math.sqrt(n * (h * h + n - 2))
    c3 = (n - 2) / (n - 1)
    return c1, c2, c3


@lru_cache(maxsize=256)
def _log_range(n: int, tail_mass: float) -> tuple[float, float]:
    k = 0.5 * (n - 1)
    lo = special.gammaincinv(k, tail_mass) / k
    hi = special.gammainccinv(k, tail_mass) / k
    return math.log(lo), math.log(hi)


@lru_cache(maxsize=16)
def _legendre(nodes: int):
    return np.polynomial.legendre.leggauss(nodes)


class PivotCdfFamily:
    """CDFs of the unknown-tau pivot, one per omega, sharing a quadrature rule.

    The integral over the scaled chi-square variable ``x`` is done in
    ``y = log x`` with Gauss-Legendre on two pieces split at the kink of
    ``max{n^-gamma, 1 - c1 omega / x}``. The ``s``-free parts of the integrand
    are precomputed so that each CDF evaluation is one weighted sum.
    """

    def __init__(self, omegas, h: float, n: int, gamma: float = 1.0 / 3.0, nodes: int = 64, tail_mass: float = 1e-13):
        if n < 4:
            raise DataError("unknown-tau inference needs n >= 4")
        self.omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
        if np.any((self.omegas <= 0) | (self.omegas >= 1)):
            raise ConfigurationError("omega must lie in (0, 1)")
        self.h, self.n, self.gamma, self.nodes = float(h), int(n), float(gamma), int(nodes)
        c1, c2, c3 = _pivot_constants(self.h, self.n)
        floor = self.n ** (-self.gamma)
        a, b = _log_range(self.n, tail_mass)
        k = 0.5 * (self.n - 1)
        default_split = min(max(math.log(1 + 2.0 / math.sqrt(k)), a), b)
        om = self.omegas[:, None]
        if c1 > 0:
            ykink = np.log(c1 * self.omegas / (1 - floor))
            split = np.where((ykink > a) & (ykink < b), ykink, default_split)
        else:
            split = np.full(self.omegas.shape, default_split)
        t, w = _legendre(self.nodes)
        split = split[:, None]
        y = np.concatenate([0.5 * (split - a) * t + 0.5 * (split + a), 0.5 * (b - split) * t + 0.5 * (b + split)], axis=1)
        wy = np.concatenate([0.5 * (split - a) * w, 0.5 * (b - split) * w], axis=1)
        x = np.exp(y)
        self.weights = wy * np.exp(scaled_chi2_logpdf(self.n - 1, x) + y)
        denom = np.sqrt(1 - om * (self.n - 1) / self.n)
        self._slope = np.sqrt(np.maximum(floor, 1 - c1 * om / x)) / denom
        self._offset = c2 * np.sqrt(om) * (np.sqrt(x) - c3 / np.sqrt(x)) / denom

    def cdf(self, s):
        """CDF values for every omega; shape ``(len(omegas),)`` or ``(len(omegas), len(s))``."""
        s_arr = np.asarray(s, dtype=float)
        if s_arr.ndim == 0:
            return np.sum(self.weights * special.ndtr(s_arr * self._slope - self._offset), axis=1)
        z = s_arr[None, None, :] * self._slope[:, :, None] - self._offset[:, :, None]
        return np.einsum("oq,oqs->os", self.weights, special.ndtr(z))

    def quantiles(self, p: float, iterations: int = 60) -> np.ndarray:
        """Per-omega solution of ``F_omega(s) = p`` by vectorized bisection."""
        lo = np.full(self.omegas.shape, -8.0)
        hi = np.full(self.omegas.shape, 8.0)
        for _ in range(60):
            bad = self.cdf_rows(lo) > p
            if not bad.any():
                break
            lo = np.where(bad, 2 * lo, lo)
        for _ in range(60):
            bad = self.cdf_rows(hi) < p
            if not bad.any():
                break
            hi = np.where(bad, 2 * hi, hi)
        for _ in range(iterations):
            mid = 0.5 * (lo + hi)
            below = self.cdf_rows(mid) < p
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def cdf_rows(self, s_per_omega) -> np.ndarray:
        s = np.asarray(s_per_omega, dtype=float)[:, None]
        return np.sum(self.weights * special.ndtr(s * self._slope - self._offset), axis=1)


def fwb_cdf_unknown_tau(s: float, omega: float, h: float, n: int, cfg: UnknownTauConfig | None = None, tol: float = 1e-7) -> float:
    """CDF of the unknown-tau pivot at ``s`` for one omega, with a node-doubling check."""
    cfg = cfg or UnknownTauConfig()
    nodes = cfg.quad_nodes
    prev = None
    for _ in range(4):
        val = float(PivotCdfFamily([omega], h, n, cfg.tempering_gamma, nodes, cfg.tail_mass).cdf(s)[0])
        if prev is not None and abs(val - prev) <= tol:
            return min(max(val, 0.0), 1.0)
        prev = val
        nodes *= 2
    raise NumericError(
        "pivot CDF quadrature did not converge",
        {"s": s, "omega": omega, "h": h, "n": n, "nodes": nodes // 2, "last_difference": abs(val - prev)},
    )


def wb_sample_unknown_tau(
    omega: float, h: float, n: int, cfg: UnknownTauConfig | None, count: int, stream: RandomStream
) -> np.ndarray:
    """Direct draws of the pivot given the ancillary, via ``M^2 ~ chi2_{n-1}/(n-1)`` and ``Z ~ N(0,1)``."""
    cfg = cfg or UnknownTauConfig()
    rng = stream.generator()
    m2 = rng.chisquare(n - 1, size=count) / (n - 1)
    z = rng.standard_normal(count)
    c1, c2, c3 = _pivot_constants(h, n)
    m = np.sqrt(m2)
    num = c2 * math.sqrt(omega) * (m - c3 / m) + math.sqrt(1 - omega * (n - 1) / n) * z
    return num / np.sqrt(np.maximum(n ** (-cfg.tempering_gamma), 1 - c1 * omega / m2))


def _refine_extreme(h, n, cfg, p, grid, values, sign):
    """Golden-section refinement of ``sign * quantile_omega(p)`` near the grid optimum."""
    i = int(np.argmax(sign * values))
    best = values[i]
    if not cfg.refine or grid.size < 3:
        return best
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]

    def neg(om):
        fam = PivotCdfFamily([om], h, n, cfg.tempering_gamma, cfg.quad_nodes, cfg.tail_mass)
        return -sign * float(fam.quantiles(p, iterations=45)[0])

    res = optimize.minimize_scalar(neg, bounds=(a, b), method="bounded", options={"xatol": 1e-6})
    cand = -sign * res.fun
    return max(best, cand) if sign > 0 else min(best, cand)


@dataclass
class UnknownTauSolution:
    interval: IntervalEstimate
    h: float
    mu_tilde: float
    sigma_tilde: float
    rest_mean: float
    lower_quantile: float
    upper_quantile: float
    diagnostics: dict = field(default_factory=dict)


def _solve_unknown_tau(data: NormalData, cfg: UnknownTauConfig) -> UnknownTauSolution:
    scaled = data.scaled()
    h = h_statistic(scaled)
    mu_t, sig_t = mu_sigma_tilde(data, cfg)
    n = scaled.n
    grid = cfg.omega_grid()
    fam = PivotCdfFamily(grid, h, n, cfg.tempering_gamma, cfg.quad_nodes, cfg.tail_mass)
    a = cfg.alpha
    q_hi = fam.quantiles(1 - a / 2)
    q_lo = fam.quantiles(a / 2)
    # inverse of the lower envelope is the sup of the member quantiles, and vice versa
    under_inv = _refine_extreme(h, n, cfg, 1 - a / 2, grid, q_hi, +1.0)
    over_inv = _refine_extreme(h, n, cfg, a / 2, grid, q_lo, -1.0)
    xbar_rest = float(scaled.rest.mean())
    s = data.sigma
    lower = (xbar_rest - mu_t - under_inv * sig_t) * s
    upper = (xbar_rest - mu_t - over_inv * sig_t) * s
    point = (xbar_rest - mu_t) * s
    interval = IntervalEstimate(
        lower,
        upper,
        1 - a,
        "pb-unknown-tau",
        point=point,
        diagnostics={"h": h, "mu_tilde": mu_t, "sigma_tilde": sig_t},
    )
    return UnknownTauSolution(interval, h, mu_t, sig_t, xbar_rest, under_inv, over_inv)


def pb_interval_unknown_tau(data: NormalData, cfg: UnknownTauConfig | None = None) -> IntervalEstimate:
    return _solve_unknown_tau(data, cfg or UnknownTauConfig()).interval


def pivot_envelope(h: float, n: int, cfg: UnknownTauConfig) -> CdfEnvelope:
    """Envelope of the pivot CDF family over the configured omega grid."""
    from .im import envelope_from_family

    grid = cfg.omega_grid()
    fam = PivotCdfFamily(grid, h, n, cfg.tempering_gamma, cfg.quad_nodes, cfg.tail_mass)

    def family(omegas, s):
        omegas = np.asarray(omegas, dtype=float)
        if omegas.shape == grid.shape and np.array_equal(omegas, grid):
            return fam.cdf(s)
        return PivotCdfFamily(omegas, h, n, cfg.tempering_gamma, cfg.quad_nodes, cfg.tail_mass).cdf(s)

    return envelope_from_family(family, grid, refine=cfg.refine)


def pb_cpl_unknown_tau(data: NormalData, cfg: UnknownTauConfig, mu1, envelope: CdfEnvelope | None = None):
    """Conditional plausibility of ``mu1`` evaluated at ``(mean(X_2..n) - mu1 - mu~) / sigma~``."""
    scaled = data.scaled()
    h = h_statistic(scaled)
    mu_t, sig_t = mu_sigma_tilde(data, cfg)
    env = envelope or pivot_envelope(h, scaled.n, cfg)
    t = (float(scaled.rest.mean()) - np.asarray(mu1, dtype=float) / data.sigma - mu_t) / sig_t
    return cpl_from_envelope(env, t)


def pb_curve_unknown_tau(data: NormalData, cfg: UnknownTauConfig, points: int = 121) -> PlausibilityCurve:
    sol = _solve_unknown_tau(data, cfg)
    iv = sol.interval
    pad = 0.75 * iv.width
    grid = np.linspace(iv.lower - pad, iv.upper + pad, points)
    env = pivot_envelope(sol.h, data.n, cfg)
    return PlausibilityCurve(grid, pb_cpl_unknown_tau(data, cfg, grid, env))


def eb_interval_unknown_tau(data: NormalData, alpha: float = 0.05) -> IntervalEstimate:
    """Naive EB: the known-tau interval with ``tau^2`` replaced by ``max(0, S^2 - sigma^2)``."""
    s2 = float(np.var(data.observations, ddof=1))
    tau2 = max(0.0, s2 - data.sigma**2)
    w = data.sigma**2 / (tau2 + data.sigma**2)
    center = (1 - w) * data.x1 + w * data.mean
    half = std_normal_quantile(1 - alpha / 2) * data.sigma * math.sqrt(1 - w)
    return IntervalEstimate(
        center - half, center + half, 1 - alpha, "eb-unknown-tau", point=center, diagnostics={"tau2_hat": tau2}
    )
