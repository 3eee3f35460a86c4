"""Inference for lambda_1 in the Poisson hierarchical model.

``X_i ~ Pois(lambda_i t_i)`` with ``lambda_i = gamma V_i`` and ``V_i ~ Gamma(s)``; the
scale ``gamma`` is never estimated for the Partial Bayes interval. Instead the
likelihood ratio statistic ``b(x, lambda_1)`` is calibrated against its Monte Carlo
distribution, which depends on ``lambda_1`` and the exposures only.

The marginal likelihood integrates ``V_1`` out. Observations 2..n enter through
per-exposure groups (count of members, sum of counts), which is exact and lets
simulated datasets with equal exposures be deduplicated.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .distributions import gamma_quantile, poisson_quantile
from .errors import ConfigurationError, DataError, DomainError, NumericError
from .im import EmpiricalCdf, IntervalEstimate, PlausibilityCurve, ecdf_build
from .rng import RandomStream

_DROP = 40.0  # nats below the mode at which the integrand is truncated
_CHUNK = 4_000_000


@dataclass
class PoissonData:
    counts: np.ndarray
    exposures: np.ndarray | None = None

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 1 or counts.size < 1:
            raise DataError("need at least one count")
        if np.any(counts < 0) or np.any(counts != np.floor(counts)):
            raise DataError("counts must be non-negative integers")
        self.counts = counts.astype(np.int64)
        if self.exposures is None:
            self.exposures = np.ones(counts.size)
        self.exposures = np.asarray(self.exposures, dtype=float)
        if self.exposures.shape != self.counts.shape:
            raise DataError("counts and exposures differ in length")
        if np.any(~np.isfinite(self.exposures)) or np.any(self.exposures <= 0):
            raise DataError("exposures must be positive")

    @property
    def n(self) -> int:
        return self.counts.size

    def reordered(self, index: int) -> "PoissonData":
        """Same data with record ``index`` moved to the front."""
        order = [index] + [i for i in range(self.n) if i != index]
        return PoissonData(self.counts[order], self.exposures[order])


@dataclass
class PoissonPriorConfig:
    shape_s: float
    alpha: float = 0.05
    mc_count: int = 5000
    lambda_grid_size: int = 201
    quadrature_nodes: int = 64
    lambda_floor: float = 1e-8

    def __post_init__(self):
        if not self.shape_s > 0:
            raise ConfigurationError("shape_s must be positive")
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.mc_count < 1 or self.lambda_grid_size < 3:
            raise ConfigurationError("mc_count >= 1 and lambda_grid_size >= 3 required")


class MarginalLikelihood:
    """Vectorized profile of ``log f(x | lambda_1)`` for datasets sharing exposures.

    Datasets are passed as ``x1`` (shape ``(B,)``) and group sums (``(B, G)``);
    log-rates ``mu = log(lambda_1)`` are per row. Constants that do not depend on
    ``lambda_1`` are dropped.
    """

    def __init__(self, exposures, shape_s: float, nodes: int = 64, floor: float = 1e-8):
        t = np.asarray(exposures, dtype=float)
        self.t1 = float(t[0])
        self.s = float(shape_s)
        self.nodes = int(nodes)
        self.floor = float(floor)
        groups, inverse, counts = np.unique(t[1:], return_inverse=True, return_counts=True)
        self.group_t = groups
        self.group_k = counts.astype(float)
        self.group_index = inverse
        self.log_gamma_s = special.gammaln(self.s)

    @property
    def n_groups(self) -> int:
        return self.group_t.size

    def group_sums(self, counts) -> np.ndarray:
        """``(B, G)`` sums of observations 2..n per exposure group."""
        counts = np.atleast_2d(np.asarray(counts, dtype=float))
        out = np.zeros((counts.shape[0], self.n_groups))
        if self.n_groups:
            np.add.at(out.T, self.group_index, counts[:, 1:].T)
        return out

    # -- integrand in u = log v ------------------------------------------------
    def _terms(self, u, mu, sums):
        """Integrand and its mu-derivatives; ``u`` is ``(B, N)``, ``mu`` ``(B, 1)``."""
        s = self.s
        ks = self.group_k * s
        z = u[..., None] - mu[..., None] - np.log(self.group_t)  # log(v / (lambda t_g))
        sig = special.expit(z)
        log1pez = np.logaddexp(0.0, z)
        S = sums[:, None, :]
        tot = ks + S
        f = s * u - np.exp(u) - self.log_gamma_s + np.sum(ks * (z - log1pez) - S * log1pez, axis=-1)
        e1 = np.sum(tot * sig - ks, axis=-1)
        e2 = -np.sum(tot * sig * (1.0 - sig), axis=-1)
        return f, e1, e2

    def _mode(self, mu, sums, u0=None):
        s = self.s
        ks = self.group_k * s
        logt = np.log(self.group_t)
        tot = ks + sums
        u = np.full(mu.shape, math.log(s)) if u0 is None else u0.copy()
        for _ in range(200):
            sig = special.expit(u[:, None] - mu[:, None] - logt)
            ev = np.exp(u)
            grad = s - ev + np.sum(ks - tot * sig, axis=1)
            curv = -ev - np.sum(tot * sig * (1.0 - sig), axis=1)
            step = np.clip(-grad / curv, -2.0, 2.0)
            u = u + step
            if np.all(np.abs(step) < 1e-11):
                break
        return u, 1.0 / np.sqrt(-curv)

    def _profile(self, u_row, mu, sums):
        f, _, _ = self._terms(u_row[:, None], mu[:, None], sums)
        return f[:, 0]

    def log_integral(self, mu, sums, derivs=False, u0=None):
        """``log E[prod_g ...]`` over ``V_1 ~ Gamma(s)``, optionally with mu-derivatives."""
        B = mu.shape[0]
        if self.n_groups == 0:
            z = np.zeros(B)
            return (z, z, z, None) if derivs else z
        u_star, sd = self._mode(mu, sums, u0)
        f_star = self._profile(u_star, mu, sums)
        left = 6.0 * sd
        right = 6.0 * sd
        for _ in range(80):
            m = self._profile(u_star - left, mu, sums) > f_star - _DROP
            if not m.any():
                break
            left = np.where(m, left * 1.5, left)
        for _ in range(80):
            m = self._profile(u_star + right, mu, sums) > f_star - _DROP
            if not m.any():
                break
            right = np.where(m, right * 1.5, right)
        ratio = float(np.max((left + right) / sd))
        N = int(min(1024, max(self.nodes, 32 * math.ceil(3.0 * ratio / 32))))
        grid = np.linspace(0.0, 1.0, N)
        out_val = np.empty(B)
        out_d1 = np.empty(B)
        out_d2 = np.empty(B)
        rows = max(1, _CHUNK // (N * max(self.n_groups, 1)))
        for a in range(0, B, rows):
            sl = slice(a, a + rows)
            lo = (u_star[sl] - left[sl])[:, None]
            span = (left[sl] + right[sl])[:, None]
            u = lo + span * grid[None, :]
            f, e1, e2 = self._terms(u, mu[sl, None], sums[sl])
            fmax = f.max(axis=1, keepdims=True)
            w = np.exp(f - fmax)
            tot = w.sum(axis=1)
            h = span[:, 0] / (N - 1)
            out_val[sl] = fmax[:, 0] + np.log(tot * h)
            if derivs:
                m1 = (w * e1).sum(axis=1) / tot
                m2 = (w * (e2 + e1 * e1)).sum(axis=1) / tot
                out_d1[sl] = m1
                out_d2[sl] = m2 - m1 * m1
        if derivs:
            return out_val, out_d1, out_d2, u_star
        return out_val

    def loglik(self, x1, sums, mu):
        x1 = np.asarray(x1, dtype=float)
        mu = np.asarray(mu, dtype=float)
        return x1 * mu - np.exp(mu) * self.t1 + self.log_integral(mu, sums)

    def _grad(self, x1, sums, mu, u0=None):
        val, d1, d2, u = self.log_integral(mu, sums, derivs=True, u0=u0)
        lam_t = np.exp(mu) * self.t1
        return x1 * mu - lam_t + val, x1 - lam_t + d1, -lam_t + d2, u

    def mle(self, x1, sums, start=None, tol=1e-10, maxiter=200):
        """Row-wise maximizer of the marginal log-likelihood in ``mu = log lambda_1``.

        Safeguarded Newton inside a sign-bracket, iterating only unconverged rows;
        rows with all-zero counts sit on the boundary and return the floor.
        """
        x1 = np.asarray(x1, dtype=float)
        sums = np.asarray(sums, dtype=float).reshape(x1.shape[0], -1)
        total = x1 + sums.sum(axis=1)
        lo = np.full(x1.shape, math.log(self.floor))
        hi = np.log(2.0 * (total + 1.0) / self.t1)
        if start is None:
            mu = np.log((x1 + 0.5) / self.t1)
        else:
            mu = np.broadcast_to(np.asarray(start, dtype=float), x1.shape).copy()
        mu = np.clip(mu, lo, hi)
        u = np.full(x1.shape, math.log(self.s))
        g_lo = np.full(x1.shape, np.nan)
        g_hi = np.full(x1.shape, np.nan)
        idx = np.flatnonzero(total > 0)
        for _ in range(maxiter):
            if idx.size == 0:
                break
            m = mu[idx]
            _, g1, g2, u_new = self._grad(x1[idx], sums[idx], m, u[idx] if self.n_groups else None)
            if u_new is not None:
                u[idx] = u_new
            l, h, gl, gh = lo[idx], hi[idx], g_lo[idx], g_hi[idx]
            up, down = (g1 > 0) & (m >= l), (g1 < 0) & (m <= h)
            l, gl = np.where(up, m, l), np.where(up, g1, gl)
            h, gh = np.where(down, m, h), np.where(down, g1, gh)
            newton = m - g1 / np.where(g2 < 0, g2, -1.0)
            with np.errstate(invalid="ignore", divide="ignore"):
                secant = l - gl * (h - l) / (gh - gl)
            fallback = np.where((secant > l) & (secant < h), secant, 0.5 * (l + h))
            ok = (g2 < 0) & (newton > l) & (newton < h)
            nxt = np.where(ok, newton, fallback)
            # a bracket end whose gradient vanishes is the root
            gtol = 1e-11 * (1.0 + total[idx])
            nxt = np.where(np.abs(gl) <= gtol, l, np.where(np.abs(gh) <= gtol, h, nxt))
            nxt = np.where(np.abs(g1) <= gtol, m, nxt)
            lo[idx], hi[idx], g_lo[idx], g_hi[idx], mu[idx] = l, h, gl, gh, nxt
            moving = (np.abs(nxt - m) > tol * np.maximum(1.0, np.abs(m))) & (h - l > tol)
            idx = idx[moving]
        else:
            raise NumericError("marginal MLE did not converge", {"rows": int(idx.size)})
        mu = np.where(total > 0, mu, math.log(self.floor))
        return mu, self.loglik(x1, sums, mu)

    def b_stat(self, x1, sums, mu, start=None):
        mu_hat, l_hat = self.mle(x1, sums, start=start)
        return _clean_b(l_hat, self.loglik(x1, sums, mu)), mu_hat


def _clean_b(l_hat, ll):
    # differences at rounding level are the maximizer itself
    b = l_hat - ll
    return np.where(b < 1e-10 * (1.0 + np.abs(l_hat)), 0.0, b)


def _group_constant(data: PoissonData, s: float) -> float:
    x = data.counts[1:]
    return float(np.sum(special.gammaln(x + s) - special.gammaln(s)))


def _model(data: PoissonData, cfg: PoissonPriorConfig) -> MarginalLikelihood:
    return MarginalLikelihood(data.exposures, cfg.shape_s, cfg.quadrature_nodes, cfg.lambda_floor)


def _observed(model: MarginalLikelihood, data: PoissonData):
    return np.array([float(data.counts[0])]), model.group_sums(data.counts[None, :])


def marginal_loglik_lambda1(data: PoissonData, cfg: PoissonPriorConfig, lambda1: float) -> float:
    """Log-likelihood of ``lambda_1`` with ``V_1`` integrated out (additive constant dropped)."""
    if not lambda1 > 0:
        raise DomainError("lambda1 must be positive")
    model = _model(data, cfg)
    x1, sums = _observed(model, data)
    val = model.loglik(x1, sums, np.array([math.log(lambda1)]))[0]
    return float(val + _group_constant(data, cfg.shape_s))


def mle_lambda1(data: PoissonData, cfg: PoissonPriorConfig) -> float:
    model = _model(data, cfg)
    x1, sums = _observed(model, data)
    mu, _ = model.mle(x1, sums)
    return float(math.exp(mu[0]))


def b_statistic_poisson(data: PoissonData, cfg: PoissonPriorConfig, lambda1) -> np.ndarray | float:
    lam = np.atleast_1d(np.asarray(lambda1, dtype=float))
    if np.any(lam <= 0):
        raise DomainError("lambda1 must be positive")
    model = _model(data, cfg)
    x1, sums = _observed(model, data)
    mu_hat, l_hat = model.mle(x1, sums)
    rows = lam.size
    ll = model.loglik(np.repeat(x1, rows), np.repeat(sums, rows, axis=0), np.log(lam))
    out = _clean_b(l_hat[0], ll)
    return float(out[0]) if np.ndim(lambda1) == 0 else out


# --------------------------------------------------------------------------
# Monte Carlo calibration


def _open_uniform(rng, shape):
    u = rng.random(shape)
    return np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)


class PoissonPlausibility:
    """Plausibility of ``lambda_1`` calibrated by common random numbers.

    One block of auxiliaries ``(U, V)`` is drawn from ``stream`` and reused for every
    ``lambda_1``; the empirical CDF of ``W_b(lambda_1)`` is memoized per value, so
    repeated queries (and datasets sharing the exposures) reuse it.
    """

    def __init__(self, exposures, cfg: PoissonPriorConfig, stream: RandomStream, mc_count: int | None = None):
        self.exposures = np.asarray(exposures, dtype=float)
        self.cfg = cfg
        self.stream = stream
        self.mc_count = int(mc_count or cfg.mc_count)
        self.model = MarginalLikelihood(self.exposures, cfg.shape_s, cfg.quadrature_nodes, cfg.lambda_floor)
        self._block = None
        self._cache: dict[float, EmpiricalCdf] = {}
        self._locks: dict[float, threading.Lock] = {}
        self._guard = threading.Lock()

    def block(self):
        with self._guard:
            if self._block is not None:
                return self._block
            rng = self.stream.generator()
            n = self.exposures.size
            u = _open_uniform(rng, (self.mc_count, n))
            v = rng.gamma(self.cfg.shape_s, size=(self.mc_count, n))
            self._block = (u, v)
        return self._block

    def draws(self, lambda1: float) -> np.ndarray:
        u, v = self.block()
        means = lambda1 * self.exposures[None, :] * v / v[:, :1]
        means[:, 0] = lambda1 * self.exposures[0]
        x = poisson_quantile(means, u)
        x1 = x[:, 0].astype(float)
        sums = self.model.group_sums(x)
        keys = np.column_stack([x1, sums])
        uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
        b, _ = self.model.b_stat(
            uniq[:, 0], uniq[:, 1:], np.full(uniq.shape[0], math.log(lambda1)), start=math.log(lambda1)
        )
        return b[inverse.ravel()]

    def ecdf(self, lambda1: float) -> EmpiricalCdf:
        key = float(lambda1)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        with self._guard:
            lock = self._locks.setdefault(key, threading.Lock())
        with lock:
            if key not in self._cache:
                self._cache[key] = ecdf_build(self.draws(key))
        return self._cache[key]

    def plausibility(self, b_obs, lambdas) -> np.ndarray:
        """``1 - G(b-)``: the fraction of draws at least as extreme as the observed statistic."""
        b_obs = np.atleast_1d(b_obs)
        out = np.empty(b_obs.size)
        for i, (b, lam) in enumerate(zip(b_obs, np.atleast_1d(lambdas))):
            out[i] = self.ecdf(lam).survival(b, tol=1e-9 * (1.0 + abs(b)))
        return out


def wb_sample_poisson(
    lambda1: float, template: PoissonData, cfg: PoissonPriorConfig, stream: RandomStream
) -> EmpiricalCdf:
    if not lambda1 > 0:
        raise DomainError("lambda1 must be positive")
    return PoissonPlausibility(template.exposures, cfg, stream).ecdf(lambda1)


def pl_poisson(data: PoissonData, cfg: PoissonPriorConfig, lambda1: float, stream: RandomStream) -> float:
    engine = PoissonPlausibility(data.exposures, cfg, stream)
    b = b_statistic_poisson(data, cfg, lambda1)
    return float(engine.plausibility(b, lambda1)[0])


@dataclass
class PoissonSolution:
    interval: IntervalEstimate
    mle: float
    curve: PlausibilityCurve | None = None
    evaluations: int = 0
    diagnostics: dict = field(default_factory=dict)


class _ObservedB:
    def __init__(self, model: MarginalLikelihood, data: PoissonData):
        self.model = model
        self.x1, self.sums = _observed(model, data)
        mu_hat, l_hat = model.mle(self.x1, self.sums)
        self.mu_hat = float(mu_hat[0])
        self.l_hat = float(l_hat[0])

    def __call__(self, lambdas) -> np.ndarray:
        lam = np.atleast_1d(np.asarray(lambdas, dtype=float))
        ll = self.model.loglik(np.repeat(self.x1, lam.size), np.repeat(self.sums, lam.size, axis=0), np.log(lam))
        return _clean_b(self.l_hat, ll)


def _grid_search(engine, obs, cfg, lam_hat):
    alpha, size, floor = cfg.alpha, cfg.lambda_grid_size, cfg.lambda_floor
    at_floor = lam_hat <= floor * (1 + 1e-9)

    def pl(lams):
        return engine.plausibility(obs(lams), lams)

    if at_floor:
        top = 1.0 / engine.exposures[0]
        for _ in range(80):
            if pl(top)[0] < alpha:
                break
            top *= 2.0
        grid = np.linspace(floor, top, size)
    else:
        r = 2.0
        for _ in range(12):
            ends = np.array([max(lam_hat / r, floor), lam_hat * r])
            vals = pl(ends)
            low_done = vals[0] < alpha or ends[0] <= floor
            if low_done and vals[1] < alpha:
                break
            r = r * r
        else:
            raise NumericError("lambda grid expansion did not bracket the plausibility set", {"ratio": r})
        grid = np.geomspace(max(lam_hat / r, floor), lam_hat * r, size)
        grid = np.unique(np.append(grid, lam_hat))
    values = pl(grid)
    curve = PlausibilityCurve(grid, values)
    lower, upper = curve.level_set(alpha, anchor=lam_hat)
    if lower <= grid[0] and values[0] >= alpha:
        lower = 0.0
    return lower, upper, curve, grid.size


class LambdaLattice:
    """Log-spaced lattice ``lambda_k = exp(k * step)`` whose plausibilities are cached."""

    def __init__(self, step: float = 0.02):
        self.step = float(step)

    def value(self, k):
        return np.exp(np.asarray(k, dtype=float) * self.step)

    def index(self, lam) -> int:
        return int(round(math.log(lam) / self.step))


def _lattice_search(engine, obs, cfg, lam_hat, lattice: LambdaLattice, refine_steps: int = 0):
    alpha = cfg.alpha
    k_min = math.floor(math.log(cfg.lambda_floor) / lattice.step)
    k0 = max(lattice.index(lam_hat), k_min)
    evaluated = {}

    def pl_k(k):
        if k not in evaluated:
            lam = float(lattice.value(k))
            evaluated[k] = float(engine.plausibility(obs(lam), lam)[0])
        return evaluated[k]

    if pl_k(k0) < alpha:
        # the mode sits between lattice points; use the neighbour that is inside
        for k in (k0 - 1, k0 + 1):
            if pl_k(k) >= alpha:
                k0 = k
                break
        else:
            lam = lam_hat
            return lam, lam, len(evaluated)

    def edge(direction):
        inside, jump = k0, 1
        while True:
            k = k0 + direction * jump
            if direction < 0 and k <= k_min:
                return None
            if pl_k(k) < alpha:
                outside = k
                break
            inside = k
            jump *= 2
            if jump > 1 << 20:
                raise NumericError("plausibility set is unbounded on the lambda lattice")
        while abs(outside - inside) > 1:
            mid = (inside + outside) // 2
            if pl_k(mid) >= alpha:
                inside = mid
            else:
                outside = mid
        li, lo_ = math.log(lattice.value(inside)), math.log(lattice.value(outside))
        vi, vo = pl_k(inside), pl_k(outside)
        if refine_steps:
            for _ in range(refine_steps):
                mid = 0.5 * (li + lo_)
                lam = math.exp(mid)
                vm = float(engine.plausibility(obs(lam), lam)[0])
                if vm >= alpha:
                    li, vi = mid, vm
                else:
                    lo_, vo = mid, vm
        frac = (vi - alpha) / (vi - vo) if vi != vo else 0.0
        return math.exp(li + frac * (lo_ - li))

    lower = edge(-1)
    upper = edge(+1)
    return (0.0 if lower is None else lower), upper, len(evaluated)


def solve_pb_poisson(
    data: PoissonData,
    cfg: PoissonPriorConfig,
    stream: RandomStream,
    engine: PoissonPlausibility | None = None,
    search: str = "grid",
    lattice: LambdaLattice | None = None,
    refine_steps: int = 0,
) -> PoissonSolution:
    engine = engine or PoissonPlausibility(data.exposures, cfg, stream)
    obs = _ObservedB(engine.model, data)
    lam_hat = math.exp(obs.mu_hat)
    curve = None
    if search == "grid":
        lower, upper, curve, evals = _grid_search(engine, obs, cfg, lam_hat)
    elif search == "lattice":
        lower, upper, evals = _lattice_search(engine, obs, cfg, lam_hat, lattice or LambdaLattice(), refine_steps)
    else:
        raise ConfigurationError(f"unknown search mode {search!r}")
    lower = min(lower, lam_hat)
    upper = max(upper, lam_hat)
    interval = IntervalEstimate(
        lower, upper, 1 - cfg.alpha, "pb-poisson", point=lam_hat, diagnostics={"mle": lam_hat, "evaluations": evals}
    )
    return PoissonSolution(interval, lam_hat, curve, evals)


def pb_interval_poisson(
    data: PoissonData, cfg: PoissonPriorConfig, stream: RandomStream, **kwargs
) -> IntervalEstimate:
    return solve_pb_poisson(data, cfg, stream, **kwargs).interval


# --------------------------------------------------------------------------
# classical and empirical Bayes baselines


def classical_interval_poisson(x: int, exposure: float, alpha: float = 0.05) -> IntervalEstimate:
    if not exposure > 0:
        raise DomainError("exposure must be positive")
    if x < 0:
        raise DomainError("count must be non-negative")
    lower = 0.0 if x == 0 else gamma_quantile(x, alpha / 2) / exposure
    upper = gamma_quantile(x + 1, 1 - alpha / 2) / exposure
    return IntervalEstimate(lower, upper, 1 - alpha, "classical-poisson", point=x / exposure)


def _exp_prior_score(theta, x, n):
    return float(np.sum((x + 1.0) / (n * theta + 1.0)) - x.size)


def eb_exp_prior_fit(records, floor: float = 1e-8) -> float:
    """Marginal MLE of the mean ``theta`` of an exponential prior on the rates.

    Each record ``(x, exposure)`` contributes ``theta^-1 n^x / (n + theta^-1)^(x+1)``.
    """
    arr = np.asarray(records, dtype=float).reshape(-1, 2)
    if arr.shape[0] == 0:
        raise DataError("need at least one record")
    x, n = arr[:, 0], arr[:, 1]
    if np.any(n <= 0):
        raise DataError("exposures must be positive")
    if np.all(x == 0):
        import warnings

        warnings.warn("all counts are zero; theta_hat sits on its floor", RuntimeWarning, stacklevel=2)
        return floor
    # the score decreases in theta: positive near 0, negative for large theta
    hi = 1.0
    while _exp_prior_score(hi, x, n) > 0:
        hi *= 2.0
    return float(optimize.brentq(_exp_prior_score, floor, hi, args=(x, n), xtol=1e-14, rtol=1e-14))


def eb_exp_interval(x: int, exposure: float, theta_hat: float, alpha: float = 0.05) -> IntervalEstimate:
    if not theta_hat > 0:
        raise DomainError("theta_hat must be positive")
    rate = 1.0 / theta_hat + exposure
    lower = gamma_quantile(x + 1, alpha / 2) / rate
    upper = gamma_quantile(x + 1, 1 - alpha / 2) / rate
    return IntervalEstimate(lower, upper, 1 - alpha, "eb-exponential", point=(x + 1) / rate)


def _nb_score(log_gamma, x, t, s):
    g = math.exp(log_gamma)
    return float(np.sum(x - (s + x) * g * t / (1.0 + g * t)))


def fit_gamma_scale(data: PoissonData, shape_s: float, floor: float = 1e-8) -> float:
    """Marginal MLE of the prior scale (negative-binomial marginals with ``p_i = 1/(1 + gamma t_i)``)."""
    x = data.counts.astype(float)
    t = data.exposures
    if np.all(x == 0):
        return floor
    lo, hi = math.log(floor), 0.0
    while _nb_score(hi, x, t, shape_s) > 0:
        hi += 2.0
    return math.exp(optimize.brentq(_nb_score, lo, hi, args=(x, t, shape_s), xtol=1e-13))


def eb_gamma_prior_interval(data: PoissonData, cfg: PoissonPriorConfig, index: int = 0, alpha: float | None = None) -> IntervalEstimate:
    """Naive EB: plug the fitted scale into the conjugate Gamma posterior of ``lambda_index``."""
    alpha = cfg.alpha if alpha is None else alpha
    g = fit_gamma_scale(data, cfg.shape_s, cfg.lambda_floor)
    shape = data.counts[index] + cfg.shape_s
    rate = data.exposures[index] + 1.0 / g
    lower = gamma_quantile(shape, alpha / 2) / rate
    upper = gamma_quantile(shape, 1 - alpha / 2) / rate
    return IntervalEstimate(
        lower, upper, 1 - alpha, "eb-gamma", point=shape / rate, diagnostics={"scale_hat": g}
    )
