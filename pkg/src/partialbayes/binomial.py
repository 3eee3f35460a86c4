"""Inference for the rate difference of two binomial samples.

``X ~ Bin(m, p1)`` and ``Y ~ Bin(n, p2)`` with ``delta = p1 - p2`` carrying a known
prior (``2 beta - 1`` with ``beta ~ Beta(a, b)``). The nuisance is reparameterized as
``omega`` in (-1, 1):

    p1 = {1 + delta + (1 - |delta|) omega} / 2,   p2 = {1 - delta + (1 - |delta|) omega} / 2.

For fixed ``delta`` the log-likelihood is concave in ``omega``; its stationary point
solves a cubic in ``p2``. Because the maximized profile depends on the data only
through ``(x, y)``, every possible outcome is tabulated once per ``(m, n, prior)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import special, stats

from .distributions import binomial_quantile
from .errors import ConfigurationError, DataError, DomainError
from .im import EmpiricalCdf, IntervalEstimate, PlausibilityCurve, ecdf_build
from .rng import RandomStream

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class BinomData:
    x: int
    m: int
    y: int
    n: int

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise DataError("sample sizes must be at least 1")
        if not (0 <= self.x <= self.m and 0 <= self.y <= self.n):
            raise DataError("successes must lie between 0 and the sample size")


@dataclass(frozen=True)
class DeltaPrior:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ConfigurationError("prior parameters must be positive")

    @property
    def symmetric(self) -> bool:
        return self.a == self.b


@dataclass(frozen=True)
class BinomConfig:
    alpha: float = 0.05
    delta_grid_size: int = 401
    omega_grid_size: int = 41
    mc_count: int = 2000
    delta_limit: float = 0.999
    omega_limit: float = 0.975

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")
        if self.delta_grid_size < 11 or self.omega_grid_size < 11:
            raise ConfigurationError("grids need at least 11 points")
        if self.mc_count < 1:
            raise ConfigurationError("mc_count must be positive")

    def delta_grid(self) -> np.ndarray:
        return np.linspace(-self.delta_limit, self.delta_limit, self.delta_grid_size)

    def omega_grid(self) -> np.ndarray:
        return np.linspace(-self.omega_limit, self.omega_limit, self.omega_grid_size)


def prior_density_delta(prior: DeltaPrior, delta):
    d = np.asarray(delta, dtype=float)
    if np.any(np.abs(d) > 1):
        raise DomainError("delta must lie in [-1, 1]")
    out = 0.5 * stats.beta.pdf((d + 1.0) / 2.0, prior.a, prior.b)
    return float(out) if out.ndim == 0 else out


def _log_prior(prior: DeltaPrior, delta):
    return np.log(0.5) + stats.beta.logpdf((np.asarray(delta) + 1.0) / 2.0, prior.a, prior.b)


def rates(delta, omega):
    """``(p1, p2)`` for the reparameterized nuisance."""
    delta = np.asarray(delta, dtype=float)
    tau = 1.0 + (1.0 - np.abs(delta)) * np.asarray(omega, dtype=float)
    return np.clip((tau + delta) / 2.0, 0.0, 1.0), np.clip((tau - delta) / 2.0, 0.0, 1.0)


def _binom_ll(x, m, y, n, p1, p2):
    # xlogy keeps 0 * log 0 = 0
    return (
        special.xlogy(x, p1) + special.xlogy(m - x, 1.0 - p1) + special.xlogy(y, p2) + special.xlogy(n - y, 1.0 - p2)
    )


def loglik_delta_omega(data: BinomData, prior: DeltaPrior, delta: float, omega: float) -> float:
    if abs(delta) >= 1 or abs(omega) >= 1:
        raise DomainError("delta and omega must lie in (-1, 1)")
    p1, p2 = rates(delta, omega)
    return float(_binom_ll(data.x, data.m, data.y, data.n, p1, p2) + _log_prior(prior, delta))


def _dl_domega(x, m, y, n, delta, omega):
    p1, p2 = rates(delta, omega)

    def term(k, p):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(k > 0, k / p, 0.0)

    g = term(x, p1) - term(m - x, 1.0 - p1) + term(y, p2) - term(n - y, 1.0 - p2)
    return 0.5 * (1.0 - np.abs(delta)) * g


def cubic_coefficients(x, m, y, n, delta):
    a = np.asarray(m + n, dtype=float) + 0.0 * delta
    b = -(x + y) - m * (1.0 - delta) - n * (1.0 - 2.0 * delta)
    c = x - m * delta + y * (1.0 - 2.0 * delta) - n * (delta - delta**2)
    d = y * (delta - delta**2)
    return a, b, c, d


def _cubic_real_roots(a, b, c, d):
    """Real roots (NaN where absent), shape ``(..., 3)``, by the trigonometric/Cardano forms."""
    A, B, C = b / a, c / a, d / a
    Q = (3.0 * B - A * A) / 9.0
    R = (9.0 * A * B - 27.0 * C - 2.0 * A**3) / 54.0
    D = Q**3 + R * R
    shift = -A / 3.0
    with np.errstate(invalid="ignore", divide="ignore"):
        negQ = np.maximum(-Q, 0.0)
        ratio = np.clip(R / np.sqrt(np.where(negQ > 0, negQ**3, 1.0)), -1.0, 1.0)
        theta = np.arccos(ratio)
        r = 2.0 * np.sqrt(negQ)
        trig = np.stack([r * np.cos((theta + 2.0 * k * math.pi) / 3.0) + shift for k in range(3)], axis=-1)
        sq = np.sqrt(np.maximum(D, 0.0))
        S, T = np.cbrt(R + sq), np.cbrt(R - sq)
        one = S + T + shift
        double = -(S + T) / 2.0 + shift
        card = np.stack([one, np.where(np.abs(D) <= 1e-12 * (np.abs(Q) ** 3 + R * R + 1e-300), double, np.nan),
                         np.full_like(one, np.nan)], axis=-1)
    return np.where((D < 0)[..., None], trig, card)


@dataclass
class OmegaProfile:
    omega: np.ndarray
    value: np.ndarray
    boundary: np.ndarray
    p2: np.ndarray


def profile_omega(x, m, y, n, delta, polish: int = 3) -> OmegaProfile:
    """Maximize the binomial log-likelihood over ``omega`` for each ``delta`` (broadcast)."""
    x, y, delta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, delta)))
    x, y, delta = x.copy(), y.copy(), delta.copy()
    lo = np.maximum(0.0, -delta)
    hi = np.minimum(1.0, 1.0 - delta)
    a, b, c, d = cubic_coefficients(x, m, y, n, delta)
    roots = _cubic_real_roots(a, b, c, d)
    for _ in range(polish):
        f = ((a[..., None] * roots + b[..., None]) * roots + c[..., None]) * roots + d[..., None]
        fp = (3.0 * a[..., None] * roots + 2.0 * b[..., None]) * roots + c[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            roots = np.where(np.abs(fp) > 0, roots - f / fp, roots)
    scale = 1.0 - np.abs(delta)
    inside = (roots > lo[..., None]) & (roots < hi[..., None])
    om_roots = (2.0 * roots + delta[..., None] - 1.0) / scale[..., None]
    p1r, p2r = rates(delta[..., None], np.clip(om_roots, -1.0, 1.0))
    vals = np.where(inside, _binom_ll(x[..., None], m, y[..., None], n, p1r, p2r), -np.inf)
    vals = np.where(np.isnan(vals), -np.inf, vals)
    pick = np.argmax(vals, axis=-1)
    best = np.take_along_axis(vals, pick[..., None], -1)[..., 0]
    omega = np.take_along_axis(om_roots, pick[..., None], -1)[..., 0]

    # compare with the endpoints, which carry the maximum when no interior root exists
    ends = []
    for w in (-1.0, 1.0):
        p1, p2 = rates(delta, w)
        ends.append(_binom_ll(x, m, y, n, p1, p2))
    end_best = np.where(ends[0] >= ends[1], -1.0, 1.0)
    end_val = np.maximum(ends[0], ends[1])
    # a root within rounding of the edge is the spurious p = 0 or 1 factor of the cubic
    interior = np.isfinite(best) & (best >= end_val) & (np.abs(omega) < 1.0 - 1e-12)

    # poor conditioning: fall back to bisection on the (decreasing) omega-derivative
    bad = interior & (np.abs(_dl_domega(x, m, y, n, delta, omega)) > 1e-6 * (m + n))
    if bad.any():
        omega = np.where(bad, _bisect_omega(x, m, y, n, delta, bad), omega)
        p1, p2 = rates(delta, omega)
        best = np.where(bad, _binom_ll(x, m, y, n, p1, p2), best)
    omega = np.where(interior, omega, end_best)
    value = np.where(interior, best, end_val)
    p1, p2 = rates(delta, omega)
    return OmegaProfile(omega, value, ~interior, p2)


def _bisect_omega(x, m, y, n, delta, mask, iters=80):
    lo = np.full(delta.shape, -1.0 + 1e-15)
    hi = np.full(delta.shape, 1.0 - 1e-15)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        g = _dl_domega(x, m, y, n, delta, mid)
        lo = np.where(mask & (g > 0), mid, lo)
        hi = np.where(mask & (g <= 0), mid, hi)
    return 0.5 * (lo + hi)


def omega_hat_delta(data: BinomData, prior: DeltaPrior, delta: float) -> tuple[float, bool]:
    """Maximizer over ``omega`` at fixed ``delta`` and whether it sits on the boundary."""
    if abs(delta) >= 1:
        raise DomainError("delta must lie in (-1, 1)")
    prof = profile_omega(data.x, data.m, data.y, data.n, delta)
    return float(prof.omega), bool(prof.boundary)


def profile_loglik(x, m, y, n, prior: DeltaPrior, delta) -> np.ndarray:
    return profile_omega(x, m, y, n, delta).value + _log_prior(prior, delta)


def _map_many(x, m, y, n, prior: DeltaPrior, cfg: BinomConfig, iters: int = 60):
    """Vectorized MAP over datasets ``(x_k, y_k)``: grid scan plus golden refinement."""
    grid = cfg.delta_grid()
    prof = profile_loglik(x[:, None], m, y[:, None], n, prior, grid[None, :])
    i = np.argmax(prof, axis=1)
    lo = grid[np.maximum(i - 1, 0)]
    hi = grid[np.minimum(i + 1, grid.size - 1)]

    def f(d):
        return profile_loglik(x, m, y, n, prior, d)

    c = hi - _GOLDEN * (hi - lo)
    e = lo + _GOLDEN * (hi - lo)
    fc, fe = f(c), f(e)
    for _ in range(iters):
        left = fc >= fe
        hi = np.where(left, e, hi)
        lo = np.where(left, lo, c)
        e_new = np.where(left, c, lo + _GOLDEN * (hi - lo))
        c_new = np.where(left, hi - _GOLDEN * (hi - lo), e)
        fe_new = np.where(left, fc, np.nan)
        fc_new = np.where(left, np.nan, fe)
        c, e = c_new, e_new
        fc = np.where(np.isnan(fc_new), f(c), fc_new)
        fe = np.where(np.isnan(fe_new), f(e), fe_new)
    d_ref = 0.5 * (lo + hi)
    v_ref = f(d_ref)
    g_best = prof[np.arange(x.size), i]
    use_grid = g_best > v_ref
    d_hat = np.where(use_grid, grid[i], d_ref)
    v_hat = np.where(use_grid, g_best, v_ref)
    return d_hat, v_hat, prof


def map_delta_omega(data: BinomData, prior: DeltaPrior, cfg: BinomConfig) -> tuple[float, float]:
    d_hat, _, _ = _map_many(np.array([data.x], float), data.m, np.array([data.y], float), data.n, prior, cfg)
    omega, _ = omega_hat_delta(data, prior, float(d_hat[0]))
    return float(d_hat[0]), omega


class BinomTable:
    """MAP values and profiles for every outcome ``(x, y)`` of fixed sizes ``(m, n)``."""

    def __init__(self, m: int, n: int, prior: DeltaPrior, cfg: BinomConfig):
        self.m, self.n, self.prior, self.cfg = int(m), int(n), prior, cfg
        xs, ys = np.meshgrid(np.arange(m + 1, dtype=float), np.arange(n + 1, dtype=float), indexing="ij")
        d_hat, v_hat, prof = _map_many(xs.ravel(), m, ys.ravel(), n, prior, cfg)
        self.delta_hat = d_hat.reshape(m + 1, n + 1)
        self.max_value = v_hat.reshape(m + 1, n + 1)
        self.grid = cfg.delta_grid()
        self.grid_profile = prof.reshape(m + 1, n + 1, -1)

    def b(self, x, y, delta) -> np.ndarray:
        """``b(x, y, delta)`` for integer arrays ``x, y`` and matching ``delta``."""
        x = np.asarray(x, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        val = profile_loglik(x.astype(float), self.m, y.astype(float), self.n, self.prior, delta)
        return _clean_b(self.max_value[x, y], val)

    def b_grid(self, x: int, y: int) -> np.ndarray:
        return _clean_b(self.max_value[x, y], self.grid_profile[x, y])


def _clean_b(top, val):
    b = top - val
    return np.where(b < 1e-10 * (1.0 + np.abs(top)), 0.0, b)


def b_statistic_binom(data: BinomData, prior: DeltaPrior, cfg: BinomConfig, delta):
    d = np.asarray(delta, dtype=float)
    if np.any(np.abs(d) >= 1):
        raise DomainError("delta must lie in (-1, 1)")
    _, top, _ = _map_many(np.array([data.x], float), data.m, np.array([data.y], float), data.n, prior, cfg)
    val = profile_loglik(data.x, data.m, data.y, data.n, prior, d)
    out = _clean_b(top[0], val)
    return float(out) if out.ndim == 0 else out


@dataclass
class BinomCalibration:
    """Monte Carlo CDFs of ``W_b`` over the omega grid, sharing one auxiliary block."""

    table: BinomTable
    stream: RandomStream
    omegas: np.ndarray = field(init=False)

    def __post_init__(self):
        self.omegas = self.table.cfg.omega_grid()

    @cached_property
    def block(self):
        cfg, prior = self.table.cfg, self.table.prior
        rng = self.stream.generator()
        delta = 2.0 * rng.beta(prior.a, prior.b, size=cfg.mc_count) - 1.0
        u = rng.random((cfg.mc_count, 2))
        return delta, u

    def draws(self, omega: float) -> np.ndarray:
        delta, u = self.block
        p1, p2 = rates(delta, omega)
        x = binomial_quantile(self.table.m, p1, u[:, 0])
        y = binomial_quantile(self.table.n, p2, u[:, 1])
        return self.table.b(x, y, delta)

    @cached_property
    def ecdfs(self) -> list[EmpiricalCdf]:
        return [ecdf_build(self.draws(w)) for w in self.omegas]

    def lower_cdf(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        return np.min([F(s) for F in self.ecdfs], axis=0)

    def plausibility(self, b) -> np.ndarray:
        return 1.0 - self.lower_cdf(b)


def wb_sample_binom(omega: float, data_shape, prior: DeltaPrior, cfg: BinomConfig, stream: RandomStream) -> EmpiricalCdf:
    if abs(omega) >= 1:
        raise DomainError("omega must lie in (-1, 1)")
    m, n = data_shape
    return ecdf_build(BinomCalibration(BinomTable(m, n, prior, cfg), stream).draws(omega))


def pl_binom(data: BinomData, prior: DeltaPrior, cfg: BinomConfig, delta: float, stream: RandomStream) -> float:
    if abs(delta) >= 1:
        raise DomainError("delta must lie in (-1, 1)")
    cal = BinomCalibration(BinomTable(data.m, data.n, prior, cfg), stream)
    b = cal.table.b(np.array([data.x]), np.array([data.y]), np.array([delta]))
    return float(cal.plausibility(b)[0])


@dataclass
class BinomSolution:
    interval: IntervalEstimate
    curve: PlausibilityCurve
    delta_hat: float


def solve_pb_binom(data: BinomData, calibration: BinomCalibration) -> BinomSolution:
    table = calibration.table
    if (table.m, table.n) != (data.m, data.n):
        raise ConfigurationError("calibration was built for other sample sizes")
    alpha = table.cfg.alpha
    d_hat = float(table.delta_hat[data.x, data.y])
    grid = np.unique(np.append(table.grid, d_hat))
    b = table.b(np.full(grid.size, data.x), np.full(grid.size, data.y), grid)
    values = calibration.plausibility(b)
    curve = PlausibilityCurve(grid, values)
    lower, upper = curve.level_set(alpha, anchor=d_hat)
    # a component running into the grid edge extends to the support boundary
    if lower <= grid[0] and values[0] >= alpha:
        lower = -1.0
    if upper >= grid[-1] and values[-1] >= alpha:
        upper = 1.0
    lower, upper = max(-1.0, min(lower, d_hat)), min(1.0, max(upper, d_hat))
    omega_reparam = float(profile_omega(data.x, data.m, data.y, data.n, d_hat).omega) if abs(d_hat) < 1 else 0.0
    interval = IntervalEstimate(
        lower, upper, 1 - alpha, "pb-binom", point=d_hat, diagnostics={"omega_reparam": omega_reparam}
    )
    return BinomSolution(interval, curve, d_hat)


def pb_interval_binom(data: BinomData, prior: DeltaPrior, cfg: BinomConfig, stream: RandomStream) -> IntervalEstimate:
    cal = BinomCalibration(BinomTable(data.m, data.n, prior, cfg), stream)
    return solve_pb_binom(data, cal).interval
