"""Special functions and distribution kernels used by the models.

Continuous CDFs and quantiles delegate to :mod:`scipy.special`; the discrete
generalized inverse is computed here so that ties at ``CDF(k) == u`` resolve
to the smallest ``k`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import DomainError
from .rng import RandomStream

KINDS = (
    "standard-normal",
    "gamma",
    "scaled-chi-square",
    "poisson",
    "binomial",
    "uniform",
    "beta",
)


def _finite(x, name="argument"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _ret(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _probability(p, name="p"):
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0) & (arr < 1)):
        raise DomainError(f"{name} must lie strictly inside (0, 1)")
    return arr


def std_normal_cdf(z):
    return _ret(special.ndtr(_finite(z, "z")))


def std_normal_quantile(p):
    return _ret(special.ndtri(_probability(p)))


def gamma_cdf(shape, x):
    """Regularized lower incomplete gamma P(shape, x)."""
    shape = np.asarray(shape, dtype=float)
    x = _finite(x, "x")
    if np.any(shape <= 0):
        raise DomainError("gamma shape must be positive")
    if np.any(x < 0):
        raise DomainError("gamma_cdf needs x >= 0")
    return _ret(special.gammainc(shape, x))


def gamma_quantile(shape, p):
    shape = np.asarray(shape, dtype=float)
    if np.any(shape <= 0):
        raise DomainError("gamma shape must be positive")
    p = _probability(p)
    x = special.gammaincinv(shape, p)
    # one Newton step on P(shape, x) - p against the gamma density
    logpdf = (shape - 1) * np.log(np.where(x > 0, x, 1.0)) - x - special.gammaln(shape)
    pdf = np.where(x > 0, np.exp(logpdf), 0.0)
    step = np.where(pdf > 1e-300, (special.gammainc(shape, x) - p) / np.where(pdf > 1e-300, pdf, 1.0), 0.0)
    refined = x - step
    x = np.where((refined > 0) & np.isfinite(refined), refined, x)
    return _ret(x)


def scaled_chi2_logpdf(dof, x):
    k = float(dof)
    x = np.asarray(x, dtype=float)
    half = 0.5 * k
    return half * np.log(half) - special.gammaln(half) + (half - 1) * np.log(x) - half * x


def scaled_chi2_pdf(dof, x):
    """Density of chi^2_dof / dof."""
    if int(dof) != dof or dof < 1:
        raise DomainError("dof must be a positive integer")
    x = _finite(x, "x")
    if np.any(x <= 0):
        raise DomainError("scaled_chi2_pdf needs x > 0")
    return _ret(np.exp(scaled_chi2_logpdf(dof, x)))


def poisson_cdf(k, mean):
    return special.pdtr(k, mean)


def binomial_cdf(k, size, prob):
    return special.bdtr(k, size, prob)


def _generalized_inverse(cdf, u, start, upper=None):
    k = np.maximum(np.floor(start), 0).astype(np.int64)
    if upper is not None:
        k = np.minimum(k, upper)
    # walk up until CDF(k) >= u
    while True:
        low = cdf(k) < u
        if upper is not None:
            low &= k < upper
        if not low.any():
            break
        k = k + low
    # walk down while CDF(k - 1) >= u
    while True:
        down = (k > 0) & (cdf(np.maximum(k - 1, 0)) >= u)
        if not down.any():
            break
        k = k - down
    return k


def poisson_quantile(mean, u):
    """Vectorized smallest k with Poisson CDF(k) >= u (no validation)."""
    mean, u = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(u, dtype=float))
    sd = np.sqrt(mean)
    start = mean + sd * special.ndtri(u) - 0.5
    return _generalized_inverse(lambda k: special.pdtr(k, mean), u, start)


def binomial_quantile(size, prob, u):
    """Vectorized smallest k with Binomial CDF(k) >= u (no validation)."""
    size, prob, u = np.broadcast_arrays(
        np.asarray(size, dtype=np.int64), np.asarray(prob, dtype=float), np.asarray(u, dtype=float)
    )
    mean = size * prob
    sd = np.sqrt(mean * (1 - prob))
    start = np.clip(mean + sd * special.ndtri(u) - 0.5, 0, size)
    return _generalized_inverse(lambda k: special.bdtr(k, size, prob), u, start, upper=size)


@dataclass(frozen=True)
class DistributionSpec:
    kind: str
    shape: float | None = None
    dof: int | None = None
    mean: float | None = None
    size: int | None = None
    prob: float | None = None
    a: float | None = None
    b: float | None = None

    def __post_init__(self):
        kind = self.kind
        if kind not in KINDS:
            raise DomainError(f"unknown distribution kind {kind!r}")
        if kind == "gamma" and not (self.shape is not None and self.shape > 0):
            raise DomainError("gamma needs shape > 0")
        if kind == "scaled-chi-square" and not (self.dof is not None and int(self.dof) == self.dof and self.dof >= 1):
            raise DomainError("scaled-chi-square needs integer dof >= 1")
        if kind == "poisson" and not (self.mean is not None and self.mean >= 0):
            raise DomainError("poisson needs mean >= 0")
        if kind == "binomial":
            if not (self.size is not None and int(self.size) == self.size and self.size >= 1):
                raise DomainError("binomial needs integer size >= 1")
            if not (self.prob is not None and 0 <= self.prob <= 1):
                raise DomainError("binomial needs 0 <= prob <= 1")
        if kind == "beta" and not (self.a is not None and self.b is not None and self.a > 0 and self.b > 0):
            raise DomainError("beta needs a > 0 and b > 0")


def discrete_quantile(spec: DistributionSpec, u):
    """Generalized inverse CDF, ``inf{k : CDF(k) >= u}``, for Poisson or binomial."""
    u_arr = _probability(u, "u")
    if spec.kind == "poisson":
        k = poisson_quantile(spec.mean, u_arr)
    elif spec.kind == "binomial":
        k = binomial_quantile(spec.size, spec.prob, u_arr)
    else:
        raise DomainError("discrete_quantile supports poisson and binomial only")
    return int(k) if np.ndim(k) == 0 else k


def sample(spec: DistributionSpec, count: int, stream: RandomStream) -> np.ndarray:
    if int(count) != count or count < 1:
        raise DomainError("count must be a positive integer")
    rng = stream.generator()
    kind = spec.kind
    if kind == "standard-normal":
        return rng.standard_normal(count)
    if kind == "gamma":
        return rng.gamma(spec.shape, size=count)
    if kind == "scaled-chi-square":
        return rng.chisquare(spec.dof, size=count) / spec.dof
    if kind == "poisson":
        return rng.poisson(spec.mean, size=count)
    if kind == "binomial":
        return rng.binomial(spec.size, spec.prob, size=count)
    if kind == "uniform":
        return rng.random(count)
    return rng.beta(spec.a, spec.b, size=count)
