"""Plausibility machinery shared by every model.

The two-sided predictive random set is never built explicitly; a CDF value
``u = F(w)`` of the auxiliary variable is turned into plausibility through the
non-coverage probability ``|1 - 2u|``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .errors import ConfigurationError, DivergenceError, NoIntervalError

_GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass
class IntervalEstimate:
    lower: float
    upper: float
    level: float
    method: str
    point: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lower = float(self.lower)
        self.upper = float(self.upper)
        if not self.lower <= self.upper:
            raise ValueError(f"lower {self.lower} exceeds upper {self.upper}")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


@dataclass
class PlausibilityCurve:
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if self.grid.size < 3:
            raise ValueError("a plausibility curve needs at least 3 points")
        if np.any(np.diff(self.grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any((self.values < 0) | (self.values > 1)):
            raise ValueError("plausibility values must lie in [0, 1]")

    def to_csv(self, header=("parameter", "plausibility")) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for g, v in zip(self.grid, self.values):
            writer.writerow([repr(float(g)), repr(float(v))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PlausibilityCurve":
        rows = list(csv.reader(io.StringIO(text)))
        body = rows[1:]
        return cls([float(r[0]) for r in body], [float(r[1]) for r in body])

    def level_set(self, alpha: float, anchor: float | None = None) -> tuple[float, float]:
        """Connected component of ``{values >= alpha}`` around ``anchor``.

        Endpoints are linearly interpolated between the last grid point inside
        and the first one outside; a component touching the grid edge stops there.
        """
        g, v = self.grid, self.values
        i0 = int(np.argmax(v)) if anchor is None else int(np.argmin(np.abs(g - anchor)))
        if v[i0] < alpha:
            raise NoIntervalError("plausibility at the anchor is below alpha")
        lo = i0
        while lo > 0 and v[lo - 1] >= alpha:
            lo -= 1
        hi = i0
        while hi < g.size - 1 and v[hi + 1] >= alpha:
            hi += 1
        lower = g[lo] if lo == 0 else _crossing(g[lo - 1], v[lo - 1], g[lo], v[lo], alpha)
        upper = g[hi] if hi == g.size - 1 else _crossing(g[hi + 1], v[hi + 1], g[hi], v[hi], alpha)
        return float(lower), float(upper)


def _crossing(x_out, v_out, x_in, v_in, alpha):
    if v_in == v_out:
        return x_in
    frac = (v_in - alpha) / (v_in - v_out)
    return x_in + frac * (x_out - x_in)


@dataclass
class CdfEnvelope:
    lower_cdf: Callable
    upper_cdf: Callable


class EmpiricalCdf:
    """Step CDF of a Monte Carlo sample."""

    def __init__(self, samples):
        data = np.sort(np.asarray(samples, dtype=float).ravel())
        if data.size == 0:
            raise ConfigurationError("empirical CDF needs at least one sample")
        self.sorted_samples = data
        self.count = data.size

    def __call__(self, s):
        out = np.searchsorted(self.sorted_samples, s, side="right") / self.count
        return float(out) if np.ndim(out) == 0 else out

    def survival(self, s, tol=0.0):
        """Fraction of samples ``>= s - tol``; the left limit ``1 - F(s-)``."""
        s = np.asarray(s, dtype=float)
        out = 1.0 - np.searchsorted(self.sorted_samples, s - tol, side="left") / self.count
        return float(out) if np.ndim(out) == 0 else out


def ecdf_build(samples) -> EmpiricalCdf:
    return EmpiricalCdf(samples)


def cpl_from_cdf(F, w):
    u = np.asarray(F(w), dtype=float)
    out = 1.0 - np.abs(1.0 - 2.0 * u)
    return float(out) if out.ndim == 0 else out


def cpl_from_envelope(env: CdfEnvelope, w):
    lo = np.asarray(env.lower_cdf(w), dtype=float)
    hi = np.asarray(env.upper_cdf(w), dtype=float)
    out = np.minimum(1.0, np.minimum(2.0 * (1.0 - lo), 2.0 * hi))
    return float(out) if out.ndim == 0 else out


def _golden_extreme(f, a, b, sign, tol=1e-7, maxiter=60):
    """Golden-section search for the minimum of ``sign * f`` on [a, b]."""
    res = optimize.minimize_scalar(
        lambda t: sign * f(t), bounds=(a, b), method="bounded", options={"xatol": tol, "maxiter": maxiter}
    )
    return sign * res.fun


def envelope_from_family(family: Callable, nuisance_grid: Sequence[float], refine: bool = True) -> CdfEnvelope:
    """Pointwise inf/sup of ``family(theta, s)`` over the nuisance grid.

    ``family`` must accept an array of nuisance values and a scalar ``s``. With
    ``refine`` a bounded golden-section pass between the neighbours of the grid
    argmin/argmax sharpens each extreme; the refined value never loses the
    bracketing of the grid members.
    """
    grid = np.asarray(nuisance_grid, dtype=float)
    if grid.size == 0:
        raise ConfigurationError("nuisance grid is empty")

    def extreme(s, sign):
        s = float(s)
        vals = np.asarray(family(grid, s), dtype=float)
        i = int(np.argmin(sign * vals))
        best = vals[i]
        if refine and grid.size > 2:
            a = grid[max(i - 1, 0)]
            b = grid[min(i + 1, grid.size - 1)]
            cand = _golden_extreme(lambda t: float(family(np.array([t]), s)[0]), a, b, sign)
            best = min(best, cand) if sign > 0 else max(best, cand)
        return best

    def vectorize(fn):
        def wrapped(s):
            arr = np.asarray(s, dtype=float)
            if arr.ndim == 0:
                return fn(arr)
            return np.array([fn(x) for x in arr.ravel()]).reshape(arr.shape)

        return wrapped

    return CdfEnvelope(
        lower_cdf=vectorize(lambda s: extreme(s, 1.0)),
        upper_cdf=vectorize(lambda s: extreme(s, -1.0)),
    )


def _locate_edge(pl, alpha, center, direction, radius, grid_size, tol):
    doublings = 0
    while pl(center + direction * radius) >= alpha:
        radius *= 2.0
        doublings += 1
        if doublings > 60:
            raise DivergenceError(
                "plausibility set is unbounded", {"direction": direction, "radius": radius}
            )
    # scan outward so that the component adjacent to the center is kept
    steps = np.linspace(0.0, radius, max(int(grid_size), 3))
    inside = steps[0]
    multimodal = False
    crossing = None
    for t in steps[1:]:
        if pl(center + direction * t) >= alpha:
            if crossing is None:
                inside = t
            else:
                multimodal = True
                break
        elif crossing is None:
            crossing = t
    if crossing is None:
        crossing = radius
    lo, hi = inside, crossing
    while hi - lo > tol * max(1.0, abs(center) + hi):
        mid = 0.5 * (lo + hi)
        if pl(center + direction * mid) >= alpha:
            lo = mid
        else:
            hi = mid
    return center + direction * 0.5 * (lo + hi), multimodal


def invert_plausibility(
    pl: Callable[[float], float],
    alpha: float,
    center: float,
    radius: float = 1.0,
    grid_size: int = 64,
    tol: float = 1e-10,
    method: str = "plausibility",
) -> IntervalEstimate:
    """Connected component of ``{eta : pl(eta) >= alpha}`` containing ``center``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if pl(center) < alpha:
        raise NoIntervalError("plausibility at the center hint is below alpha", {"center": center})
    lower, multi_lo = _locate_edge(pl, alpha, center, -1.0, radius, grid_size, tol)
    upper, multi_hi = _locate_edge(pl, alpha, center, 1.0, radius, grid_size, tol)
    return IntervalEstimate(
        lower, upper, 1.0 - alpha, method, point=center, diagnostics={"multimodal": multi_lo or multi_hi}
    )
