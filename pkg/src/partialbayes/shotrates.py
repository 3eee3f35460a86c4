"""Per-player success-rate intervals from made/attempted counts.

Counts are modelled as ``Pois(attempts * p_i)``. Three estimators are offered:
the classical Gamma-quantile interval, empirical Bayes with an exponential prior on
the rates, and the Partial Bayes interval with the league as companions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import poisson
from .errors import ConfigurationError, DataError
from .im import IntervalEstimate
from .io import ShotRecord
from .rng import RandomStream, label_index

METHODS = ("classical", "eb", "pb")


@dataclass
class PlayerEstimate:
    player: str
    made: int
    attempts: int
    point: float
    interval: IntervalEstimate


@dataclass
class ShotRatesResult:
    method: str
    estimates: list[PlayerEstimate]
    theta_hat: float | None = None


def shotrates_pipeline(
    records: list[ShotRecord],
    method: str,
    alpha: float = 0.05,
    seed: int | None = None,
    mc_count: int = 5000,
    shape_s: float = 1.0,
    players: list[str] | None = None,
    lattice_step: float = 0.05,
) -> ShotRatesResult:
    """Interval and point estimate for every player (or the selected ``players``).

    ``shape_s = 1`` matches the exponential prior of the EB method. The Partial Bayes
    point is the maximizer of the plausibility, i.e. the marginal MLE.
    """
    if method not in METHODS:
        raise ConfigurationError(f"method must be one of {METHODS}")
    if not records:
        raise DataError("no shot records")
    if method != "classical" and len(records) < 2:
        raise DataError("pooling methods need at least two records")
    if method == "pb" and seed is None:
        raise ConfigurationError("the pb method needs a seed")
    chosen = range(len(records))
    if players is not None:
        wanted = set(players)
        unknown = wanted - {r.player for r in records}
        if unknown:
            raise DataError(f"unknown player(s): {sorted(unknown)}")
        chosen = [i for i, r in enumerate(records) if r.player in wanted]

    out = []
    theta = None
    if method == "classical":
        for i in chosen:
            r = records[i]
            iv = poisson.classical_interval_poisson(r.made, r.attempts, alpha)
            out.append(PlayerEstimate(r.player, r.made, r.attempts, r.made / r.attempts, iv))
    elif method == "eb":
        theta = poisson.eb_exp_prior_fit([(r.made, r.attempts) for r in records])
        for i in chosen:
            r = records[i]
            iv = poisson.eb_exp_interval(r.made, r.attempts, theta, alpha)
            out.append(PlayerEstimate(r.player, r.made, r.attempts, iv.point, iv))
    else:
        league = poisson.PoissonData([r.made for r in records], [float(r.attempts) for r in records])
        cfg = poisson.PoissonPriorConfig(shape_s, alpha, mc_count=mc_count)
        lattice = poisson.LambdaLattice(lattice_step)
        for i in chosen:
            r = records[i]
            data = league.reordered(i)
            stream = RandomStream(seed, (label_index("shotrates"), i))
            sol = poisson.solve_pb_poisson(data, cfg, stream, search="lattice", lattice=lattice, refine_steps=4)
            out.append(PlayerEstimate(r.player, r.made, r.attempts, sol.mle, sol.interval))
    return ShotRatesResult(method, out, theta)


def league_mean(records: list[ShotRecord]) -> float:
    return float(np.sum([r.made for r in records]) / np.sum([r.attempts for r in records]))
