"""Coverage and width studies under the joint law of parameters and data.

Replication ``r`` for sample size ``n`` draws from the substream ``(n, r)`` of the
base seed, so reports do not depend on the number of worker threads. Monte Carlo
calibration objects that do not depend on the data (Poisson ``W_b`` CDFs on a
log-rate lattice, binomial ``W_b`` CDFs over the omega grid) are built once per
sample size from their own substream and shared by all replications.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import binomial, normal, poisson
from .errors import ConfigurationError, PartialBayesError
from .rng import RandomStream, label_index

log = logging.getLogger(__name__)

THREADS_ENV = "PARTIALBAYES_THREADS"

MODELS = {
    "normal-known-tau": ("pb", "eb", "oracle"),
    "normal-unknown-tau": ("pb", "eb", "oracle"),
    "poisson": ("pb", "eb"),
    "binom-diff": ("pb",),
}

FAILURE_FLAG_RATE = 0.01


@dataclass
class SimulationConfig:
    model: str
    sample_sizes: list[int]
    methods: list[str] = field(default_factory=lambda: ["pb"])
    replications: int = 1000
    alpha: float = 0.05
    base_seed: int = 0
    mu: float = 0.0
    tau: float = 1.0
    sigma: float = 1.0
    randomize_mu: bool = False
    shape_s: float = 2.0
    scale_gamma: float = 1.0
    prior_a: float = 2.0
    prior_b: float = 2.0
    mc_count: int = 2000
    lattice_step: float = 0.02
    threads: int | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigurationError(f"unknown model {self.model!r}; expected one of {sorted(MODELS)}")
        unknown = [m for m in self.methods if m not in MODELS[self.model]]
        if unknown or not self.methods:
            raise ConfigurationError(f"methods {unknown} not available for {self.model}")
        if self.replications < 100:
            raise ConfigurationError("replications must be at least 100")
        if not self.sample_sizes:
            raise ConfigurationError("need at least one sample size")
        self.sample_sizes = [int(n) for n in self.sample_sizes]
        if not 0 < self.alpha < 1:
            raise ConfigurationError("alpha must lie in (0, 1)")

    @classmethod
    def from_mapping(cls, data: dict) -> "SimulationConfig":
        flat = dict(data)
        truth = flat.pop("truth", {}) or {}
        flat.update(truth)
        names = set(cls.__dataclass_fields__)
        extra = set(flat) - names
        if extra:
            raise ConfigurationError(f"unknown configuration keys: {sorted(extra)}")
        return cls(**flat)

    def resolved_threads(self) -> int:
        if self.threads is not None:
            return max(1, int(self.threads))
        env = os.environ.get(THREADS_ENV)
        return max(1, int(env)) if env else 1


@dataclass
class ReportRow:
    model: str
    n: int
    method: str
    coverage: float
    mean_width: float
    mc_se: float
    reps: int
    failures: int


@dataclass
class SimulationReport:
    rows: list[ReportRow]
    config: dict
    flagged: bool = False

    def row(self, n: int, method: str) -> ReportRow:
        for r in self.rows:
            if r.n == n and r.method == method:
                return r
        raise KeyError((n, method))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["model", "n", "method", "coverage", "mean_width", "mc_se", "reps", "failures"])
        for r in self.rows:
            writer.writerow([r.model, r.n, r.method, repr(r.coverage), repr(r.mean_width), repr(r.mc_se), r.reps, r.failures])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({"config": self.config, "flagged": self.flagged, "rows": [asdict(r) for r in self.rows]}, indent=2)


def mc_standard_error(p: float, reps: int) -> float:
    """Binomial standard error, kept positive by pulling ``p`` half a count off 0 and 1."""
    p = min(max(p, 0.5 / reps), 1.0 - 0.5 / reps)
    return math.sqrt(p * (1.0 - p) / reps)


# ---------------------------------------------------------------------------
# per-model replication kernels; each returns {method: (truth, interval)}


class _NormalKnown:
    def __init__(self, cfg: SimulationConfig, n: int):
        self.cfg, self.n = cfg, n
        self.tau_cfg = normal.KnownTauConfig(cfg.tau, cfg.alpha)

    def draw(self, rng):
        c = self.cfg
        mu = rng.uniform(-5.0, 5.0) if c.randomize_mu else c.mu
        theta = mu + c.tau * rng.standard_normal(self.n)
        x = theta + c.sigma * rng.standard_normal(self.n)
        return mu, theta[0], normal.NormalData(x, c.sigma)

    def run(self, rng, methods):
        mu, truth, data = self.draw(rng)
        out = {}
        for m in methods:
            if m == "pb":
                out[m] = normal.pb_interval_known_tau(data, self.tau_cfg)
            elif m == "eb":
                out[m] = normal.eb_interval_known_tau(data, self.tau_cfg)
            else:
                out[m] = normal.optimal_interval_conjugate(data, self.tau_cfg, (mu, 0.0))
        return truth, out


class _NormalUnknown(_NormalKnown):
    def __init__(self, cfg: SimulationConfig, n: int):
        super().__init__(cfg, n)
        self.un_cfg = normal.UnknownTauConfig(alpha=cfg.alpha)

    def run(self, rng, methods):
        _, truth, data = self.draw(rng)
        out = {}
        for m in methods:
            if m == "pb":
                out[m] = normal.pb_interval_unknown_tau(data, self.un_cfg)
            elif m == "eb":
                out[m] = normal.eb_interval_unknown_tau(data, self.cfg.alpha)
            else:
                # efficiency benchmark: tau known, mu unknown (flat)
                out[m] = normal.optimal_interval_conjugate(data, self.tau_cfg, (0.0, math.inf))
        return truth, out


class _Poisson:
    def __init__(self, cfg: SimulationConfig, n: int):
        self.cfg, self.n = cfg, n
        self.pcfg = poisson.PoissonPriorConfig(cfg.shape_s, cfg.alpha, mc_count=cfg.mc_count)
        stream = RandomStream(cfg.base_seed, (label_index("poisson-calibration"), n))
        self.engine = poisson.PoissonPlausibility(np.ones(n), self.pcfg, stream)
        self.lattice = poisson.LambdaLattice(cfg.lattice_step)

    def run(self, rng, methods):
        c = self.cfg
        lam = c.scale_gamma * rng.gamma(c.shape_s, size=self.n)
        data = poisson.PoissonData(rng.poisson(lam), np.ones(self.n))
        out = {}
        for m in methods:
            if m == "pb":
                out[m] = poisson.solve_pb_poisson(
                    data, self.pcfg, self.engine.stream, engine=self.engine, search="lattice", lattice=self.lattice
                ).interval
            else:
                out[m] = poisson.eb_gamma_prior_interval(data, self.pcfg)
        return lam[0], out


class _Binom:
    def __init__(self, cfg: SimulationConfig, n: int):
        self.cfg, self.n = cfg, n
        self.prior = binomial.DeltaPrior(cfg.prior_a, cfg.prior_b)
        bcfg = binomial.BinomConfig(alpha=cfg.alpha, mc_count=cfg.mc_count)
        table = binomial.BinomTable(n, n, self.prior, bcfg)
        stream = RandomStream(cfg.base_seed, (label_index("binom-calibration"), n))
        self.calibration = binomial.BinomCalibration(table, stream)
        self.calibration.ecdfs

    def run(self, rng, methods):
        delta = 2.0 * rng.beta(self.prior.a, self.prior.b) - 1.0
        omega = rng.uniform(-1.0, 1.0)
        p1, p2 = binomial.rates(delta, omega)
        data = binomial.BinomData(int(rng.binomial(self.n, p1)), self.n, int(rng.binomial(self.n, p2)), self.n)
        return delta, {"pb": binomial.solve_pb_binom(data, self.calibration).interval}


_KERNELS = {
    "normal-known-tau": _NormalKnown,
    "normal-unknown-tau": _NormalUnknown,
    "poisson": _Poisson,
    "binom-diff": _Binom,
}

_FAILURES = (PartialBayesError, ArithmeticError, ValueError)


def _one_replication(kernel, cfg: SimulationConfig, n: int, r: int):
    rng = RandomStream(cfg.base_seed, (n, r)).generator()
    try:
        truth, intervals = kernel.run(rng, cfg.methods)
    except _FAILURES as exc:
        log.warning("replication %d at n=%d failed: %s", r, n, exc)
        return {m: None for m in cfg.methods}
    return {m: (iv.contains(truth), iv.width) for m, iv in intervals.items()}


def run_simulation(cfg: SimulationConfig, progress=None) -> SimulationReport:
    threads = cfg.resolved_threads()
    rows = []
    flagged = False
    for n in cfg.sample_sizes:
        kernel = _KERNELS[cfg.model](cfg, n)

        def job(r, kernel=kernel, n=n):
            return _one_replication(kernel, cfg, n, r)

        if threads == 1:
            results = [job(r) for r in range(cfg.replications)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(job, range(cfg.replications)))
        for m in cfg.methods:
            done = [res[m] for res in results if res[m] is not None]
            failures = cfg.replications - len(done)
            hits = sum(1 for ok, _ in done if ok)
            reps = len(done)
            coverage = hits / reps if reps else float("nan")
            width = math.fsum(w for _, w in done) / reps if reps else float("nan")
            se = mc_standard_error(coverage, reps) if reps else float("nan")
            rows.append(ReportRow(cfg.model, n, m, coverage, width, se, reps, failures))
            if failures > FAILURE_FLAG_RATE * cfg.replications:
                flagged = True
        if progress is not None:
            progress(n)
    config = asdict(cfg)
    config.pop("threads")
    return SimulationReport(rows, config, flagged)


@dataclass
class Fig1Row:
    n: int
    eb_coverage: float
    pb_coverage: float


def fig1_curves(n_values, tau: float = 1.0, sigma: float = 1.0, alpha: float = 0.05) -> list[Fig1Row]:
    """Exact coverage of the EB and PB intervals in the known-tau normal model."""
    n_values = list(n_values)
    if not n_values:
        raise ConfigurationError("n_values must be non-empty")
    return [Fig1Row(int(n), normal.eb_coverage_analytic(int(n), tau, sigma, alpha), 1.0 - alpha) for n in n_values]


def fig1_csv(rows: list[Fig1Row]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", "eb_coverage", "pb_coverage"])
    for r in rows:
        writer.writerow([r.n, f"{r.eb_coverage:.6f}", f"{r.pb_coverage:.6f}"])
    return buf.getvalue()
