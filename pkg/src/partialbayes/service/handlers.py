"""Request handlers: validated request model in, response model out.

The FastAPI app and the in-process command line call the same functions, so both
front ends produce identical payloads.
"""

from __future__ import annotations

import numpy as np

from .. import binomial, normal, poisson, shotrates, simulation
from ..errors import ConfigurationError
from ..im import IntervalEstimate, PlausibilityCurve
from ..io import ShotRecord, interval_record
from ..rng import RandomStream
from . import schemas


def _response(iv: IntervalEstimate, parameter: str, seed=None, curve: PlausibilityCurve | None = None):
    rec = interval_record(iv, parameter, seed)
    if curve is not None:
        rec["curve"] = [(float(g), float(v)) for g, v in zip(curve.grid, curve.values)]
    return schemas.IntervalResponse(**rec)


def normal_known(req: schemas.NormalKnownRequest) -> schemas.IntervalResponse:
    data = normal.NormalData(req.observations, req.sigma)
    cfg = normal.KnownTauConfig(req.tau, req.alpha)
    if req.method == "pb":
        iv = normal.pb_interval_known_tau(data, cfg)
        curve = normal.pb_curve_known_tau(data, cfg) if req.include_curve else None
    else:
        iv, curve = normal.eb_interval_known_tau(data, cfg), None
    return _response(iv, "mu1", curve=curve)


def normal_unknown(req: schemas.NormalUnknownRequest) -> schemas.IntervalResponse:
    data = normal.NormalData(req.observations, req.sigma)
    if req.method == "pb":
        cfg = normal.UnknownTauConfig(alpha=req.alpha, tempering_gamma=req.tempering_gamma)
        iv = normal.pb_interval_unknown_tau(data, cfg)
        curve = normal.pb_curve_unknown_tau(data, cfg) if req.include_curve else None
    else:
        iv, curve = normal.eb_interval_unknown_tau(data, req.alpha), None
    return _response(iv, "mu1", curve=curve)


def poisson_interval(req: schemas.PoissonRequest) -> schemas.IntervalResponse:
    data = poisson.PoissonData(req.counts, req.exposures)
    if req.index >= data.n:
        raise ConfigurationError(f"index {req.index} out of range for {data.n} records")
    data = data.reordered(req.index)
    cfg = poisson.PoissonPriorConfig(
        req.shape_s, req.alpha, mc_count=req.mc_count, lambda_grid_size=req.lambda_grid_size
    )
    if req.method == "classical":
        iv = poisson.classical_interval_poisson(int(data.counts[0]), float(data.exposures[0]), req.alpha)
        return _response(iv, "lambda1")
    if req.method == "eb-gamma":
        return _response(poisson.eb_gamma_prior_interval(data, cfg), "lambda1")
    if req.seed is None:
        raise ConfigurationError("the pb method needs a seed")
    sol = poisson.solve_pb_poisson(data, cfg, RandomStream(req.seed))
    return _response(sol.interval, "lambda1", req.seed, sol.curve if req.include_curve else None)


def binom_interval(req: schemas.BinomRequest) -> schemas.IntervalResponse:
    data = binomial.BinomData(req.x, req.m, req.y, req.n)
    prior = binomial.DeltaPrior(req.a, req.b)
    cfg = binomial.BinomConfig(alpha=req.alpha, mc_count=req.mc_count)
    cal = binomial.BinomCalibration(binomial.BinomTable(data.m, data.n, prior, cfg), RandomStream(req.seed))
    sol = binomial.solve_pb_binom(data, cal)
    return _response(sol.interval, "delta", req.seed, sol.curve if req.include_curve else None)


def shot_rates(req: schemas.ShotRatesRequest) -> schemas.ShotRatesResponse:
    records = [ShotRecord(r.player, r.made, r.attempts) for r in req.records]
    res = shotrates.shotrates_pipeline(
        records,
        req.method,
        alpha=req.alpha,
        seed=req.seed,
        mc_count=req.mc_count,
        shape_s=req.shape_s,
        players=req.players,
    )
    seed = req.seed if req.method == "pb" else None
    out = []
    for e in res.estimates:
        rec = interval_record(e.interval, "rate", seed, player=e.player, made=e.made, attempts=e.attempts)
        rec["point"] = e.point
        out.append(schemas.PlayerInterval(**rec))
    return schemas.ShotRatesResponse(method=req.method, theta_hat=res.theta_hat, results=out)


def simulate(req: schemas.SimulationRequest) -> schemas.SimulationResponse:
    cfg = simulation.SimulationConfig.from_mapping(req.config)
    report = simulation.run_simulation(cfg)
    rows = [schemas.SimulationRow(**vars(r)) for r in report.rows]
    return schemas.SimulationResponse(flagged=report.flagged, config=report.config, rows=rows)


def fig1(req: schemas.Fig1Request) -> schemas.Fig1Response:
    rows = simulation.fig1_curves(req.n_values, req.tau, req.sigma, req.alpha)
    return schemas.Fig1Response(rows=[schemas.Fig1Row(**vars(r)) for r in rows])


def report_csv(resp: schemas.SimulationResponse) -> str:
    report = simulation.SimulationReport(
        [simulation.ReportRow(**r.model_dump()) for r in resp.rows], resp.config, resp.flagged
    )
    return report.to_csv()


def curve_csv(resp: schemas.IntervalResponse) -> str:
    if not resp.curve:
        raise ConfigurationError("response carries no plausibility curve")
    grid, values = np.array(resp.curve).T
    return PlausibilityCurve(grid, values).to_csv()
