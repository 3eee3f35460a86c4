"""HTTP front end. Run with ``uvicorn partialbayes.service.app:app``."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigurationError, DataError, DomainError, NumericError
from . import handlers, schemas

app = FastAPI(title="partialbayes", version=__version__)


def _error(status: int, kind: str):
    async def handler(request: Request, exc: Exception):
        return JSONResponse(status_code=status, content={"kind": kind, "detail": str(exc)})

    return handler


app.add_exception_handler(ConfigurationError, _error(400, "usage"))
app.add_exception_handler(DomainError, _error(400, "usage"))
app.add_exception_handler(DataError, _error(422, "data"))
app.add_exception_handler(NumericError, _error(500, "numeric"))


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/normal/known-tau", response_model=schemas.IntervalResponse)
def normal_known(req: schemas.NormalKnownRequest):
    return handlers.normal_known(req)


@app.post("/normal/unknown-tau", response_model=schemas.IntervalResponse)
def normal_unknown(req: schemas.NormalUnknownRequest):
    return handlers.normal_unknown(req)


@app.post("/poisson", response_model=schemas.IntervalResponse)
def poisson_interval(req: schemas.PoissonRequest):
    return handlers.poisson_interval(req)


@app.post("/binom-diff", response_model=schemas.IntervalResponse)
def binom_interval(req: schemas.BinomRequest):
    return handlers.binom_interval(req)


@app.post("/shotrates", response_model=schemas.ShotRatesResponse)
def shot_rates(req: schemas.ShotRatesRequest):
    return handlers.shot_rates(req)


@app.post("/simulate", response_model=schemas.SimulationResponse)
def simulate(req: schemas.SimulationRequest):
    return handlers.simulate(req)


@app.post("/fig1", response_model=schemas.Fig1Response)
def fig1(req: schemas.Fig1Request):
    return handlers.fig1(req)
