"""Request and response models shared by the HTTP service and the command line."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class _Request(BaseModel):
    model_config = ConfigDict(extra="forbid")


class IntervalResponse(BaseModel):
    method: str
    parameter: str
    point: Optional[float] = None
    lower: float
    upper: float
    level: float
    seed: Optional[int] = None
    diagnostics: dict = Field(default_factory=dict)
    curve: Optional[list[tuple[float, float]]] = None


class NormalKnownRequest(_Request):
    observations: list[float]
    tau: float = Field(gt=0)
    sigma: float = Field(default=1.0, gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    method: Literal["pb", "eb"] = "pb"
    include_curve: bool = False


class NormalUnknownRequest(_Request):
    observations: list[float]
    sigma: float = Field(default=1.0, gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    tempering_gamma: float = Field(default=1.0 / 3.0, gt=0, lt=0.5)
    method: Literal["pb", "eb"] = "pb"
    include_curve: bool = False


class PoissonRequest(_Request):
    counts: list[int]
    exposures: Optional[list[float]] = None
    shape_s: float = Field(gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    mc_count: int = Field(default=5000, ge=1)
    lambda_grid_size: int = Field(default=201, ge=3)
    seed: Optional[int] = Field(default=None, ge=0)
    index: int = Field(default=0, ge=0, description="zero-based record of interest")
    method: Literal["pb", "classical", "eb-gamma"] = "pb"
    include_curve: bool = False


class BinomRequest(_Request):
    x: int = Field(ge=0)
    m: int = Field(ge=1)
    y: int = Field(ge=0)
    n: int = Field(ge=1)
    a: float = Field(gt=0)
    b: float = Field(gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)
    mc_count: int = Field(default=2000, ge=1)
    seed: int = Field(ge=0)
    include_curve: bool = False


class ShotRecordModel(BaseModel):
    player: str
    made: int = Field(ge=0)
    attempts: int = Field(gt=0)


class ShotRatesRequest(_Request):
    records: list[ShotRecordModel]
    method: Literal["classical", "eb", "pb"]
    alpha: float = Field(default=0.05, gt=0, lt=1)
    seed: Optional[int] = Field(default=None, ge=0)
    mc_count: int = Field(default=1000, ge=1)
    shape_s: float = Field(default=1.0, gt=0)
    players: Optional[list[str]] = None


class PlayerInterval(IntervalResponse):
    player: str
    made: int
    attempts: int


class ShotRatesResponse(BaseModel):
    method: str
    theta_hat: Optional[float] = None
    results: list[PlayerInterval]


class SimulationRequest(_Request):
    config: dict


class SimulationRow(BaseModel):
    model: str
    n: int
    method: str
    coverage: float
    mean_width: float
    mc_se: float
    reps: int
    failures: int


class SimulationResponse(BaseModel):
    flagged: bool
    config: dict
    rows: list[SimulationRow]


class Fig1Request(_Request):
    n_values: list[int] = Field(min_length=1)
    tau: float = Field(default=1.0, gt=0)
    sigma: float = Field(default=1.0, gt=0)
    alpha: float = Field(default=0.05, gt=0, lt=1)


class Fig1Row(BaseModel):
    n: int
    eb_coverage: float
    pb_coverage: float


class Fig1Response(BaseModel):
    rows: list[Fig1Row]


class ErrorResponse(BaseModel):
    kind: Literal["usage", "data", "numeric"]
    detail: str
