"""Pydantic schemas for experiment configs and HTTP payloads."""

from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from btlbounds.core import settings
from btlbounds.models.models import (
    EstimatorKind,
    Norm,
    PriorHyperParams,
    Topology,
    TopologyKind,
)

ExperimentKind = Literal[
    "mse-vs-bounds",
    "topology-it",
    "topology-bcrb",
    "phase-transition",
    "ha-it",
    "ha-hcrb",
    "topology-sweep",
]


class TopologyConfig(BaseModel):
    kind: TopologyKind
    p: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    seed: Optional[int] = None

    def build(self, k: int) -> Topology:
        return Topology(kind=self.kind, k=k, p=self.p, seed=self.seed)


class ExperimentConfig(BaseModel):
    """One batch run, loaded from a JSON document; CLI flags override fields."""

    experiment: ExperimentKind = "mse-vs-bounds"
    k: int = Field(default=10, ge=2)
    k_list: Optional[list[int]] = None
    a: float = Field(default=5.0, gt=0.0)
    b: Union[float, Literal["ak-1"]] = "ak-1"
    n_grid: list[int] = Field(default_factory=lambda: [100, 316, 1000, 3162, 10000])
    topologies: list[TopologyConfig] = Field(
        default_factory=lambda: [TopologyConfig(kind=TopologyKind.COMPLETE)]
    )
    theta_grid: Optional[list[float]] = None
    alpha: float = Field(default=1.0, ge=0.0, le=1.0)
    normalized_p_grid: Optional[list[float]] = None
    seeds_per_point: int = Field(default=20, ge=1)
    norm: Norm = Norm.L2
    r: float = Field(default=2.0, ge=1.0)
    estimator_kind: EstimatorKind = EstimatorKind.POSTERIOR_MODE
    trials: int = Field(default_factory=lambda: settings.DEFAULT_TRIALS, ge=1)
    seed: int = Field(default_factory=lambda: settings.DEFAULT_SEED)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=1)
    out_path: Optional[str] = None

    @field_validator("n_grid")
    @classmethod
    def _ascending(cls, v: list[int]) -> list[int]:
        if not v:
            raise ValueError("n_grid must be nonempty")
        if any(n < 0 for n in v):
            raise ValueError("n_grid entries must be nonnegative")
        if any(x >= y for x, y in zip(v, v[1:])):
            raise ValueError("n_grid must be strictly ascending")
        return v

    @field_validator("theta_grid", "normalized_p_grid")
    @classmethod
    def _positive_grid(cls, v: Optional[list[float]]) -> Optional[list[float]]:
        if v is not None and (not v or any(x <= 0 for x in v)):
            raise ValueError("grids must be nonempty and strictly positive")
        return v

    @field_validator("b")
    @classmethod
    def _positive_rate(cls, v):
        if v != "ak-1" and not v > 0:
            raise ValueError("b must be positive or 'ak-1'")
        return v

    @model_validator(mode="after")
    def _topologies_present(self):
        if not self.topologies:
            raise ValueError("at least one topology is required")
        return self

    def rate(self, k: Optional[int] = None) -> float:
        k = k or self.k
        return self.a * k - 1.0 if self.b == "ak-1" else float(self.b)

    def prior(self, k: Optional[int] = None) -> PriorHyperParams:
        k = k or self.k
        return PriorHyperParams.uniform(k, self.a, self.rate(k))

    @property
    def ks(self) -> list[int]:
        return self.k_list or [self.k]


# --- HTTP payloads ---


class PriorPayload(BaseModel):
    a: list[float]
    b: list[float]

    def build(self) -> PriorHyperParams:
        return PriorHyperParams(a=self.a, b=self.b)


class BoundRequest(BaseModel):
    budget: list[list[int]]
    prior: PriorPayload
    norm: Norm = Norm.L2
    r: float = Field(default=2.0, ge=1.0)


class HomeBoundRequest(BaseModel):
    home_budget: list[list[int]]
    prior: PriorPayload
    theta: float = Field(gt=0.0)
    norm: Norm = Norm.L2
    r: float = Field(default=2.0, ge=1.0)


class EmFitRequest(BaseModel):
    budget: list[list[int]]
    outcome: list[list[int]]
    prior: PriorPayload
    estimator_kind: EstimatorKind = EstimatorKind.POSTERIOR_MODE
    max_iters: Optional[int] = Field(default=None, ge=1)
    rel_change_tol: Optional[float] = Field(default=None, gt=0.0)


class BoundResponse(BaseModel):
    value: float
    log_value: float


class HcrbResponse(BaseModel):
    total: float
    skills: float
    theta: float


class EmFitResponse(BaseModel):
    skills: list[float]
    converged: bool
    iterations_used: int
    log_posterior: Optional[float] = None
