"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, Field

ModelName = Literal["smm", "fm_naive", "fm", "mm", "cluster"]


class HealthResponse(BaseModel):
    status: str
    version: str


class RequiredClustersRequest(BaseModel):
    theta: float
    power: float = 0.85
    alpha: float = 0.05
    m: int = 40
    icc: float
    sigma_w2: float = 2.25


class RequiredClustersResponse(BaseModel):
    n_per_arm: float
    total_raw: int
    total_even: int


class VariancePartitionRequest(BaseModel):
    icc: float
    f: float = 0.5
    sigma_w2: float = 2.25


class VariancePartitionResponse(BaseModel):
    sigma_w2: float
    sigma_b2: float
    tau2: float
    icc: float


class DesignEffectRequest(BaseModel):
    m: int
    icc: float


class DesignEffectResponse(BaseModel):
    deff: float


class ScenarioModel(BaseModel):
    label: str
    icc: float
    f: float
    sigma_w2: float
    phi: float
    kernel: dict
    grid: list
    m: int
    theta: float
    gamma: float
    delta: float
    randomization: str
    seed: int


class SimulateRequest(BaseModel):
    scenario: str | dict = "A"
    theta: Optional[float] = None
    seed: int = 0
    include_latent: bool = False


class SimulateResponse(BaseModel):
    scenario: str
    theta: float
    seed: int
    n: int
    n_clusters: int
    csv: str


class FitRequest(BaseModel):
    scenario: str | dict = "A"
    theta: Optional[float] = None
    seed: int = 0
    models: list[ModelName] = Field(default_factory=lambda: ["smm"])
    delta: float = 0.0
    threshold: float = 0.95


class MixtureComponent(BaseModel):
    weight: float
    mean: float
    sd: float


class ModelFit(BaseModel):
    model: ModelName
    post_mean: float
    post_sd: float
    prob_exceeds: float
    ci_lo: float
    ci_hi: float
    rejected: bool
    hyper_mode: dict[str, float]
    n_grid_points: int
    mode_loglik: float
    components: list[MixtureComponent]


class FitResponse(BaseModel):
    scenario: str
    theta: float
    seed: int
    fits: list[ModelFit]


class StudyConfigModel(BaseModel):
    scenarios: list[Any] = Field(default_factory=lambda: ["A"])
    theta_grid: list[float] = Field(default_factory=lambda: [0.0, 0.6])
    models: list[ModelName] = Field(
        default_factory=lambda: ["smm", "fm_naive", "fm", "mm", "cluster"])
    reps: int = 100
    seed: int = 0
    threshold: float = 0.95
    delta: float = 0.0
    modse_aggregator: Literal["mean", "median"] = "mean"
    priors: Optional[dict[str, dict]] = None
    schema_version: int = 1


class StudyRunRequest(BaseModel):
    config: StudyConfigModel
    out_dir: str
    threads: Optional[int] = None
    resume: bool = True


class SummaryModel(BaseModel):
    scenario: str
    theta_true: float
    model: ModelName
    n_reps: int
    rejection_rate: float
    mod_se: float
    emp_se: float
    pct_re: float
    bias: float
    mse: float
    coverage: float
    mc_se_rejection: float
    n_failed: int
    flagged: bool


class StudyRunResponse(BaseModel):
    out_dir: str
    n_rows: int
    summaries: list[SummaryModel]


class JobSubmitResponse(BaseModel):
    job_id: str


class JobStatusResponse(BaseModel):
    job_id: str
    status: Literal["queued", "running", "done", "failed"]
    done_replicates: int
    total_replicates: int
    error: Optional[str] = None
    out_dir: str


class SummarizeRequest(BaseModel):
    replicates_csv: str
    modse_aggregator: Literal["mean", "median"] = "mean"


class SummarizeResponse(BaseModel):
    summaries: list[SummaryModel]


class PlotDataRequest(BaseModel):
    summaries: list[SummaryModel]
    kind: Literal["power", "fpr", "pct_re", "bias", "mse", "coverage"]


class PlotDataResponse(BaseModel):
    csv: str
