"""Pydantic request/response models of the beamforming service."""

from typing import List, Literal, Optional, Union

from pydantic import BaseModel, Field

Scalar = Union[int, float]


class NtSpec(BaseModel):
    kind: Literal["fixed", "per_bs", "mixed", "random"] = "fixed"
    value: Optional[int] = None
    values: Optional[List[int]] = None
    low: Optional[int] = None
    high: Optional[int] = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.model_dump().items() if v is not None}


class GenRequest(BaseModel):
    out_path: str
    scenario: Literal["ic", "coop"] = "ic"
    count: int = Field(100, ge=1)
    n_links: Optional[int] = Field(None, ge=1)
    n_tx: Optional[int] = Field(None, ge=1)
    n_rx: Optional[int] = Field(None, ge=1)
    nt: Union[int, List[int], NtSpec] = 8
    d_km: Union[float, List[float]] = 1.0
    seed: int = Field(0, ge=0)
    weighted: bool = False
    label_solver: Optional[Literal["wmmse", "pgp", "oracle"]] = None
    label_iterations: int = Field(200, ge=1)
    power_dbm: float = 38.0
    noise_dbm_per_hz: float = -174.0
    bandwidth_hz: float = 10e6
    array_normalized: bool = False
    jobs: int = Field(1, ge=1)


class GenResponse(BaseModel):
    path: str
    count: int
    scenario: str
    n_links: Optional[int] = None
    n_tx: Optional[int] = None
    n_rx: Optional[int] = None
    nt: dict
    d_km: Union[float, List[float]]
    labeled: bool


class SolveRequest(BaseModel):
    dataset: str
    solver: Literal["pgp", "iccd", "wmmse", "oracle", "rnn-pgp"]
    iterations: int = Field(200, ge=1)
    model_path: Optional[str] = None
    step_rule: Union[Literal["backtracking"], float] = "backtracking"
    restarts: int = Field(8, ge=1)
    keep_trace: bool = False
    jobs: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    out_csv: Optional[str] = None
    trace_csv: Optional[str] = None
    baseline: Optional[Literal["wmmse", "pgp"]] = None
    baseline_iterations: int = Field(200, ge=1)


class MetricsRow(BaseModel):
    scheme: str
    instances: int
    mean_wsr: float
    mean_runtime_s: float
    median_runtime_s: float
    accuracy_pct: Optional[float] = None
    baseline: Optional[str] = None
    baseline_mean_wsr: Optional[float] = None


class SolveResponse(BaseModel):
    summary: MetricsRow
    out_csv: Optional[str] = None
    trace_csv: Optional[str] = None
    timing_parallel: bool = False


class RnnSettings(BaseModel):
    iterations: int = Field(10, ge=1)
    neighbors: int = Field(6, ge=0)
    eta: float = Field(5.0, gt=0)
    hidden_sizes: List[int] = [32, 21, 15]
    step_size_only: bool = False
    n_rx: Optional[int] = None


class TrainSettings(BaseModel):
    gamma: float = Field(0.95, ge=0.0, le=1.0)
    stage1_epochs: int = Field(50, ge=0)
    stage2_epochs: int = Field(20, ge=0)
    batch_size: int = Field(32, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    seed: int = Field(0, ge=0)


class TrainRequest(BaseModel):
    dataset: str
    out_model: str
    scenario: Literal["ic", "coop"] = "ic"
    rnn: RnnSettings = RnnSettings()
    train: TrainSettings = TrainSettings()
    val_dataset: Optional[str] = None
    val_count: Optional[int] = None
    curve_csv: Optional[str] = None


class TrainResponse(BaseModel):
    model_path: str
    wall_clock_s: float
    batches: int
    final_val_accuracy_pct: Optional[float] = None
    curve_csv: Optional[str] = None
    unsupervised_only: bool


class EvalRequest(BaseModel):
    model_path: str
    dataset: str
    baseline_iterations: int = Field(200, ge=1)
    jobs: int = Field(1, ge=1)
    out_csv: Optional[str] = None


class EvalResponse(BaseModel):
    summary: MetricsRow
    out_csv: Optional[str] = None


class SweepRequest(BaseModel):
    axis: Literal["nt", "k", "d", "train_size"]
    values: List[Scalar]
    workdir: str
    model_path: Optional[str] = None
    gen: Optional[GenRequest] = None
    train: Optional[TrainRequest] = None
    test_count: int = Field(200, ge=1)
    baseline_iterations: int = Field(200, ge=1)
    jobs: int = Field(1, ge=1)
    seed: int = Field(0, ge=0)
    out_csv: Optional[str] = None


class SweepRow(BaseModel):
    axis: str
    value: Scalar
    scheme: str
    mean_wsr: float
    accuracy_pct: float
    mean_runtime_s: float


class SweepResponse(BaseModel):
    rows: List[SweepRow]
    out_csv: Optional[str] = None


class ComplexPair(BaseModel):
    re: float
    im: float


class BeamformRequest(BaseModel):
    """Online solve of one inline instance (channels as [re, im] pairs)."""

    chan: List[List[List[List[float]]]]       # K x K x nt_j x 2
    alpha: Optional[List[float]] = None
    sigma2: List[float]
    power: List[float]
    solver: Literal["pgp", "iccd", "wmmse", "rnn-pgp"] = "wmmse"
    iterations: int = Field(100, ge=1)
    model_path: Optional[str] = None


class BeamformResponse(BaseModel):
    beamformers: List[List[List[float]]]      # K x nt_k x 2, antenna space
    rates_bits: List[float]
    wsr_bits: float
    runtime_s: float


class HealthResponse(BaseModel):
    status: str
    version: str
