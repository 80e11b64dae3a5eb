"""Request/response models of the experiment service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ProfileModel(BaseModel):
    n_blocks: int
    units_per_block: int
    unit_size: int


class CertificateModel(BaseModel):
    name: str
    passed: bool
    conditions: dict[str, bool]
    residuals: dict[str, float]


class ClassifyRequest(BaseModel):
    codes: list[str] = Field(min_length=1)
    nr: int | None = None
    draws: int = 16
    tol: float = 1e-8
    seed: int = 0


class ClassificationModel(BaseModel):
    code: str
    T: int
    Nt: int
    L: int
    Nr: int
    structured: bool
    profile: ProfileModel | None
    mask: list[list[int]]
    certificates: list[CertificateModel]


class ClassifyResponse(BaseModel):
    results: list[ClassificationModel]


class ExperimentRequest(BaseModel):
    """Common experiment axes; single-point fields accept scalars."""

    code: str
    nr: int | None = None
    mod: int = 4
    decoder: str = "simp"
    mc: list[int] = [16]
    snr_db: list[float] = [10.0]
    trials: int = 100_000
    seed: int = 0
    max_errors: int | None = 200
    noiseless: bool = False


class RecordModel(BaseModel):
    code: str
    snr_db: float
    mc: int
    trials: int
    bit_errors: int
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    avg_metric_evals: float
    decoder: str
    seed: int
    elapsed_s: float = 0.0
    mceq_mean: list[float] | None = None


class BerSweepRequest(ExperimentRequest):
    points: list[tuple[float, int]] | None = None


class BerSweepResponse(BaseModel):
    records: list[RecordModel]


class DecodeRequest(ExperimentRequest):
    pass


class DecodeResponse(BaseModel):
    code: str
    decoder: str
    snr_db: float
    mc: int
    sent_indices: list[int]
    decided_indices: list[int]
    bit_errors: int
    metric: float | None = None
    metric_evals: float
    metric_evals_raw: float | None = None
    mceq_per_stage: list[int] | None = None
    survivors_per_stage: list[int] | None = None


class McEqStatsRow(BaseModel):
    snr_db: float
    mc: int
    trials: int
    mceq_mean: list[float]
    mceq_over_mc: list[float]
    avg_metric_evals: float


class McEqStatsResponse(BaseModel):
    code: str
    profile: tuple[int, int, int]
    unit_size: int
    stages_per_block: int
    rows: list[McEqStatsRow]


class ComplexityRow(BaseModel):
    snr_db: float
    mc: int
    trials: int
    traditional_formula: float
    traditional_measured: float
    simplified_measured: float
    ratio: float
    reduction_bound: float


class ComplexityResponse(BaseModel):
    code: str
    rows: list[ComplexityRow]


class BerVsComplexityRequest(ExperimentRequest):
    saturation_factor: float = 1.05


class SaturationSeries(BaseModel):
    points: list[RecordModel]
    saturation_mc: int | None
    floor_ber: float


class BerVsComplexityResponse(BaseModel):
    code: str
    decoder: str
    series: dict[str, SaturationSeries]


class SearchCoeffsRequest(BaseModel):
    thetas: list[float] | None = None
    start: float = 0.0
    stop: float = 1.5707963267948966
    step: float = 0.1
    mod: int = 2
    classify: bool = True
    max_vectors: int = 1 << 25
    seed: int = 0


class SearchPointModel(BaseModel):
    theta: float
    min_det: float
    profile: tuple[int, int, int] | None


class SearchCoeffsResponse(BaseModel):
    points: list[SearchPointModel]
    best_theta: float
    best_min_det: float


class CodeInfo(BaseModel):
    name: str
    T: int
    Nt: int
    L: int
    rate: float


class CodesResponse(BaseModel):
    names: list[str]
    details: list[CodeInfo]
