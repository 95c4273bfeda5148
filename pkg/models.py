import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class Metric(str, Enum):
    """Every score the toolkit reports. Lower is better for all of them."""
    P_LPIPS = "P-LPIPS"
    P_DISTS = "P-DISTS"
    P_TEMPDRIFT = "P-TempDrift"
    P_DYN_LPIPS = "P-Dyn-LPIPS"
    R_GHOST = "R-Ghost"
    R_SEAM = "R-Seam"
    E_TEMP = "E-Temp"
    E_SEAM = "E-Seam"
    E_COPY = "E-Copy"
    CAM_ROT_ERR = "Cam-RotErr"
    CAM_TRANS_ERR = "Cam-TransErr"
    OBJMC = "ObjMC"


REGION_METRICS = [
    Metric.P_LPIPS, Metric.P_DISTS, Metric.P_TEMPDRIFT, Metric.P_DYN_LPIPS,
    Metric.R_GHOST, Metric.R_SEAM,
    Metric.E_TEMP, Metric.E_SEAM, Metric.E_COPY,
]
CONTROL_METRICS = [Metric.CAM_ROT_ERR, Metric.CAM_TRANS_ERR, Metric.OBJMC]
ALL_METRICS = REGION_METRICS + CONTROL_METRICS


class Role(str, Enum):
    """Region roles of a target pixel."""
    PRESERVE = "preserve"
    REVEAL = "reveal"
    EXPAND = "expand"
    DYNAMIC = "dynamic"  # dynamic-preserve, a subset of preserve


class Category(str, Enum):
    """Editing case categories."""
    CAMERA_ONLY = "camera-only"
    CAMERA_OBJECT = "camera+object"


class ProxyKind(str, Enum):
    """Synthetic proxy-case constructions."""
    RECONSTRUCT = "reconstruct"
    REVEAL_WITHHOLD = "reveal_withhold"
    EXPAND_CROP = "expand_crop"

    @classmethod
    def parse(cls, value: str) -> "ProxyKind":
        aliases = {"reveal": cls.REVEAL_WITHHOLD, "expand": cls.EXPAND_CROP}
        value = value.lower()
        if value in aliases:
            return aliases[value]
        return cls(value)


# ========== Configuration ==========

class EvalConfig(BaseModel):
    """Every constant the metric and geometry equations reference.

    All fields are optional in a config file; defaults follow the toolkit's
    documented choices (sigma from the benchmark definition, the rest chosen
    here because the benchmark leaves them open).
    """
    sigma: float = 0.18
    boundary_radius: int = 5
    neutral_color: Tuple[float, float, float] = (0.5, 0.5, 0.5)

    # Geometry
    tau: float = 0.05
    lambda_view: float = 0.5
    window: int = 8
    alpha: float = 0.2
    gamma: float = 2.0
    window_size: int = 5
    depth_tolerance: float = 0.01  # fraction of the scene depth range
    extent_inflation: float = 0.05
    blend_top_k: int = 1

    # Control
    lambda_objmc: float = 10.0

    # Backends
    perceptual_backend: str = "reference-perceptual"
    structure_backend: str = "reference-dists"

    workers: int = 1
    seed: int = 0

    @field_validator("sigma", "tau", "gamma", "lambda_objmc", "depth_tolerance")
    @classmethod
    def _strictly_positive(cls, value: float) -> float:
        if not (value > 0 and math.isfinite(value)):
            raise ValueError("must be strictly positive")
        return value

    @field_validator("window", "window_size", "blend_top_k", "workers")
    @classmethod
    def _positive_int(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be >= 1")
        return value

    @field_validator("boundary_radius")
    @classmethod
    def _radius(cls, value: int) -> int:
        if value < 1:
            raise ValueError("boundary radius must be >= 1")
        return value

    @field_validator("lambda_view", "extent_inflation")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("must be >= 0")
        return value

    @field_validator("alpha")
    @classmethod
    def _unit_interval(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        return value

    @field_validator("neutral_color")
    @classmethod
    def _color(cls, value: Tuple[float, float, float]) -> Tuple[float, float, float]:
        if any(not 0.0 <= c <= 1.0 for c in value):
            raise ValueError("neutral color channels must lie in [0, 1]")
        return value

    def echo(self) -> dict:
        """Config as written into reports. Worker count is left out so output
        does not depend on how the corpus was scheduled."""
        return self.model_dump(mode="json", exclude={"workers"})


class CaseMeta(BaseModel):
    """Contents of a case's meta.json."""
    case_id: str
    category: Category = Category.CAMERA_ONLY
    fps: float = 16.0
    kind: Optional[str] = None
    seed: Optional[int] = None


# ========== Reports ==========

def empty_values(metrics: List[Metric]) -> Dict[str, Optional[float]]:
    return {m.value: None for m in metrics}


class MetricReport(BaseModel):
    """Per-case scores. A metric with no valid frame stays None (absent)."""
    values: Dict[str, Optional[float]] = Field(default_factory=lambda: empty_values(ALL_METRICS))
    traces: Dict[str, List[Optional[float]]] = Field(default_factory=dict)

    def present(self) -> Dict[str, float]:
        return {k: v for k, v in self.values.items() if v is not None}


class CaseResult(BaseModel):
    """One case in a corpus report."""
    case_id: str
    category: Optional[Category] = None
    status: str = "ok"  # "ok" or "error"
    error: Optional[str] = None
    report: MetricReport = Field(default_factory=MetricReport)


class CorpusReport(BaseModel):
    """Per-case reports plus aggregates over the cases where each metric is present."""
    cases: List[CaseResult] = Field(default_factory=list)
    aggregates: Dict[str, Optional[float]] = Field(default_factory=lambda: empty_values(ALL_METRICS))
    counts: Dict[str, int] = Field(default_factory=lambda: {m.value: 0 for m in ALL_METRICS})
    category_aggregates: Dict[str, Dict[str, Optional[float]]] = Field(
        default_factory=lambda: {c.value: empty_values(ALL_METRICS) for c in Category}
    )
    category_counts: Dict[str, Dict[str, int]] = Field(
        default_factory=lambda: {c.value: {m.value: 0 for m in ALL_METRICS} for c in Category}
    )
    config: dict = Field(default_factory=dict)
    backends: Dict[str, str] = Field(default_factory=dict)
    seed: int = 0

    @property
    def failed(self) -> List[CaseResult]:
        return [c for c in self.cases if c.status != "ok"]


# ========== Metric validation ==========

class ComparisonPair(BaseModel):
    """One human two-alternative comparison for one diagnostic metric."""
    pair_id: str
    metric: str
    m_a: float
    m_b: float
    votes_a: int = Field(ge=0)
    votes_b: int = Field(ge=0)

    @model_validator(mode="after")
    def _check(self) -> "ComparisonPair":
        if self.votes_a + self.votes_b < 1:
            raise ValueError("a pair needs at least one vote")
        if not (math.isfinite(self.m_a) and math.isfinite(self.m_b)):
            raise ValueError("metric values must be finite")
        return self


class ValidationRow(BaseModel):
    """Agreement and margin correlation for one metric."""
    metric: str
    pairs: int
    ties: int = 0
    agreement: Optional[float] = None
    spearman: Optional[float] = None


class ValidationSummary(BaseModel):
    rows: List[ValidationRow] = Field(default_factory=list)
    average: ValidationRow


# ========== API Request/Response Models ==========

class EvaluateRequest(BaseModel):
    """Request body for the evaluate endpoint."""
    case_paths: List[str]
    config: EvalConfig = Field(default_factory=EvalConfig)


class CheckCaseRequest(BaseModel):
    path: str


class CheckCaseResponse(BaseModel):
    case_id: str
    frames: int
    width: int
    height: int
    has_trajectories: bool
    message: str


class ValidateRequest(BaseModel):
    """Request body for the validate endpoint."""
    pairs: List[ComparisonPair]
    top_gap_fraction: Optional[float] = Field(default=None, gt=0, le=1)


class MetricInfo(BaseModel):
    name: str
    family: str
    lower_is_better: bool = True


class MetricListResponse(BaseModel):
    metrics: List[MetricInfo]
    count: int
