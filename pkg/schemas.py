# bpire/schemas.py
import math
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from settings import TABLE_NORMALIZATION_TOL

Status = Literal["PASS", "FAIL", "FLAG"]
Method = Literal["exact", "direct-mc", "tilted-mc", "synthetic"]
Provenance = Literal["recurrence", "empirical", "closed-form"]


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Law Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class _Law(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)


class LinearFractional(_Law):
    """1 - F(s) = m(1-s) / (1 + b(1-s)); mass at zero 1 - m/(1+b)."""

    type: Literal["lf"] = "lf"
    m: float = Field(..., gt=0, allow_inf_nan=False)
    b: float = Field(0.0, ge=0, allow_inf_nan=False)

    @model_validator(mode="after")
    def _mass_at_zero(self):
        if self.m > (1.0 + self.b) * (1.0 + 1e-15):
            raise ValueError(f"linear-fractional law needs m <= 1 + b, got m={self.m}, b={self.b}")
        return self


class Poisson(_Law):
    type: Literal["poisson"] = "poisson"
    lam: float = Field(..., gt=0, alias="lambda", allow_inf_nan=False)


class Geometric(_Law):
    """P(j) = (1 - q) q^j on j >= 0."""

    type: Literal["geometric"] = "geometric"
    q: float = Field(..., gt=0, lt=1)


class Table(_Law):
    type: Literal["table"] = "table"
    p: Tuple[float, ...] = Field(..., min_length=1)

    @field_validator("p")
    @classmethod
    def _normalize(cls, p: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not math.isfinite(v) or v < 0 for v in p):
            raise ValueError("table probabilities must be finite and non-negative")
        total = math.fsum(p)
        if abs(total - 1.0) > TABLE_NORMALIZATION_TOL:
            raise ValueError(f"table probabilities sum to {total!r}, not 1")
        return tuple(v / total for v in p)


PgfLaw = Annotated[Union[LinearFractional, Poisson, Geometric, Table], Field(discriminator="type")]


class LfRep(BaseModel):
    """A composed linear-fractional map, 1 - F(s) = m(1-s) / (1 + b(1-s))."""

    model_config = ConfigDict(frozen=True)

    m: float = Field(..., gt=0)
    b: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _in_unit_interval(self):
        if self.m > (1.0 + self.b) * (1.0 + 1e-12):
            raise ValueError(f"representation maps outside [0,1]: m={self.m}, b={self.b}")
        return self


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Environment Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class EnvState(BaseModel):
    model_config = ConfigDict(frozen=True)

    offspring: PgfLaw
    immigration: PgfLaw
    x: float = Field(..., allow_inf_nan=False)


class EnvModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    states: Tuple[EnvState, ...] = Field(..., min_length=1)
    probabilities: Tuple[float, ...]
    label: str = ""

    @field_validator("probabilities")
    @classmethod
    def _normalize(cls, probabilities: Tuple[float, ...]) -> Tuple[float, ...]:
        if any(not math.isfinite(p) or p <= 0 for p in probabilities):
            raise ValueError("state probabilities must be positive")
        total = math.fsum(probabilities)
        if abs(total - 1.0) > TABLE_NORMALIZATION_TOL:
            raise ValueError(f"state probabilities sum to {total!r}, not 1")
        return tuple(p / total for p in probabilities)

    @model_validator(mode="after")
    def _one_probability_per_state(self):
        if len(self.states) != len(self.probabilities):
            raise ValueError("one probability per state is required")
        return self


class EnvStateSpec(BaseModel):
    offspring: PgfLaw
    immigration: PgfLaw
    prob: float = Field(..., gt=0)


class EnvSpec(BaseModel):
    states: List[EnvStateSpec] = Field(..., min_length=1)
    label: str = ""


class BuiltinEnvSpec(BaseModel):
    builtin: str


class LatticeCheck(BaseModel):
    status: Status
    span: Optional[float] = None


class HypothesisReport(BaseModel):
    a: int
    lattice: LatticeCheck
    a3_log_moment: float
    a3_power_moment: Optional[float] = None
    a3_status: Status
    a4_value: Optional[float] = None
    a4_status: Status


class Regime(BaseModel):
    kind: Literal["strongly", "intermediate", "weakly"]
    beta: Optional[float] = None
    delta: float
    gamma: float
    mean_x: float
    flags: HypothesisReport


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Kernel Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class Estimate(BaseModel):
    value: float
    se: float = 0.0


class KernelEntry(BaseModel):
    n: int
    value: float
    se: float = 0.0
    method: Method


class KernelSeries(BaseModel):
    H: List[KernelEntry]
    Hstar: List[KernelEntry]
    tail_const: float = Field(..., ge=0)
    tail_const_star: float = Field(..., ge=0)
    gamma: float = Field(..., gt=0)
    delta: float

    @property
    def n_max(self) -> int:
        return len(self.H) - 1


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Tail Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class SurvivalPoint(BaseModel):
    n: int
    value: float
    half_width: float = 0.0
    provenance: Provenance


class SurvivalCurve(BaseModel):
    points: List[SurvivalPoint]


class RootCertificate(BaseModel):
    # the geometric remainder is unbounded at 1/gamma
    model_config = ConfigDict(ser_json_inf_nan="constants")

    case: Literal["case1", "case2", "case3-boundary"]
    r: Optional[float] = None
    bracket: Optional[Tuple[float, float]] = None
    T1: Tuple[float, float]
    bound: float
    converged: bool = True
    required_n: Optional[int] = None
    certified: bool = True
    tail_model: Literal["geometric", "asymptotic"] = "geometric"


class FitResult(BaseModel):
    model: Literal["pure-exponential", "exponential-times-power"]
    rate: float
    power: float
    prefactor: float
    window: Tuple[int, int]
    residual_rms: float


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Simulation Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class LifePeriodSample(BaseModel):
    zeta: int = Field(..., ge=1)
    censored: bool = False
    peak_population: int
    environment_seed: str


class WalkSample(BaseModel):
    path: List[float]
    L_n: float
    M_n: float
    tau_n: int


class WalkStats(BaseModel):
    n: int
    samples: int
    tilted: bool
    theta: float
    mean_S: Estimate
    mean_L: Estimate
    mean_M: Estimate
    mean_tau: Estimate
    p_max_negative: Estimate
    p_min_nonnegative: Estimate
    exp_max_negative: Estimate
    exp_min_nonnegative: Estimate
    tau_histogram: List[int]


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Harmonic Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class RenewalEstimate(BaseModel):
    which: Literal["U", "V"]
    x: float
    value: float = Field(..., ge=1)
    se: float = 0.0
    horizon: int
    cap_hits: float = 0.0
    bias_bound: float = 0.0


class HarmonicResidual(BaseModel):
    which: Literal["U", "V"]
    x: float
    residual: float
    se: float
    cap_hits: float = 0.0
    bias_bound: float = 0.0


#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-
#       Experiment Schemas
#-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-*-

class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    env: Union[BuiltinEnvSpec, EnvSpec]
    command: Literal["classify", "kernel", "tail", "simulate", "verify", "report"] = "classify"
    n_max: int = Field(12, ge=0, le=2000)
    horizon: Optional[int] = Field(None, ge=1, le=2000)
    samples: int = Field(100_000, ge=100, le=10**8)
    seed: Optional[int] = Field(None, ge=0)
    workers: Optional[int] = Field(None, ge=1, le=256)
    cap: int = Field(10_000, ge=1, le=10**7)
    window: Optional[Tuple[int, int]] = None
    kernel_method: Literal["exact", "tilted-mc", "direct-mc", "hybrid"] = "exact"
    tail_model: Literal["geometric", "asymptotic"] = "geometric"
    fit_model: Literal["pure-exponential", "exponential-times-power"] = "pure-exponential"
    profile: Literal["quick", "full"] = "quick"

    @model_validator(mode="after")
    def _check_window(self):
        if self.window is not None and not 1 <= self.window[0] < self.window[1]:
            raise ValueError("window must satisfy 1 <= lo < hi")
        return self


class ArtifactMeta(BaseModel):
    config_hash: str
    seed: int
    workers: int
    versions: Dict[str, str]


class CheckResult(BaseModel):
    name: str
    passed: bool
    details: Dict[str, Any] = {}


class VerifyReport(BaseModel):
    profile: str
    passed: bool
    checks: List[CheckResult]


class Summary(BaseModel):
    label: str
    regime: Optional[Regime] = None
    root: Optional[RootCertificate] = None
    fit: Optional[FitResult] = None
    verdict: str
    artifacts: List[str]
