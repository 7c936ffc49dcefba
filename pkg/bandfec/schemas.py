"""Pydantic schemas for records that leave the process (CSV, JSON, HTTP)"""

from enum import Enum
from fractions import Fraction
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class CodeFamily(str, Enum):
    BAND = "band"
    STAIRCASE = "staircase"
    WINDOWED = "windowed"


class DecoderKind(str, Enum):
    ITERATIVE = "iterative"
    ML = "ml"
    HYBRID = "hybrid"

    @classmethod
    def parse(cls, value: str) -> "DecoderKind":
        """Accept the short CLI spelling 'it' as well as the full names"""
        if value == "it":
            return cls.ITERATIVE
        return cls(value)


class Schedule(str, Enum):
    ROUND_ROBIN = "round-robin"
    RANDOM = "random"


def parse_rate(value: str) -> Fraction:
    """Parse a code rate written as 'p/q' or a decimal"""
    try:
        rate = Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"Invalid code rate: {value!r}")
    if not Fraction(1, 8) <= rate < 1:
        raise ValueError(f"Code rate must lie in [1/8, 1), got {value}")
    return rate


# ==================== Code parameters ====================

class CodeParams(BaseModel):
    """Parameters from which a code of any family is built"""

    family: CodeFamily = CodeFamily.BAND
    k: int = Field(..., ge=2)
    rate: str = "1/2"
    B: Optional[int] = Field(None, ge=2, description="Band width (band family)")
    u: Optional[str] = Field(None, description="u(x) as an exponent list, e.g. '0,3,10'")
    n1: int = Field(5, ge=3, description="Source-node degree (staircase family)")
    schedule: Schedule = Schedule.ROUND_ROBIN
    seed: int = Field(0, ge=0)
    log_base: str = Field("e", pattern="^(e|2|10)$")

    @field_validator("rate")
    @classmethod
    def validate_rate(cls, value: str) -> str:
        parse_rate(value)
        return value

    @model_validator(mode="after")
    def validate_family_fields(self) -> "CodeParams":
        if self.family == CodeFamily.BAND:
            if self.B is None:
                raise ValueError("Band codes need a band width B")
            if self.B % 2:
                raise ValueError("Band width B must be even")
        return self

    @property
    def fraction(self) -> Fraction:
        return parse_rate(self.rate)


# ==================== Experiments ====================

class ExperimentConfig(BaseModel):
    code: CodeParams
    trials: int = Field(..., ge=1)
    symbol_size: int = Field(1024, ge=1)
    seed: int = Field(0, ge=0, description="Master seed; trial seeds derive from it")
    decoder: DecoderKind = DecoderKind.HYBRID
    loss_grid: List[float] = Field(default_factory=list)
    timing: bool = Field(False, description="Record wall-clock decode time")
    measure_cost: bool = Field(True, description="Decode once at the threshold to count row operations")

    @field_validator("loss_grid")
    @classmethod
    def validate_loss_grid(cls, value: List[float]) -> List[float]:
        for p in value:
            if not 0.0 <= p < 1.0:
                raise ValueError(f"Loss probability must lie in [0, 1), got {p}")
        return value


class TrialRecord(BaseModel):
    """One simulation outcome; serialized as one CSV row"""

    model_config = ConfigDict(frozen=True)

    code_family: CodeFamily
    k: int
    n: int
    B: Optional[int] = None
    decoder: DecoderKind
    trial: int
    seed: int
    symbols_needed: int = Field(..., description="Symbols fed before decoding succeeded, n on failure")
    overhead: float
    row_ops: int = 0
    decode_ns: int = 0
    loss_prob: Optional[float] = None
    symbols_received: Optional[int] = Field(None, description="Throughput runs: symbols that survived the channel")
    success: bool = True

    @model_validator(mode="after")
    def validate_bounds(self) -> "TrialRecord":
        if self.overhead < 0:
            raise ValueError("overhead must be non-negative")
        if not self.k <= self.symbols_needed <= self.n:
            raise ValueError(f"symbols_needed must lie in [k, n], got {self.symbols_needed}")
        return self


class OverheadSummary(BaseModel):
    """Overhead statistics over the successful trials; None when none succeeded"""

    trials: int
    mean: Optional[float] = None
    std: Optional[float] = None
    p50: Optional[float] = None
    p90: Optional[float] = None
    p99: Optional[float] = None
    failures: int
    mean_row_ops: float


class ThroughputPoint(BaseModel):
    loss_prob: float
    trials: int
    decoded: int
    failures: int
    mean_bitrate_mbps: Optional[float] = None
    mean_decode_ns: Optional[float] = None


class DecodeOutcome(BaseModel):
    success: bool
    recovered_count: int = 0
    iterative_recovered: int = 0
    ml_recovered: int = 0
    unsolvable: int = 0
    row_ops: int = 0
    wall_time: float = Field(0.0, description="Seconds")


# ==================== HTTP bodies ====================

class FindPolyRequest(BaseModel):
    u: str = "0,3,10"
    B: int = Field(..., ge=2)
    max_weight: int = Field(5, ge=1)
    min_weight: int = Field(1, ge=1)
    count: int = Field(24, ge=1, le=4096)
    edge: bool = False
    max_degree: Optional[int] = Field(None, ge=0)
    delta: Optional[int] = Field(None, ge=0)


class FindPolyResponse(BaseModel):
    u: str
    min_degree: int
    max_degree: int
    candidates: List[str]
    product_weights: List[int]


class BuildResponse(BaseModel):
    family: CodeFamily
    k: int
    n: int
    rate: str
    spec_hash: str
    spec_text: str
    bandwidth: Optional[int] = None
    check_rows: Optional[int] = None


class BenchJobResponse(BaseModel):
    job_id: str
    status: str
    message: str


class BenchJobStatus(BaseModel):
    job_id: str
    status: str
    done: int = 0
    total: int = 0
    error_message: Optional[str] = None
    result_available: bool = False


class FullRankResult(BaseModel):
    """Share of k x k generator submatrices that have full rank"""

    k: int
    trials: int
    windowed_full_rank: int
    random_full_rank: int

    @property
    def windowed_fraction(self) -> float:
        return self.windowed_full_rank / self.trials

    @property
    def random_fraction(self) -> float:
        return self.random_full_rank / self.trials
