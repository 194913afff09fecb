"""
Data models for experiment configuration and machine-readable results
"""

import json
from typing import ClassVar, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from .gf import is_prime
from .netgen import DesignKind

OPTIMIZED_SUFFIX = "-opt"
AGGREGATES = ("median", "mean")


def _check_base(value: int) -> int:
    if not (2 <= value <= 31 and is_prime(value)):
        raise ValueError(f"base must be a prime in 2..31, got {value}")
    return value


def _check_aggregate(value: str) -> str:
    if value not in AGGREGATES:
        raise ValueError(f"aggregate must be median or mean, got {value}")
    return value


def _check_alpha(value: int) -> int:
    if value not in (1, 2):
        raise ValueError(f"alpha must be 1 or 2, got {value}")
    return value


def split_design_label(value: Union[str, DesignKind]) -> Tuple[DesignKind, bool]:
    """'hrd' -> (HRD, False); 'hrd-opt' -> (HRD, True) for best-of-r selected designs"""
    if isinstance(value, DesignKind):
        return value, False
    text = str(value).strip().lower().replace("_", "-")
    if text.endswith(OPTIMIZED_SUFFIX):
        return DesignKind.parse(text[:-len(OPTIMIZED_SUFFIX)]), True
    return DesignKind.parse(text), False


def design_label(kind: DesignKind, optimized: bool) -> str:
    return kind.value + OPTIMIZED_SUFFIX if optimized else kind.value


class EstimatorConfig(BaseModel):
    """Replicated estimator settings for one (design, b, m, s) cell

    optimized designs are the best of select_r draws by the alpha WCE bound,
    re-randomized per replicate by a fresh digital shift.
    """
    design_kind: DesignKind
    b: int
    m: int = Field(ge=1)
    s: int = Field(ge=1)
    r: int = 15
    r_mode: str = "fixed"
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    shift: bool = True
    log_base: str = "e"
    E: Optional[int] = None
    aggregate: str = "median"
    optimized: bool = False
    select_r: int = Field(default=15, ge=1)
    alpha: int = 1

    @field_validator("b")
    @classmethod
    def base_is_prime(cls, value: int) -> int:
        return _check_base(value)

    @field_validator("r")
    @classmethod
    def r_is_odd(cls, value: int) -> int:
        if value < 1 or value % 2 == 0:
            raise ValueError(f"r must be odd and >= 1, got {value}")
        return value

    @field_validator("r_mode")
    @classmethod
    def known_r_mode(cls, value: str) -> str:
        if value not in ("fixed", "m_log_m"):
            raise ValueError(f"r_mode must be fixed or m_log_m, got {value}")
        return value

    @field_validator("log_base")
    @classmethod
    def known_log_base(cls, value: str) -> str:
        if value not in ("e", "2", "10"):
            raise ValueError(f"log_base must be e, 2 or 10, got {value}")
        return value

    @field_validator("aggregate")
    @classmethod
    def known_aggregate(cls, value: str) -> str:
        return _check_aggregate(value)

    @field_validator("alpha")
    @classmethod
    def alpha_has_closed_form(cls, value: int) -> int:
        return _check_alpha(value)

    @property
    def label(self) -> str:
        return design_label(self.design_kind, self.optimized)


class ExperimentRecord(BaseModel):
    """One outer batch of an MSE experiment, a row of the sweep CSV"""
    design: str
    b: int
    m: int
    s: int
    integrand: str
    c: float
    weight_mode: str
    r: int
    batch: int
    estimate: float
    sq_error: float
    seed: int
    wall_time: float = 0.0

    CSV_FIELDS: ClassVar[List[str]] = ["design", "b", "m", "s", "integrand", "c",
                                       "weight_mode", "r", "batch", "estimate", "sq_error", "seed"]

    def sort_key(self):
        return (self.design, self.b, self.m, self.batch)


class SweepConfig(BaseModel):
    """Convergence sweep over designs, bases and m

    designs holds labels: a design kind, optionally suffixed -opt for best-of-select_r
    selection by the WCE bound.
    """
    designs: List[str]
    bases: List[int]
    m_min: int = Field(ge=1)
    m_max: int = Field(ge=1)
    s: int = Field(ge=1)
    integrand: str = "product_power"
    c: float = 1.5
    weight_mode: str = "exp"
    r_mode: str = "fixed"
    r: int = 15
    batches: int = Field(default=64, ge=1)
    seed: int = Field(default=0, ge=0, lt=2 ** 64)
    out: str
    workers: int = Field(default=1, ge=1)
    shift: bool = True
    log_base: str = "e"
    aggregate: str = "median"
    select_r: int = Field(default=15, ge=1)
    alpha: int = 1

    @field_validator("bases")
    @classmethod
    def bases_are_prime(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one base is required")
        return [_check_base(b) for b in value]

    @field_validator("aggregate")
    @classmethod
    def known_aggregate(cls, value: str) -> str:
        return _check_aggregate(value)

    @field_validator("alpha")
    @classmethod
    def alpha_has_closed_form(cls, value: int) -> int:
        return _check_alpha(value)

    @field_validator("designs", mode="before")
    @classmethod
    def designs_are_labels(cls, value) -> List[str]:
        if not value:
            raise ValueError("at least one design is required")
        return [design_label(*split_design_label(item)) for item in value]

    @model_validator(mode="after")
    def m_range_nonempty(self) -> "SweepConfig":
        if self.m_min > self.m_max:
            raise ValueError(f"empty m range: m_min={self.m_min} > m_max={self.m_max}")
        return self

    @property
    def m_values(self) -> List[int]:
        return list(range(self.m_min, self.m_max + 1))

    def estimator(self, design: Union[str, DesignKind], b: int, m: int) -> EstimatorConfig:
        kind, optimized = split_design_label(design)
        return EstimatorConfig(design_kind=kind, b=b, m=m, s=self.s, r=self.r,
                               r_mode=self.r_mode, seed=self.seed, shift=self.shift,
                               log_base=self.log_base, aggregate=self.aggregate,
                               optimized=optimized, select_r=self.select_r, alpha=self.alpha)


class DualProbRecord(BaseModel):
    """Output of the dualprob command"""
    design_kind: str
    b: int
    m: int
    s: int
    k: List[int]
    exact: Optional[float] = None
    mc_estimate: float
    mc_stderr: float
    trials: int
    seed: int


class TParamRecord(BaseModel):
    """Output of the tparam command"""
    design_kind: str
    b: int
    m: int
    s: int
    u: List[int]
    t: int
    seed: int


class OptimizeRecord(BaseModel):
    """Output of the optimize command"""
    design_kind: str
    b: int
    m: int
    s: int
    alpha: int
    r: int
    seed: int
    wce_values: List[float]
    best_index: int
    best_wce: float


def to_json(model: BaseModel) -> str:
    """Byte-stable JSON rendering"""
    return json.dumps(model.model_dump(mode="json"), sort_keys=True)
