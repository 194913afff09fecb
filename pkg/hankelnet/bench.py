"""
Benchmark integrands and the convergence sweep driver
Test functions with exact integrals and variances, weight schedules and CSV sweeps
"""

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from io import StringIO
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.special import ndtr

from .models import EstimatorConfig, ExperimentRecord, SweepConfig
from .netgen import DesignKind, default_precision
from .estimators import MseSummary, mse_experiment
from .wce import ProductWeights

logger = logging.getLogger(__name__)

# Rational approximation of the normal quantile, central and tail regions
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


class IntegrandKind(str, Enum):
    PRODUCT_POWER = "product_power"
    LOGNORMAL = "lognormal"
    T_EXP = "t_exp"

    @classmethod
    def parse(cls, value: Union[str, "IntegrandKind"]) -> "IntegrandKind":
        if isinstance(value, IntegrandKind):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"Unknown integrand: {value!r} (expected product_power, lognormal or t_exp)")


def exp_weights(s: int, c: float, mode: str = "exp") -> ProductWeights:
    """gamma_j = exp(-ceil(c) j) for j = 1..s, or 1.0 throughout in equal mode"""
    if s < 1:
        raise ValueError(f"dimension s must be >= 1, got {s}")
    if mode == "equal":
        return ProductWeights(tuple([1.0] * s))
    if mode != "exp":
        raise ValueError(f"Unknown weight mode: {mode} (expected exp or equal)")
    decay = math.ceil(c)
    return ProductWeights(tuple(math.exp(-decay * j) for j in range(1, s + 1)))


def _as_points(t) -> np.ndarray:
    arr = np.asarray(t, dtype=np.float64)
    return arr[None, :] if arr.ndim == 1 else arr


def _scalar_or_array(values: np.ndarray, t):
    return float(values[0]) if np.ndim(t) == 1 else values


def product_power(t, c: float, gamma: ProductWeights):
    """prod_j [1 + gamma_j (t_j^c - 1/(1+c))]"""
    points = _as_points(t)
    factors = 1.0 + gamma.as_array()[None, :] * (points ** c - 1.0 / (1.0 + c))
    return _scalar_or_array(np.prod(factors, axis=1), t)


def _rational_quantile(u: np.ndarray) -> np.ndarray:
    x = np.empty_like(u)
    low = u < _P_LOW
    central = (u >= _P_LOW) & (u <= 0.5)

    q = np.sqrt(-2.0 * np.log(u[low]))
    num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
    den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    x[low] = num / den

    q = u[central] - 0.5
    r = q * q
    num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
    den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
    x[central] = num / den
    return x


def inverse_normal_cdf(u):
    """Phi^-1(u) by rational approximation plus one Halley step"""
    arr = np.asarray(u, dtype=np.float64)
    if arr.size and not ((arr > 0.0) & (arr < 1.0)).all():
        raise ValueError("inverse normal CDF needs 0 < u < 1")
    flat = arr.ravel()
    upper = flat > 0.5
    lower_u = np.where(upper, 1.0 - flat, flat)

    x = _rational_quantile(lower_u)
    e = ndtr(x) - lower_u
    step = e * math.sqrt(2 * math.pi) * np.exp(x * x / 2.0)
    x = x - step / (1.0 + x * step / 2.0)

    x = np.where(upper, -x, x).reshape(arr.shape)
    return float(x) if x.ndim == 0 else x


def lognormal(t, b: int = 2, E: Optional[int] = None):
    """exp(sum_j Phi^-1(t_j)); exact-zero coordinates are moved to b^-(E+1)"""
    points = _as_points(t)
    E = default_precision(b) if E is None else E
    zeros = points == 0.0
    if zeros.any():
        logger.warning(f"lognormal: nudging {int(zeros.sum())} zero coordinates to {b}^-{E + 1}")
        points = np.where(zeros, float(b) ** -(E + 1), points)
    values = np.exp(np.sum(inverse_normal_cdf(points), axis=1))
    return _scalar_or_array(values, t)


def t_exp(t):
    """prod_j t_j exp(t_j)"""
    points = _as_points(t)
    return _scalar_or_array(np.prod(points * np.exp(points), axis=1), t)


@dataclass(frozen=True)
class Integrand:
    """Test integrand bound to its parameters, with exact integral and variance"""

    kind: IntegrandKind
    s: int
    c: float = 0.0
    gamma: Optional[ProductWeights] = None
    base: int = 2
    E: Optional[int] = None

    def __call__(self, coords: np.ndarray) -> np.ndarray:
        points = _as_points(coords)
        if points.shape[1] != self.s:
            raise ValueError(f"integrand has s={self.s}, points have {points.shape[1]} coordinates")
        if self.kind is IntegrandKind.PRODUCT_POWER:
            return product_power(points, self.c, self.gamma)
        if self.kind is IntegrandKind.LOGNORMAL:
            return lognormal(points, self.base, self.E)
        return t_exp(points)

    @property
    def exact_integral(self) -> float:
        if self.kind is IntegrandKind.LOGNORMAL:
            return math.exp(self.s / 2)
        return 1.0

    @property
    def exact_variance(self) -> float:
        if self.kind is IntegrandKind.PRODUCT_POWER:
            c = self.c
            per_factor = 1.0 / (2 * c + 1) - 1.0 / (1 + c) ** 2
            return math.prod(1.0 + g * g * per_factor for g in self.gamma.gamma) - 1.0
        if self.kind is IntegrandKind.LOGNORMAL:
            return math.exp(2 * self.s) - math.exp(self.s)
        # second moment of t e^t on [0, 1) is (e^2 - 1)/4
        return ((math.e ** 2 - 1) / 4) ** self.s - 1.0


def make_integrand(kind: Union[str, IntegrandKind], s: int, c: float = 1.5,
                   weight_mode: str = "exp", base: int = 2, E: Optional[int] = None) -> Integrand:
    kind = IntegrandKind.parse(kind)
    gamma = exp_weights(s, c, weight_mode) if kind is IntegrandKind.PRODUCT_POWER else None
    return Integrand(kind, s, c if kind is IntegrandKind.PRODUCT_POWER else 0.0, gamma, base, E)


@dataclass
class SweepResult:
    records: List[ExperimentRecord]
    summary: Dict[str, object]
    csv_path: Path
    summary_path: Path
    cells: Dict[Tuple[str, int, int], MseSummary] = field(default_factory=dict)


def _fmt(value: float) -> str:
    return "%.17g" % value


def format_records_csv(records: List[ExperimentRecord]) -> str:
    buffer = StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(ExperimentRecord.CSV_FIELDS)
    for rec in sorted(records, key=ExperimentRecord.sort_key):
        writer.writerow([rec.design, rec.b, rec.m, rec.s, rec.integrand, _fmt(rec.c),
                         rec.weight_mode, rec.r, rec.batch, _fmt(rec.estimate),
                         _fmt(rec.sq_error), rec.seed])
    return buffer.getvalue()


def fitted_slope(m_values: List[int], medians: List[float]) -> Optional[float]:
    """Least-squares slope of log2(median squared error) against m"""
    pairs = [(m, v) for m, v in zip(m_values, medians) if v > 0]
    if len(pairs) < 2:
        return None
    xs = np.array([m for m, _ in pairs], dtype=np.float64)
    ys = np.log2([v for _, v in pairs])
    return float(np.polyfit(xs, ys, 1)[0])


def _cell_records(config: SweepConfig, cell: EstimatorConfig, summary: MseSummary,
                  integrand: Integrand) -> List[ExperimentRecord]:
    return [
        ExperimentRecord(design=cell.label, b=cell.b, m=cell.m, s=cell.s,
                         integrand=integrand.kind.value, c=config.c,
                         weight_mode=config.weight_mode, r=summary.r, batch=batch.batch,
                         estimate=batch.estimate, sq_error=batch.sq_error, seed=config.seed,
                         wall_time=batch.wall_time)
        for batch in summary.batches
    ]


def summary_path_for(out: Union[str, Path]) -> Path:
    out = Path(out)
    return out.with_name(out.stem + ".summary.json")


def run_sweep(config: SweepConfig, workers: Optional[int] = None) -> SweepResult:
    """Run every (design, b, m) cell and write the CSV rows plus a slope summary"""
    workers = config.workers if workers is None else workers
    cells: List[EstimatorConfig] = []
    for label in config.designs:
        for b in config.bases:
            cell = config.estimator(label, b, config.m_min)
            if cell.design_kind is DesignKind.LMS_SOBOL and b != 2:
                logger.warning(f"Skipping {label} at base {b}: LMS+Sobol' is base 2 only")
                continue
            if cell.optimized and b != 2:
                logger.warning(f"Skipping {label} at base {b}: WCE selection needs the base-2 closed forms")
                continue
            cells.extend(config.estimator(label, b, m) for m in config.m_values)
    if not cells:
        raise ValueError("sweep has no runnable (design, base) cells")
    gamma = exp_weights(config.s, config.c, config.weight_mode)

    def run_cell(cell: EstimatorConfig) -> Tuple[EstimatorConfig, MseSummary, Integrand]:
        integrand = make_integrand(config.integrand, config.s, config.c, config.weight_mode,
                                   cell.b, default_precision(cell.b))
        summary = mse_experiment(integrand, integrand.exact_integral, cell, config.batches,
                                 gamma=gamma)
        return cell, summary, integrand

    logger.info(f"Sweep: {len(cells)} cells, {config.batches} batches each, workers={workers}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(run_cell, cells))
    else:
        results = [run_cell(cell) for cell in cells]

    records: List[ExperimentRecord] = []
    by_cell: Dict[Tuple[str, int, int], MseSummary] = {}
    for cell, summary, integrand in results:
        records.extend(_cell_records(config, cell, summary, integrand))
        by_cell[(cell.label, cell.b, cell.m)] = summary

    groups = []
    for design, b in sorted({(d, b) for d, b, _ in by_cell}):
        ms = sorted(m for d, bb, m in by_cell if d == design and bb == b)
        medians = [by_cell[(design, b, m)].median for m in ms]
        slope = fitted_slope(ms, medians)
        groups.append({"design": design, "b": b,
                       "median_sq_error": {str(m): v for m, v in zip(ms, medians)},
                       "slope": slope})
        logger.info(f"Sweep {design} b={b}: fitted log2 slope {slope}")
    summary = {"integrand": config.integrand, "s": config.s, "c": config.c,
               "weight_mode": config.weight_mode, "batches": config.batches,
               "estimator": config.aggregate, "seed": config.seed, "cells": groups}

    csv_path = Path(config.out)
    json_path = summary_path_for(csv_path)
    try:
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(format_records_csv(records))
        json_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    except OSError as e:
        raise OSError(f"Cannot write sweep output {csv_path}: {e}") from e
    logger.info(f"Sweep wrote {len(records)} rows to {csv_path}")
    return SweepResult(records, summary, csv_path, json_path, by_cell)
