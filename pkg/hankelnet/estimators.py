"""
Randomized QMC estimators
Plain QMC means, median- and mean-of-means over independent randomized nets and MSE experiments
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple, Union

import numpy as np

from .gf import BaseLike
from .models import EstimatorConfig
from .netgen import DesignKind, RngSeed, draw_design
from .pointgen import PointSet, gen_points_gray
from .wce import ProductWeights, greedy_select

logger = logging.getLogger(__name__)

Integrand = Callable[[np.ndarray], np.ndarray]
PointFactory = Callable[[RngSeed], PointSet]

DEFAULT_R = 15
_LOG_BASES = {"e": math.e, "2": 2.0, "10": 10.0}


@dataclass(frozen=True)
class BatchResult:
    batch: int
    estimate: float
    sq_error: float
    wall_time: float


@dataclass(frozen=True)
class MseSummary:
    """Squared errors of independent median-of-means estimates"""

    r: int
    batches: Tuple[BatchResult, ...]

    @property
    def sq_errors(self) -> np.ndarray:
        return np.array([b.sq_error for b in self.batches])

    @property
    def estimates(self) -> np.ndarray:
        return np.array([b.estimate for b in self.batches])

    @property
    def median(self) -> float:
        return float(np.median(self.sq_errors))

    @property
    def quartiles(self) -> Tuple[float, float]:
        q1, q3 = np.percentile(np.sort(self.sq_errors), [25, 75])
        return float(q1), float(q3)

    @property
    def mean(self) -> float:
        return math.fsum(self.sq_errors) / len(self.batches)


def qmc_mean(f: Integrand, points: PointSet) -> float:
    """(1/N) sum_n f(x_n)"""
    values = np.asarray(f(points.coords), dtype=np.float64).ravel()
    if values.shape[0] != points.n_points:
        raise ValueError(f"integrand returned {values.shape[0]} values for {points.n_points} points")
    return math.fsum(values) / points.n_points


def replicate_means(f: Integrand, factory: PointFactory, n_replicates: int,
                    rng: RngSeed) -> List[float]:
    return [qmc_mean(f, factory(rng.child("replicate", i))) for i in range(n_replicates)]


def median_of_means(f: Integrand, factory: PointFactory, n_replicates: int, rng: RngSeed) -> float:
    """Middle order statistic of n_replicates independent randomized QMC means"""
    if n_replicates < 1 or n_replicates % 2 == 0:
        raise ValueError(f"median requires odd replicate count, got {n_replicates}")
    means = sorted(replicate_means(f, factory, n_replicates, rng))
    return means[n_replicates // 2]


def mean_of_means(f: Integrand, factory: PointFactory, n_replicates: int, rng: RngSeed) -> float:
    """Average of n_replicates independent randomized QMC means"""
    if n_replicates < 1:
        raise ValueError(f"mean requires at least one replicate, got {n_replicates}")
    return math.fsum(replicate_means(f, factory, n_replicates, rng)) / n_replicates


def r_schedule(m: int, mode: str = "fixed", r_fixed: int = DEFAULT_R, log_base: str = "e") -> int:
    """Replicate count: a fixed odd constant, or the smallest odd integer >= ceil(m log m)"""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if mode == "fixed":
        if r_fixed < 1 or r_fixed % 2 == 0:
            raise ValueError(f"median requires odd replicate count, got {r_fixed}")
        return r_fixed
    if mode != "m_log_m":
        raise ValueError(f"Unknown r mode: {mode}")
    if log_base not in _LOG_BASES:
        raise ValueError(f"log base must be one of {sorted(_LOG_BASES)}, got {log_base}")
    r = max(1, math.ceil(m * math.log(m, _LOG_BASES[log_base])))
    return r if r % 2 else r + 1


def design_factory(design_kind: Union[str, DesignKind], b: BaseLike, m: int, s: int,
                   shift: bool = True, E: Optional[int] = None) -> PointFactory:
    """Callable drawing a fresh randomized net per seed"""
    kind = DesignKind.parse(design_kind)

    def factory(rng: RngSeed) -> PointSet:
        return gen_points_gray(draw_design(kind, rng, b, E, m, s, with_shift=shift))

    return factory


def optimized_factory(design_kind: Union[str, DesignKind], b: BaseLike, m: int, s: int,
                      gamma: ProductWeights, alpha: int, select_r: int, rng: RngSeed,
                      shift: bool = True, E: Optional[int] = None,
                      k_max: Optional[int] = None) -> PointFactory:
    """Best of select_r draws by WCE bound; each seed re-randomizes it with a fresh shift"""
    chosen = greedy_select(rng, select_r, b, m, s, gamma, alpha, design_kind, E=E, k_max=k_max)
    points = gen_points_gray(chosen.design)

    def factory(seed: RngSeed) -> PointSet:
        if not shift:
            return points
        return gen_points_gray(chosen.design.with_random_shift(seed))

    return factory


def batch_seed(config: EstimatorConfig, index: int) -> RngSeed:
    return RngSeed(config.seed).child(config.label, config.b, config.m, "batch", index)


def mse_experiment(f: Integrand, exact: float, config: EstimatorConfig, n_outer: int,
                   workers: int = 1, factory: Optional[PointFactory] = None,
                   gamma: Optional[ProductWeights] = None) -> MseSummary:
    """n_outer independent replicated estimates and their squared errors

    Optimized configs select a design per batch by the WCE bound under gamma.
    """
    if n_outer < 1:
        raise ValueError(f"batch count must be >= 1, got {n_outer}")
    r = r_schedule(config.m, config.r_mode, config.r, config.log_base)
    aggregate = mean_of_means if config.aggregate == "mean" else median_of_means
    if factory is None and config.optimized:
        if gamma is None:
            raise ValueError("optimized designs need product weights for the WCE bound")
    elif factory is None:
        factory = design_factory(config.design_kind, config.b, config.m, config.s,
                                 config.shift, config.E)

    def run_batch(index: int) -> BatchResult:
        started = time.perf_counter()
        rng = batch_seed(config, index)
        batch_factory = factory or optimized_factory(
            config.design_kind, config.b, config.m, config.s, gamma, config.alpha,
            config.select_r, rng.child("select"), config.shift, config.E)
        estimate = aggregate(f, batch_factory, r, rng)
        return BatchResult(index, estimate, (estimate - exact) ** 2, time.perf_counter() - started)

    logger.info(f"MSE experiment {config.label} b={config.b} m={config.m} "
                f"s={config.s}: {n_outer} batches, {config.aggregate} of r={r}")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            batches = list(executor.map(run_batch, range(n_outer)))
    else:
        batches = [run_batch(i) for i in range(n_outer)]

    summary = MseSummary(r, tuple(sorted(batches, key=lambda b: b.batch)))
    logger.info(f"MSE experiment {config.label} b={config.b} m={config.m}: "
                f"median squared error {summary.median:.6g}")
    return summary
