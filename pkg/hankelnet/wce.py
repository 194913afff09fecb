"""
Worst-case error bounds for digital nets
Product-weight WCE over the Sobolev-variation space, omega kernels and best-of-r selection
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .gf import BaseLike, PrimeBase
from .netgen import DesignKind, NetDesign, RngSeed, draw_design
from .pointgen import PointSet, gen_points_gray
from .walshlab import coordinate_digits, mu_alpha, n_alpha, root_of_unity

logger = logging.getLogger(__name__)

TAIL_TERMS = 400


@dataclass(frozen=True)
class ProductWeights:
    """Coordinate weights gamma_1..gamma_s, all positive"""

    gamma: Tuple[float, ...]

    def __post_init__(self):
        gamma = tuple(float(g) for g in self.gamma)
        if not gamma:
            raise ValueError("ProductWeights needs at least one weight")
        if any(not g > 0 for g in gamma):
            raise ValueError(f"Product weights must be positive, got {gamma}")
        object.__setattr__(self, "gamma", gamma)

    @property
    def s(self) -> int:
        return len(self.gamma)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.gamma, dtype=np.float64)


@dataclass(frozen=True)
class SmoothnessParams:
    alpha: int
    p: float = 1.0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not 0 < self.p <= 1:
            raise ValueError(f"p must lie in (0, 1], got {self.p}")


@dataclass(frozen=True)
class OmegaSeries:
    """Truncated omega_{alpha+1} series value and a bound on the neglected terms"""
    value: float
    tail_bound: float
    k_max: int


@dataclass(frozen=True)
class GreedyResult:
    design: NetDesign
    wce: float
    wce_values: Tuple[float, ...]
    best_index: int


def c_alpha_p(b: BaseLike, alpha: int, p: float) -> float:
    """C_{alpha,p} = (b-1)^((2p-1)_+/2) (1+pi)/2 b^alpha"""
    SmoothnessParams(alpha, p)
    b = int(PrimeBase(b))
    exponent = max(2 * p - 1, 0.0) / 2
    return (b - 1) ** exponent * (1 + math.pi) / 2 * float(b) ** alpha


def w_linf_bound(k: int, alpha: int, b: BaseLike) -> float:
    """Sup-norm bound ((1+pi)/2) b^(n_alpha(k) - mu_alpha(k)) on the W-transform of wal_k"""
    if k <= 0:
        raise ValueError(f"k must be > 0, got {k}")
    b = int(PrimeBase(b))
    return (1 + math.pi) / 2 * float(b) ** (n_alpha(k, alpha, b) - mu_alpha(k, alpha, b))


def _leading_position(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """a1 = -floor(log2 x) from the float exponent and t1 = 2^-a1; both 0 at x = 0"""
    _, exponent = np.frexp(x)
    zero = x == 0
    a1 = np.where(zero, 0, 1 - exponent).astype(np.float64)
    t1 = np.where(zero, 0.0, np.ldexp(1.0, -(1 - exponent)))
    return a1, t1


def _as_unit_array(x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and (arr.min() < 0.0 or arr.max() >= 1.0):
        raise ValueError("omega kernels need x in [0, 1)")
    return arr


def omega2(x):
    """omega_2 for base 2 in closed form (scalar or array)"""
    arr = _as_unit_array(x)
    a1, t1 = _leading_position(arr)
    s1 = 1 - 2 * arr
    s2_tilde = (1 - 5 * t1) / 2 - (a1 - 2) * arr
    result = s1 + s2_tilde
    return float(result) if result.ndim == 0 else result


def omega3(x):
    """omega_3 for base 2 in closed form (scalar or array)"""
    arr = _as_unit_array(x)
    a1, t1 = _leading_position(arr)
    s1 = 1 - 2 * arr
    s2 = 1 / 3 - 2 * (1 - arr) * arr
    s3_tilde = (1 - 43 * t1 ** 2) / 18 + (5 * t1 - 1) * arr + (a1 - 2) * arr ** 2
    result = s1 + s2 + s3_tilde
    return float(result) if result.ndim == 0 else result


def _series_tail(alpha: int, b: int, covered: int) -> float:
    """sum of b^-mu_{alpha+1}(k) over k >= b^covered"""
    order = alpha + 1
    # totals[j] = sum_{k < b^n} b^-mu_j(k) for j = 1..order
    totals = [1.0] * (order + 1)
    tail = 0.0
    for n in range(1, covered + TAIL_TERMS + 1):
        scale = (b - 1) * float(b) ** -n
        prev = totals[:]
        increments = [0.0] * (order + 1)
        increments[1] = (b - 1) / b
        for j in range(2, order + 1):
            increments[j] = scale * prev[j - 1]
        for j in range(1, order + 1):
            totals[j] = prev[j] + increments[j]
        if n > covered:
            tail += increments[order]
    return tail


def omega_series(x: float, alpha: int, b: BaseLike, k_max: int) -> OmegaSeries:
    """Partial sum of omega_{alpha+1}(x) = sum_k b^-mu_{alpha+1}(k) wal_k(x) up to k_max"""
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    SmoothnessParams(alpha)
    b = int(PrimeBase(b))
    order = alpha + 1
    length = 1
    while b ** length <= k_max:
        length += 1
    xd = coordinate_digits(x, b)
    xd = xd[:length] + [0] * max(0, length - len(xd))

    phases = np.zeros(1, dtype=np.int64)
    tops = np.zeros((1, order), dtype=np.int64)
    for i in range(length):
        blocks_phase = [phases]
        shifted = np.concatenate([np.full((len(tops), 1), i + 1, dtype=np.int64), tops[:, :-1]], axis=1)
        blocks_top = [tops]
        for d in range(1, b):
            blocks_phase.append((phases + d * xd[i]) % b)
            blocks_top.append(shifted)
        phases = np.concatenate(blocks_phase)
        tops = np.concatenate(blocks_top)

    phases = phases[1:k_max + 1]
    mu = tops[1:k_max + 1].sum(axis=1)
    roots = np.array([root_of_unity(b, p).real for p in range(b)])
    terms = np.power(float(b), -mu.astype(np.float64)) * roots[phases]
    covered = length if k_max == b ** length - 1 else length - 1
    return OmegaSeries(math.fsum(terms), _series_tail(alpha, b, covered), k_max)


def _omega_values(coords: np.ndarray, alpha: int, b: int, k_max: Optional[int]) -> np.ndarray:
    if b == 2:
        return omega2(coords) if alpha == 1 else omega3(coords)
    if k_max is None:
        raise ValueError(f"closed form unavailable for base {b}; pass k_max for the series")
    values, inverse = np.unique(coords, return_inverse=True)
    series = np.array([omega_series(float(v), alpha, b, k_max).value for v in values])
    return series[inverse].reshape(coords.shape)


def wce_bound(points: PointSet, gamma: ProductWeights, alpha: int,
              k_max: Optional[int] = None) -> float:
    """-1 + (1/N) sum_i prod_j [1 + gamma_j C_{alpha,1} omega_{alpha+1}(x_ij)] on unshifted points"""
    if alpha not in (1, 2):
        raise ValueError(f"closed form unavailable for alpha={alpha} (need 1 or 2)")
    if gamma.s != points.s:
        raise ValueError(f"weights have {gamma.s} entries, points have s={points.s}")
    b = 2 if points.base is None else int(points.base)
    omega = _omega_values(points.coords, alpha, b, k_max)
    factors = 1.0 + gamma.as_array()[None, :] * c_alpha_p(b, alpha, 1.0) * omega
    products = np.prod(factors, axis=1)
    return math.fsum(products) / points.n_points - 1.0


def design_wce(design: NetDesign, gamma: ProductWeights, alpha: int,
               k_max: Optional[int] = None) -> float:
    """WCE bound of a design, always evaluated without its digital shift"""
    return wce_bound(gen_points_gray(design.without_shift()), gamma, alpha, k_max)


def greedy_select(rng: RngSeed, r: int, b: BaseLike, m: int, s: int, gamma: ProductWeights,
                  alpha: int, design_kind: Union[str, DesignKind], E: Optional[int] = None,
                  workers: int = 1, k_max: Optional[int] = None) -> GreedyResult:
    """Draw r designs and keep the one with the smallest WCE bound (lowest index on ties)"""
    if r < 1:
        raise ValueError(f"batch size r must be >= 1, got {r}")
    kind = DesignKind.parse(design_kind)

    def evaluate(index: int) -> Tuple[NetDesign, float]:
        design = draw_design(kind, rng.child("candidate", index), b, E, m, s, with_shift=False)
        return design, design_wce(design, gamma, alpha, k_max)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(evaluate, range(r)))
    else:
        results = [evaluate(i) for i in range(r)]

    values = tuple(w for _, w in results)
    best = min(range(r), key=lambda i: (values[i], i))
    logger.debug(f"Best-of-{r} {kind.value} wce {values[best]:.6g} at index {best}")
    return GreedyResult(results[best][0], values[best], values, best)
