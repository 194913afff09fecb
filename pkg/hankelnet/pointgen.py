"""
Digital-net point generation
Gray-code streaming generator and a per-index oracle, both exact on the b^-E grid
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Iterator, List, NamedTuple, Optional, Tuple

import numpy as np

from .gf import BaseLike, PrimeBase
from .netgen import NetDesign

logger = logging.getLogger(__name__)


class GrayStep(NamedTuple):
    """Digit position t changes by inc (+1 or -1)"""
    t: int
    inc: int


@dataclass(frozen=True)
class PointSet:
    """N x s coordinates in [0, 1) plus the net index n of every row"""

    coords: np.ndarray
    base: Optional[PrimeBase] = None
    E: Optional[int] = None
    indices: Optional[np.ndarray] = None

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64, copy=True)
        if coords.ndim == 1:
            coords = coords[:, None]
        if coords.ndim != 2 or coords.shape[0] == 0:
            raise ValueError(f"PointSet needs a non-empty N x s array, got shape {coords.shape}")
        if coords.min() < 0.0 or coords.max() >= 1.0:
            raise ValueError("PointSet coordinates must lie in [0, 1)")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if self.base is not None:
            object.__setattr__(self, "base", PrimeBase(self.base))
        if self.indices is not None:
            indices = np.array(self.indices, dtype=np.int64, copy=True)
            indices.setflags(write=False)
            object.__setattr__(self, "indices", indices)

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def s(self) -> int:
        return self.coords.shape[1]

    def sorted_rows(self) -> np.ndarray:
        """Rows in lexicographic order, for multiset comparisons"""
        order = np.lexsort(self.coords.T[::-1])
        return self.coords[order]

    def in_index_order(self) -> "PointSet":
        if self.indices is None:
            return self
        order = np.argsort(self.indices, kind="stable")
        return PointSet(self.coords[order], self.base, self.E, self.indices[order])


def iter_gray_steps(b: BaseLike, m: int) -> Iterator[GrayStep]:
    """Reflected base-b Gray code: b^m - 1 single-digit +-1 moves from 0^m"""
    b = int(PrimeBase(b))
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    a = [0] * m
    direction = [1] * m
    for _ in range(1, b ** m):
        for t in range(m):
            if 0 <= a[t] + direction[t] < b:
                inc = direction[t]
                a[t] += inc
                for j in range(t):
                    direction[j] = -direction[j]
                yield GrayStep(t, inc)
                break


def gray_steps(b: BaseLike, m: int) -> List[GrayStep]:
    return list(iter_gray_steps(b, m))


@lru_cache(maxsize=64)
def _gray_step_arrays(b: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    steps = gray_steps(b, m)
    t = np.fromiter((step.t for step in steps), dtype=np.int64, count=len(steps))
    inc = np.fromiter((step.inc for step in steps), dtype=np.int64, count=len(steps))
    t.setflags(write=False)
    inc.setflags(write=False)
    return t, inc


def _digit_weights(b: int, E: int) -> np.ndarray:
    return np.array([b ** (E - 1 - i) for i in range(E)], dtype=np.int64)


def digits_to_coords(digits: np.ndarray, b: int) -> np.ndarray:
    """Map digit arrays (..., E) to sum_i y_i b^-i, exactly rounded"""
    E = digits.shape[-1]
    integer = digits.astype(np.int64) @ _digit_weights(b, E)
    return integer.astype(np.float64) / float(b ** E)


def _shift_digits(design: NetDesign) -> np.ndarray:
    if design.shifts is None:
        return np.zeros((design.s, design.E), dtype=np.int64)
    return design.shifts.astype(np.int64)


def index_digits(b: BaseLike, m: int) -> np.ndarray:
    """Base-b digits (least significant first) of n = 0..b^m - 1, shape (b^m, m)"""
    b = int(PrimeBase(b))
    n = np.arange(b ** m, dtype=np.int64)
    return np.stack([(n // b ** r) % b for r in range(m)], axis=1) if m else np.zeros((1, 0), dtype=np.int64)


def point_digits(design: NetDesign) -> np.ndarray:
    """Digits y_{n,j} = C_j n (+) d_j for every index n, shape (b^m, s, E)"""
    b = int(design.base)
    nd = index_digits(b, design.m)
    mats = design.matrices.astype(np.int64)
    digits = np.einsum("nr,jer->nje", nd, mats) + _shift_digits(design)[None, :, :]
    return digits % b


def gen_points_naive(design: NetDesign) -> PointSet:
    """Points in natural index order from the digit expansion of each n"""
    b = int(design.base)
    coords = digits_to_coords(point_digits(design), b)
    return PointSet(coords, design.base, design.E, np.arange(design.n_points))


def gen_points_gray(design: NetDesign) -> PointSet:
    """Points in Gray-code order, each obtained from the previous by +-1 column update"""
    b = int(design.base)
    t, inc = _gray_step_arrays(b, design.m)
    shifts = _shift_digits(design)
    coords = np.empty((design.n_points, design.s), dtype=np.float64)
    for j in range(design.s):
        columns = design.matrices[j].astype(np.int64)
        moves = inc[:, None] * columns[:, t].T
        state = np.empty((design.n_points, design.E), dtype=np.int64)
        state[0] = shifts[j]
        np.cumsum(moves, axis=0, out=state[1:])
        state[1:] += shifts[j]
        coords[:, j] = digits_to_coords(state % b, b)

    indices = np.zeros(design.n_points, dtype=np.int64)
    if design.m:
        indices[1:] = np.cumsum(inc * (b ** t))
    return PointSet(coords, design.base, design.E, indices)


def iter_points_gray(design: NetDesign) -> Iterator[Tuple[int, np.ndarray]]:
    """Stream (n, x_n) in Gray order keeping only O(sE) digit state"""
    b = int(design.base)
    mats = design.matrices.astype(np.int64)
    weights = _digit_weights(b, design.E)
    scale = float(b ** design.E)
    state = _shift_digits(design).copy()
    n = 0
    yield n, (state @ weights).astype(np.float64) / scale
    for step in iter_gray_steps(b, design.m):
        state = (state + step.inc * mats[:, :, step.t]) % b
        n += step.inc * b ** step.t
        yield n, (state @ weights).astype(np.float64) / scale


def stream_points(design: NetDesign, callback: Callable[[int, np.ndarray], None]) -> int:
    """Feed every point to callback(n, x) without materializing the set; returns count"""
    count = 0
    for n, x in iter_points_gray(design):
        callback(n, x)
        count += 1
    logger.debug(f"Streamed {count} points (b={design.base}, m={design.m}, s={design.s})")
    return count
