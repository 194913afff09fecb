"""
Finite-field arithmetic over F_b
Prime bases, digit matrices, inverses, matrix-vector products and ranks
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)

MAX_BASE = 31


def is_prime(n: int) -> bool:
    """Deterministic trial-division primality check"""
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    d = 3
    while d * d <= n:
        if n % d == 0:
            return False
        d += 2
    return True


class PrimeBase(int):
    """Prime order b of the field F_b, 2 <= b <= 31"""

    def __new__(cls, b: int):
        if isinstance(b, PrimeBase):
            return b
        value = int(b)
        if value != b:
            raise ValueError(f"Base must be an integer, got {b!r}")
        if not 2 <= value <= MAX_BASE:
            raise ValueError(f"Base {value} outside supported range 2..{MAX_BASE}")
        if not is_prime(value):
            raise ValueError(f"Base {value} is not prime")
        return super().__new__(cls, value)

    def __repr__(self) -> str:
        return f"PrimeBase({int(self)})"


BaseLike = Union[int, PrimeBase]


@dataclass(frozen=True)
class GfMatrix:
    """Dense matrix over F_b stored as uint8 digits"""

    base: PrimeBase
    entries: np.ndarray

    def __post_init__(self):
        base = PrimeBase(self.base)
        entries = np.array(self.entries, dtype=np.int64, copy=True)
        if entries.ndim != 2:
            raise ValueError(f"GfMatrix needs a 2-d array, got shape {entries.shape}")
        if entries.size and (entries.min() < 0 or entries.max() >= base):
            raise ValueError(f"GfMatrix entries must lie in 0..{base - 1}")
        digits = entries.astype(np.uint8)
        digits.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "entries", digits)

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @classmethod
    def zeros(cls, base: BaseLike, rows: int, cols: int) -> "GfMatrix":
        return cls(PrimeBase(base), np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def identity(cls, base: BaseLike, size: int) -> "GfMatrix":
        return cls(PrimeBase(base), np.eye(size, dtype=np.uint8))

    def row_major(self) -> List[int]:
        """Entries as a flat row-major digit list"""
        return [int(e) for e in self.entries.ravel()]

    def __eq__(self, other) -> bool:
        if not isinstance(other, GfMatrix):
            return NotImplemented
        return (self.base == other.base
                and self.entries.shape == other.entries.shape
                and bool(np.array_equal(self.entries, other.entries)))

    def __hash__(self) -> int:
        return hash((int(self.base), self.entries.shape, self.entries.tobytes()))


def gf_inv(b: BaseLike, a: int) -> int:
    """Multiplicative inverse in F_b via Fermat exponentiation a^(b-2)"""
    b = PrimeBase(b)
    a = int(a) % b
    if a == 0:
        raise ValueError("no inverse of zero")
    return pow(a, b - 2, b)


def mat_vec(C: GfMatrix, v: Sequence[int]) -> np.ndarray:
    """Return C v over F_b"""
    vec = np.asarray(v, dtype=np.int64)
    if vec.ndim != 1 or vec.shape[0] != C.cols:
        raise ValueError(f"Dimension mismatch: matrix has {C.cols} columns, vector has {vec.shape}")
    if vec.size and (vec.min() < 0 or vec.max() >= C.base):
        raise ValueError(f"Vector entries must lie in 0..{C.base - 1}")
    return ((C.entries.astype(np.int64) @ vec) % C.base).astype(np.uint8)


def mat_mul(A: GfMatrix, B: GfMatrix) -> GfMatrix:
    """Return A B over F_b"""
    if A.base != B.base:
        raise ValueError(f"Base mismatch: {A.base} vs {B.base}")
    if A.cols != B.rows:
        raise ValueError(f"Dimension mismatch: {A.rows}x{A.cols} times {B.rows}x{B.cols}")
    product = (A.entries.astype(np.int64) @ B.entries.astype(np.int64)) % A.base
    return GfMatrix(A.base, product)


def rank_of_array(rows: np.ndarray, b: int) -> int:
    """Rank over F_b of a 2-d integer array (entries reduced mod b first)"""
    work = np.array(rows, dtype=np.int64, copy=True) % b
    if work.ndim != 2 or work.size == 0:
        return 0
    n_rows, n_cols = work.shape
    r = 0
    for c in range(n_cols):
        pivot = None
        for i in range(r, n_rows):
            if work[i, c] != 0:
                pivot = i
                break
        if pivot is None:
            continue
        if pivot != r:
            work[[r, pivot], :] = work[[pivot, r], :]
        work[r, :] = (work[r, :] * pow(int(work[r, c]), b - 2, b)) % b
        below = work[r + 1:, c].copy()
        nz = np.nonzero(below)[0]
        if nz.size:
            idx = nz + r + 1
            work[idx, :] = (work[idx, :] - np.outer(below[nz], work[r, :])) % b
        r += 1
        if r == n_rows:
            break
    return r


def rank(M: GfMatrix) -> int:
    """Rank of M over F_b by row echelon reduction"""
    return rank_of_array(M.entries, M.base)


class EchelonBasis:
    """Incrementally maintained echelon basis of row vectors over F_b

    Rows are inserted one at a time; pop() undoes the most recent successful
    insert, which lets depth-first enumerations reuse partial reductions.
    """

    def __init__(self, b: BaseLike, width: int):
        self.b = int(PrimeBase(b))
        self.width = width
        self._pivots: List[int] = []
        self._rows: List[np.ndarray] = []

    def __len__(self) -> int:
        return len(self._rows)

    def reduce(self, row: Sequence[int]) -> np.ndarray:
        """Reduce a row against the basis"""
        v = np.asarray(row, dtype=np.int64) % self.b
        for p, basis_row in zip(self._pivots, self._rows):
            if v[p]:
                v = (v - v[p] * basis_row) % self.b
        return v

    def insert(self, row: Sequence[int]) -> bool:
        """Add a row; returns False (basis unchanged) if it is dependent"""
        v = self.reduce(row)
        nz = np.flatnonzero(v)
        if nz.size == 0:
            return False
        p = int(nz[0])
        v = (v * pow(int(v[p]), self.b - 2, self.b)) % self.b
        self._pivots.append(p)
        self._rows.append(v)
        return True

    def pop(self) -> None:
        self._pivots.pop()
        self._rows.pop()
