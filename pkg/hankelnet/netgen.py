"""
Randomized generating-matrix designs
Hankel (HRD) and uniform (URD) random designs, linear matrix scrambling of Sobol' matrices
"""

import hashlib
import logging
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .gf import BaseLike, GfMatrix, PrimeBase

logger = logging.getLogger(__name__)

SOBOL_TABLE_RESOURCE = "data/sobol_directions.txt"
SOBOL_TABLE_SHA256 = "55d3c4cbfe9fa6d97cd0626380d2f2893ef65d8b5f4ae9bd4a2cf222c85cf886"
SOBOL_MAX_DIM = 50

Label = Union[str, int]


class DesignKind(str, Enum):
    """Randomized generating-matrix constructions"""
    HRD = "hrd"
    URD = "urd"
    LMS_SOBOL = "lms-sobol"

    @classmethod
    def parse(cls, value: Union[str, "DesignKind"]) -> "DesignKind":
        if isinstance(value, DesignKind):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"Unknown design kind: {value!r} (expected hrd, urd or lms-sobol)")


def _label_key(label: Label) -> int:
    digest = hashlib.blake2b(repr(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngSeed:
    """Master seed plus a label path; every path owns an independent stream"""

    master: int
    labels: Tuple[Label, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.master) < 2 ** 64:
            raise ValueError(f"Master seed must be a 64-bit unsigned integer, got {self.master}")
        object.__setattr__(self, "master", int(self.master))
        object.__setattr__(self, "labels", tuple(self.labels))

    def child(self, *labels: Label) -> "RngSeed":
        return RngSeed(self.master, self.labels + tuple(labels))

    def generator(self) -> np.random.Generator:
        sequence = np.random.SeedSequence(
            entropy=self.master,
            spawn_key=tuple(_label_key(label) for label in self.labels),
        )
        return np.random.Generator(np.random.PCG64(sequence))


def default_precision(b: BaseLike) -> int:
    """Largest E with b^E <= 2^53, so coordinates are exact float64 grid values"""
    b = int(PrimeBase(b))
    E = 0
    while b ** (E + 1) <= 2 ** 53:
        E += 1
    return E


@dataclass(frozen=True)
class HankelSeed:
    """Digit sequence u_1..u_{E+m-1} filling one Hankel matrix"""

    base: PrimeBase
    digits: Tuple[int, ...]

    def __post_init__(self):
        base = PrimeBase(self.base)
        digits = tuple(int(d) for d in self.digits)
        if any(d < 0 or d >= base for d in digits):
            raise ValueError(f"Hankel seed digits must lie in 0..{base - 1}")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "digits", digits)


@dataclass(frozen=True)
class NetDesign:
    """s generating matrices (E x m over F_b) and optional digital shifts"""

    base: PrimeBase
    m: int
    s: int
    E: int
    matrices: np.ndarray
    shifts: Optional[np.ndarray] = None
    kind: Optional[DesignKind] = None
    hankel_seeds: Optional[np.ndarray] = None

    def __post_init__(self):
        base = PrimeBase(self.base)
        errors = []
        if self.s < 1:
            errors.append(f"dimension s={self.s} must be >= 1")
        if not 1 <= self.m <= self.E:
            errors.append(f"need 1 <= m <= E, got m={self.m}, E={self.E}")
        matrices = np.array(self.matrices, dtype=np.int64, copy=True)
        if matrices.shape != (self.s, self.E, self.m):
            errors.append(f"matrices shape {matrices.shape} != {(self.s, self.E, self.m)}")
        elif matrices.size and (matrices.min() < 0 or matrices.max() >= base):
            errors.append(f"matrix entries must lie in 0..{base - 1}")
        shifts = None
        if self.shifts is not None:
            shifts = np.array(self.shifts, dtype=np.int64, copy=True)
            if shifts.shape != (self.s, self.E):
                errors.append(f"shifts shape {shifts.shape} != {(self.s, self.E)}")
            elif shifts.min() < 0 or shifts.max() >= base:
                errors.append(f"shift digits must lie in 0..{base - 1}")
        if errors:
            raise ValueError(f"Invalid NetDesign: {'; '.join(errors)}")

        matrices = matrices.astype(np.uint8)
        matrices.setflags(write=False)
        if shifts is not None:
            shifts = shifts.astype(np.uint8)
            shifts.setflags(write=False)
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "matrices", matrices)
        object.__setattr__(self, "shifts", shifts)
        if self.hankel_seeds is not None:
            seeds = np.array(self.hankel_seeds, dtype=np.uint8, copy=True)
            seeds.setflags(write=False)
            object.__setattr__(self, "hankel_seeds", seeds)

    @property
    def n_points(self) -> int:
        return int(self.base) ** self.m

    @property
    def generating_matrices(self) -> Tuple[GfMatrix, ...]:
        return tuple(GfMatrix(self.base, self.matrices[j]) for j in range(self.s))

    def matrix(self, j: int) -> GfMatrix:
        """Generating matrix of coordinate j (0-based)"""
        return GfMatrix(self.base, self.matrices[j])

    def without_shift(self) -> "NetDesign":
        return NetDesign(self.base, self.m, self.s, self.E, self.matrices,
                         None, self.kind, self.hankel_seeds)

    def with_shift(self, shifts: np.ndarray) -> "NetDesign":
        return NetDesign(self.base, self.m, self.s, self.E, self.matrices,
                         shifts, self.kind, self.hankel_seeds)

    def with_random_shift(self, rng: "RngSeed") -> "NetDesign":
        """Same matrices under a fresh uniform digital shift"""
        return self.with_shift(_draw_shifts(rng, int(self.base), self.E, self.s))

    def restrict(self, coords: Sequence[int]) -> "NetDesign":
        """Design projected onto the given 0-based coordinates"""
        idx = list(coords)
        shifts = None if self.shifts is None else self.shifts[idx]
        seeds = None if self.hankel_seeds is None else self.hankel_seeds[idx]
        return NetDesign(self.base, self.m, len(idx), self.E, self.matrices[idx],
                         shifts, self.kind, seeds)


def hankel_matrix(u: HankelSeed, E: int, m: int) -> GfMatrix:
    """E x m Hankel matrix with C[j, r] = u_{r+j-1} (1-based)"""
    if len(u.digits) != E + m - 1:
        raise ValueError(f"Hankel seed length {len(u.digits)} != E+m-1 = {E + m - 1}")
    digits = np.asarray(u.digits, dtype=np.uint8)
    idx = np.add.outer(np.arange(E), np.arange(m))
    return GfMatrix(u.base, digits[idx])


def _draw_shifts(rng: RngSeed, b: int, E: int, s: int) -> np.ndarray:
    return np.stack([
        rng.child("shift", j).generator().integers(0, b, size=E, dtype=np.uint8)
        for j in range(s)
    ])


def draw_hrd(rng: RngSeed, b: BaseLike, E: Optional[int], m: int, s: int,
             with_shift: bool = False) -> NetDesign:
    """Hankel random design: one uniform seed sequence per coordinate"""
    b = PrimeBase(b)
    E = default_precision(b) if E is None else E
    idx = np.add.outer(np.arange(E), np.arange(m))
    seeds = np.stack([
        rng.child("hrd", j).generator().integers(0, b, size=E + m - 1, dtype=np.uint8)
        for j in range(s)
    ])
    matrices = seeds[:, idx]
    shifts = _draw_shifts(rng, b, E, s) if with_shift else None
    return NetDesign(b, m, s, E, matrices, shifts, DesignKind.HRD, seeds)


def draw_urd(rng: RngSeed, b: BaseLike, E: Optional[int], m: int, s: int,
             with_shift: bool = False) -> NetDesign:
    """Uniform random design: every matrix entry independent uniform on F_b"""
    b = PrimeBase(b)
    E = default_precision(b) if E is None else E
    matrices = np.stack([
        rng.child("urd", j).generator().integers(0, b, size=(E, m), dtype=np.uint8)
        for j in range(s)
    ])
    shifts = _draw_shifts(rng, b, E, s) if with_shift else None
    return NetDesign(b, m, s, E, matrices, shifts, DesignKind.URD)


def _lms_entries(gen: np.random.Generator, b: int, E: int, lead: Tuple[int, ...] = ()) -> np.ndarray:
    shape = lead + (E, E)
    lower = np.tril(gen.integers(0, b, size=shape, dtype=np.uint8), k=-1)
    diag = gen.integers(1, b, size=lead + (E,), dtype=np.uint8)
    rows = np.arange(E)
    lower[..., rows, rows] = diag
    return lower


def lms_matrix(rng: RngSeed, b: BaseLike, E: int) -> GfMatrix:
    """Random E x E lower-triangular scrambling matrix with nonzero diagonal"""
    b = PrimeBase(b)
    if E < 1:
        raise ValueError(f"LMS matrix size must be >= 1, got {E}")
    return GfMatrix(b, _lms_entries(rng.generator(), b, E))


def apply_lms(M: GfMatrix, C: GfMatrix) -> GfMatrix:
    """Scrambled generating matrix M C over F_b"""
    if M.base != C.base:
        raise ValueError(f"Base mismatch: {M.base} vs {C.base}")
    if M.rows != M.cols or M.cols != C.rows:
        raise ValueError(f"Dimension mismatch: LMS {M.rows}x{M.cols}, matrix {C.rows}x{C.cols}")
    product = (M.entries.astype(np.int64) @ C.entries.astype(np.int64)) % M.base
    return GfMatrix(M.base, product)


@lru_cache(maxsize=1)
def _sobol_table_bytes() -> bytes:
    payload = resources.files("hankelnet").joinpath(SOBOL_TABLE_RESOURCE).read_bytes()
    checksum = hashlib.sha256(payload).hexdigest()
    if checksum != SOBOL_TABLE_SHA256:
        raise RuntimeError(f"Sobol' direction table checksum mismatch: {checksum}")
    return payload


def sobol_table_checksum() -> str:
    return hashlib.sha256(_sobol_table_bytes()).hexdigest()


@lru_cache(maxsize=1)
def load_sobol_table() -> Tuple[Tuple[int, int, Tuple[int, ...]], ...]:
    """Parse (d, a, (m_1..m_k)) rows of the embedded direction-number table"""
    rows = []
    for line_no, line in enumerate(_sobol_table_bytes().decode("ascii").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = [int(x) for x in line.split()]
        if len(fields) < 3:
            raise ValueError(f"Malformed direction-number line {line_no}: {line!r}")
        rows.append((fields[0], fields[1], tuple(fields[2:])))
    logger.debug(f"Loaded {len(rows)} Sobol' dimensions beyond the first")
    return tuple(rows)


def _direction_integers(a: int, initial: Tuple[int, ...], count: int) -> List[int]:
    degree = len(initial)
    mk = list(initial[:count])
    for k in range(degree, count):
        value = mk[k - degree] ^ (mk[k - degree] << degree)
        for i in range(1, degree):
            if (a >> (degree - 1 - i)) & 1:
                value ^= mk[k - i] << i
        mk.append(value)
    return mk


def sobol_matrices(m: int, s: int, E: Optional[int] = None) -> List[GfMatrix]:
    """Base-2 Sobol' generating matrices, E x m (rows below m are zero)"""
    if s > SOBOL_MAX_DIM:
        raise ValueError(f"extend direction-number table (requested s={s}, have {SOBOL_MAX_DIM})")
    E = m if E is None else E
    if E < m:
        raise ValueError(f"Precision E={E} smaller than m={m}")
    table = load_sobol_table()
    directions = [[1] * m]
    for _, a, initial in table[:s - 1]:
        directions.append(_direction_integers(a, initial, m))

    result = []
    for mk in directions:
        entries = np.zeros((E, m), dtype=np.uint8)
        for k, value in enumerate(mk):
            for i in range(k + 1):
                entries[i, k] = (value >> (k - i)) & 1
        result.append(GfMatrix(2, entries))
    return result


def sobol_design(m: int, s: int, E: Optional[int] = None) -> NetDesign:
    """Unscrambled Sobol' net as a NetDesign"""
    E = default_precision(2) if E is None else E
    matrices = np.stack([C.entries for C in sobol_matrices(m, s, E)])
    return NetDesign(2, m, s, E, matrices, None, None)


def draw_lms_sobol(rng: RngSeed, b: BaseLike, E: Optional[int], m: int, s: int,
                   with_shift: bool = False) -> NetDesign:
    """Sobol' matrices left-multiplied by independent LMS matrices"""
    b = PrimeBase(b)
    if b != 2:
        raise ValueError(f"LMS+Sobol' designs are base 2 only, got base {b}")
    E = default_precision(b) if E is None else E
    scrambled = []
    for j, C in enumerate(sobol_matrices(m, s, E)):
        M = lms_matrix(rng.child("lms", j), b, E)
        scrambled.append(apply_lms(M, C).entries)
    shifts = _draw_shifts(rng, b, E, s) if with_shift else None
    return NetDesign(b, m, s, E, np.stack(scrambled), shifts, DesignKind.LMS_SOBOL)


_DRAWERS = {
    DesignKind.HRD: draw_hrd,
    DesignKind.URD: draw_urd,
    DesignKind.LMS_SOBOL: draw_lms_sobol,
}


def draw_design(kind: Union[str, DesignKind], rng: RngSeed, b: BaseLike, E: Optional[int],
                m: int, s: int, with_shift: bool = False) -> NetDesign:
    """Dispatch to the drawer of the given design kind"""
    return _DRAWERS[DesignKind.parse(kind)](rng, b, E, m, s, with_shift)


def design_storage(kind: Union[str, DesignKind], m: int, E: int, s: int) -> int:
    """Digits kept per design: s(m+E-1) for HRD, s*m*E otherwise"""
    kind = DesignKind.parse(kind)
    if kind is DesignKind.HRD:
        return s * (m + E - 1)
    return s * m * E


def sample_matrix_rows(gen: np.random.Generator, kind: Union[str, DesignKind], b: BaseLike,
                       rows: int, m: int, s: int, count: int) -> np.ndarray:
    """Top `rows` rows of `count` independent designs, shape (count, s, rows, m)

    Only the leading rows enter dual-net conditions for short index vectors, and
    for all three constructions they have the same law as the leading rows of a
    full draw.
    """
    kind = DesignKind.parse(kind)
    b = int(PrimeBase(b))
    if kind is DesignKind.HRD:
        seeds = gen.integers(0, b, size=(count, s, rows + m - 1), dtype=np.uint8)
        return seeds[:, :, np.add.outer(np.arange(rows), np.arange(m))]
    if kind is DesignKind.URD:
        return gen.integers(0, b, size=(count, s, rows, m), dtype=np.uint8)
    if b != 2:
        raise ValueError(f"LMS+Sobol' designs are base 2 only, got base {b}")
    sobol = np.stack([C.entries for C in sobol_matrices(m, s, max(rows, m))])[:, :rows, :]
    scramblers = _lms_entries(gen, b, rows, (count, s)).astype(np.int64)
    return (np.einsum("tjil,jlr->tjir", scramblers, sobol.astype(np.int64)) % b).astype(np.uint8)
