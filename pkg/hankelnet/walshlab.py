"""
Walsh analysis of digital nets
Digit weights, Walsh characters, dual-net membership, t-parameters and
exact / Monte Carlo probability probes for dual-net events
"""

import cmath
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import FrozenSet, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import comb

from .gf import BaseLike, EchelonBasis, PrimeBase, rank_of_array
from .netgen import DesignKind, NetDesign, RngSeed, default_precision, sample_matrix_rows
from .pointgen import point_digits

logger = logging.getLogger(__name__)

IndexVector = Tuple[int, ...]
IndexLike = Union[int, Sequence[int]]

ENUMERATION_GUARD = 10 ** 6
EXACT_MAX_DIGITS = 32
MC_CHUNK = 20_000


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo frequency with its binomial standard error"""
    estimate: float
    stderr: float
    trials: int
    hits: int

    @classmethod
    def from_hits(cls, hits: int, trials: int) -> "McEstimate":
        p = hits / trials
        return cls(p, math.sqrt(p * (1.0 - p) / trials), trials, hits)


def as_index_vector(k: IndexLike) -> IndexVector:
    if isinstance(k, (int, np.integer)):
        k = (k,)
    vec = tuple(int(c) for c in k)
    if any(c < 0 for c in vec):
        raise ValueError(f"Index components must be non-negative, got {vec}")
    return vec


def _nonzero_index(k: IndexLike) -> IndexVector:
    vec = as_index_vector(k)
    if not any(vec):
        raise ValueError("index vector must have a nonzero component")
    return vec


def digits(k: int, b: BaseLike, length: Optional[int] = None) -> List[int]:
    """Base-b digits of k, least significant first (k_[1], k_[2], ...)"""
    b = int(PrimeBase(b))
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    out = []
    while k:
        k, d = divmod(k, b)
        out.append(d)
    if length is not None:
        if len(out) > length:
            raise ValueError(f"precision exceeded: {len(out)} digits > {length}")
        out.extend([0] * (length - len(out)))
    return out


def kappa(k: int, b: BaseLike) -> FrozenSet[int]:
    """1-based positions of the nonzero base-b digits of k"""
    return frozenset(i + 1 for i, d in enumerate(digits(k, b)) if d)


def _mu_scalar(k: int, alpha: int, b: BaseLike) -> int:
    return sum(sorted(kappa(k, b), reverse=True)[:alpha])


def mu_alpha(k: IndexLike, alpha: int, b: BaseLike) -> int:
    """Sum of the alpha largest nonzero-digit positions (summed over components)"""
    if alpha < 1:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    return sum(_mu_scalar(c, alpha, b) for c in as_index_vector(k))


def n_alpha(k: int, alpha: int, b: BaseLike) -> int:
    return min(alpha, len(kappa(k, b)))


def split_top_digits(k: int, alpha: int, b: BaseLike) -> Tuple[int, int]:
    """Split k into its alpha most significant nonzero digits and the remainder"""
    b = int(PrimeBase(b))
    top = sorted(kappa(k, b), reverse=True)[:alpha]
    k_plus = sum(((k // b ** (i - 1)) % b) * b ** (i - 1) for i in top)
    return k_plus, k - k_plus


def _grid_integer(x: float, b: int, E: int) -> int:
    if not 0.0 <= x < 1.0:
        raise ValueError(f"coordinate must lie in [0, 1), got {x}")
    scale = b ** E
    return min(round(Fraction(x) * scale), scale - 1)


def coordinate_digits(x: float, b: BaseLike, E: Optional[int] = None) -> List[int]:
    """x_[1..E], with x taken at the nearest point of the b^-E grid"""
    b = int(PrimeBase(b))
    E = default_precision(b) if E is None else E
    X = _grid_integer(float(x), b, E)
    return [(X // b ** (E - i)) % b for i in range(1, E + 1)]


def walsh_phase(k: IndexLike, x: Union[float, Sequence[float]], b: BaseLike,
                E: Optional[int] = None) -> int:
    """Exponent sum_j sum_i k_j[i] x_j[i] mod b of the Walsh character"""
    b = int(PrimeBase(b))
    E = default_precision(b) if E is None else E
    ks = as_index_vector(k)
    xs = (x,) if np.isscalar(x) else tuple(x)
    if len(ks) != len(xs):
        raise ValueError(f"index has {len(ks)} components, point has {len(xs)}")
    phase = 0
    for kj, xj in zip(ks, xs):
        kd = digits(kj, b)[:E]
        xd = coordinate_digits(xj, b, E)
        phase += sum(a * c for a, c in zip(kd, xd))
    return phase % b


def root_of_unity(b: int, phase: int) -> complex:
    phase %= b
    if phase == 0:
        return complex(1.0, 0.0)
    if 2 * phase == b:
        return complex(-1.0, 0.0)
    return cmath.exp(2j * math.pi * phase / b)


def walsh(k: IndexLike, x: Union[float, Sequence[float]], b: BaseLike,
          E: Optional[int] = None) -> complex:
    """k-th Walsh function at x; product over coordinates for vectors"""
    return root_of_unity(int(PrimeBase(b)), walsh_phase(k, x, b, E))


def _index_digit_matrix(k: IndexVector, b: int, rows: int) -> np.ndarray:
    try:
        return np.array([digits(c, b, rows) for c in k], dtype=np.int64)
    except ValueError:
        raise ValueError(f"precision exceeded: index {k} needs more than {rows} digits") from None


def dual_syndrome(design: NetDesign, k: IndexLike) -> np.ndarray:
    """sum_j C_j^T k_j over F_b, zero exactly when k lies in the dual net"""
    k = _nonzero_index(k)
    if len(k) != design.s:
        raise ValueError(f"index has {len(k)} components, design has s={design.s}")
    b = int(design.base)
    kd = _index_digit_matrix(k, b, design.E)
    return np.einsum("ji,jir->r", kd, design.matrices.astype(np.int64)) % b


def dual_contains(design: NetDesign, k: IndexLike) -> bool:
    return not dual_syndrome(design, k).any()


def character_mean(design: NetDesign, k: IndexLike) -> complex:
    """(1/N) sum_n wal_k(x_n) over the unshifted net: 1 on the dual, 0 off it"""
    k = _nonzero_index(k)
    if len(k) != design.s:
        raise ValueError(f"index has {len(k)} components, design has s={design.s}")
    b = int(design.base)
    kd = _index_digit_matrix(k, b, design.E)
    y = point_digits(design.without_shift()).astype(np.int64)
    phases = np.einsum("nji,ji->n", y, kd) % b
    counts = np.bincount(phases, minlength=b)
    total = sum(int(counts[p]) * root_of_unity(b, p) for p in range(b))
    return total / design.n_points


def _check_enumeration(m: int, s: int) -> None:
    size = comb(m + s - 1, s - 1, exact=True)
    if size > ENUMERATION_GUARD:
        raise ValueError(f"enumeration guard exceeded: C({m + s - 1},{s - 1}) = {size} > {ENUMERATION_GUARD}")


def _all_prefix_stacks_full_rank(mats: np.ndarray, b: int, total: int) -> bool:
    """True iff every composition q of `total` gives linearly independent stacked prefix rows"""
    s, E, m = mats.shape
    if total > m:
        return False
    basis = EchelonBasis(b, m)

    def visit(j: int, remaining: int) -> bool:
        if j == s - 1:
            if remaining > E:
                return True
            inserted = 0
            ok = True
            for i in range(remaining):
                if not basis.insert(mats[j, i]):
                    ok = False
                    break
                inserted += 1
            for _ in range(inserted):
                basis.pop()
            return ok
        inserted = 0
        ok = True
        limit = min(remaining, E)
        for q in range(limit + 1):
            if not visit(j + 1, remaining - q):
                ok = False
                break
            if q < limit:
                if not basis.insert(mats[j, q]):
                    ok = False
                    break
                inserted += 1
        for _ in range(inserted):
            basis.pop()
        return ok

    return visit(0, total)


def t_u_parameter(design: NetDesign, u: Sequence[int]) -> int:
    """t-parameter of the projection onto the 1-based coordinates in u"""
    coords = sorted(set(int(j) for j in u))
    if not coords or coords[0] < 1 or coords[-1] > design.s:
        raise ValueError(f"coordinate set {list(u)} must be a nonempty subset of 1..{design.s}")
    _check_enumeration(design.m, len(coords))
    mats = design.matrices[[j - 1 for j in coords]].astype(np.int64)
    b = int(design.base)
    for t in range(design.m + 1):
        if _all_prefix_stacks_full_rank(mats, b, design.m - t):
            logger.debug(f"t-parameter {t} for coordinates {coords} (b={b}, m={design.m})")
            return t
    return design.m


def t_parameter(design: NetDesign) -> int:
    return t_u_parameter(design, range(1, design.s + 1))


def _dual_map(ks: Sequence[IndexVector], b: int, m: int, kind: DesignKind,
              max_digits: int) -> np.ndarray:
    """Matrix of the linear map from design digit variables to the stacked syndromes"""
    s = len(ks[0])
    n = max(len(digits(c, b)) for k in ks for c in k)
    if n > max_digits:
        raise ValueError(f"precision exceeded: indices need {n} digits > {max_digits}")
    if kind is DesignKind.HRD:
        per_dim = n + m - 1
    elif kind is DesignKind.URD:
        per_dim = n * m
    else:
        raise ValueError(f"exact dual-net probabilities need an hrd or urd design, got {kind.value}")
    rows = np.zeros((len(ks) * m, s * per_dim), dtype=np.int64)
    for l, k in enumerate(ks):
        for j, c in enumerate(k):
            for i, d in enumerate(digits(c, b)):
                if not d:
                    continue
                for r in range(m):
                    col = j * per_dim + (i + r if kind is DesignKind.HRD else i * m + r)
                    rows[l * m + r, col] = (rows[l * m + r, col] + d) % b
    return rows


def joint_dual_prob_exact(k1: IndexLike, k2: IndexLike, b: BaseLike, m: int,
                          design_kind: Union[str, DesignKind],
                          max_digits: int = EXACT_MAX_DIGITS) -> float:
    """Pr(k1 and k2 both lie in the dual net) = b^-rank of the syndrome map"""
    b = int(PrimeBase(b))
    k1, k2 = _nonzero_index(k1), _nonzero_index(k2)
    if len(k1) != len(k2):
        raise ValueError(f"index vectors differ in length: {len(k1)} vs {len(k2)}")
    if k1 == k2:
        raise ValueError("joint probability needs two distinct index vectors")
    kind = DesignKind.parse(design_kind)
    r = rank_of_array(_dual_map([k1, k2], b, m, kind, max_digits), b)
    return float(Fraction(1, b ** r))


def dual_prob_exact(k: IndexLike, b: BaseLike, m: int, design_kind: Union[str, DesignKind],
                    max_digits: int = EXACT_MAX_DIGITS) -> float:
    """Marginal Pr(k in dual net) from the rank of the single-index map"""
    b = int(PrimeBase(b))
    kind = DesignKind.parse(design_kind)
    r = rank_of_array(_dual_map([_nonzero_index(k)], b, m, kind, max_digits), b)
    return float(Fraction(1, b ** r))


def event_probabilities(ks: Sequence[IndexLike], b: BaseLike, m: int,
                        design_kind: Union[str, DesignKind]) -> Tuple[np.ndarray, np.ndarray]:
    """Exact singles p_i and symmetric pair matrix p_ij for the events {k_i in dual}"""
    vectors = [_nonzero_index(k) for k in ks]
    singles = np.array([dual_prob_exact(k, b, m, design_kind) for k in vectors])
    pairs = np.zeros((len(vectors), len(vectors)))
    for i, j in combinations(range(len(vectors)), 2):
        pairs[i, j] = pairs[j, i] = joint_dual_prob_exact(vectors[i], vectors[j], b, m, design_kind)
    return singles, pairs


def _check_event_inputs(singles: Sequence[float], pairs) -> Tuple[np.ndarray, np.ndarray]:
    p = np.asarray(singles, dtype=np.float64)
    q = np.asarray(pairs, dtype=np.float64).reshape(len(p), len(p))
    if ((p < 0) | (p > 1)).any() or ((q < 0) | (q > 1)).any():
        raise ValueError("event probabilities must lie in [0, 1]")
    if not np.allclose(q, q.T):
        raise ValueError("pair probability matrix must be symmetric")
    return p, q


def chung_erdos_lower(singles: Sequence[float], pairs) -> float:
    """(sum p_i)^2 / (sum p_i + sum_{i!=j} p_ij)"""
    p, q = _check_event_inputs(singles, pairs)
    total = math.fsum(p)
    off_diagonal = math.fsum(q[~np.eye(len(p), dtype=bool)])
    denominator = total + off_diagonal
    if denominator == 0:
        return 0.0
    return total * total / denominator


def _find(parent: List[int], i: int) -> int:
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


def hunter_upper(singles: Sequence[float], pairs) -> float:
    """sum p_i minus the weight of a maximum spanning tree on the pair graph"""
    p, q = _check_event_inputs(singles, pairs)
    if len(p) == 0:
        raise ValueError("need at least one event")
    edges = sorted(((q[i, j], i, j) for i, j in combinations(range(len(p)), 2)), reverse=True)
    parent = list(range(len(p)))
    tree = []
    for weight, i, j in edges:
        ri, rj = _find(parent, i), _find(parent, j)
        if ri != rj:
            parent[ri] = rj
            tree.append(weight)
    return math.fsum(p) - math.fsum(tree)


def _mc_hits(rng: RngSeed, ks: Sequence[IndexVector], b: int, m: int, s: int,
             kind: DesignKind, trials: int, require_all: bool = False) -> int:
    rows = max(len(digits(c, b)) for k in ks for c in k)
    kd = np.stack([_index_digit_matrix(k, b, rows) for k in ks])
    gen = rng.generator()
    hits = 0
    done = 0
    while done < trials:
        count = min(MC_CHUNK, trials - done)
        mats = sample_matrix_rows(gen, kind, b, rows, m, s, count).astype(np.int64)
        syndromes = np.einsum("tjir,lji->tlr", mats, kd) % b
        in_dual = ~syndromes.any(axis=2)
        hits += int((in_dual.all(axis=1) if require_all else in_dual.any(axis=1)).sum())
        done += count
    return hits


def _check_trials(trials: int) -> None:
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")


def mc_dual_prob(rng: RngSeed, k: IndexLike, b: BaseLike, m: int, s: int,
                 design_kind: Union[str, DesignKind], trials: int) -> McEstimate:
    """Frequency of k in the dual net over independently drawn designs"""
    _check_trials(trials)
    b = int(PrimeBase(b))
    k = _nonzero_index(k)
    if len(k) != s:
        raise ValueError(f"index has {len(k)} components, expected s={s}")
    hits = _mc_hits(rng, [k], b, m, s, DesignKind.parse(design_kind), trials)
    return McEstimate.from_hits(hits, trials)


def mc_union_prob(rng: RngSeed, ks: Sequence[IndexLike], b: BaseLike, m: int, s: int,
                  design_kind: Union[str, DesignKind], trials: int) -> McEstimate:
    """Frequency of at least one k_i in the dual net"""
    _check_trials(trials)
    b = int(PrimeBase(b))
    vectors = [_nonzero_index(k) for k in ks]
    if not vectors or any(len(k) != s for k in vectors):
        raise ValueError(f"need one or more index vectors of length s={s}")
    hits = _mc_hits(rng, vectors, b, m, s, DesignKind.parse(design_kind), trials)
    return McEstimate.from_hits(hits, trials)


def mc_joint_dual_prob(rng: RngSeed, k1: IndexLike, k2: IndexLike, b: BaseLike, m: int, s: int,
                       design_kind: Union[str, DesignKind], trials: int) -> McEstimate:
    """Frequency of k1 and k2 both in the dual net"""
    _check_trials(trials)
    b = int(PrimeBase(b))
    vectors = [_nonzero_index(k1), _nonzero_index(k2)]
    if any(len(k) != s for k in vectors):
        raise ValueError(f"index vectors must have length s={s}")
    hits = _mc_hits(rng, vectors, b, m, s, DesignKind.parse(design_kind), trials, require_all=True)
    return McEstimate.from_hits(hits, trials)


def lms_dual_prob_bound(mu1_vec: Sequence[int], m: int, b: BaseLike, t_u: int, u_size: int) -> float:
    """Upper bound on Pr(k in dual) under linear matrix scrambling"""
    b = int(PrimeBase(b))
    if t_u < 0 or u_size < 1:
        raise ValueError(f"need t_u >= 0 and |u| >= 1, got t_u={t_u}, |u|={u_size}")
    total = sum(mu1_vec)
    if total <= m - t_u:
        return 0.0
    if max(mu1_vec) > m:
        return float(b) ** -m
    if total <= m - t_u + u_size:
        return min(float(b) ** (-m + t_u + u_size - 1) / float(b - 1) ** (u_size - 1), 1.0)
    return float(b) ** (-m + t_u)


def lms_dual_prob_exact(design: NetDesign, k: IndexLike) -> float:
    """Exact Pr(k in dual) after scrambling the design's matrices with random LMS

    Scrambling maps k_j to a uniform index with the same leading digit position,
    so the probability is the dual-net fraction of that index class.
    """
    k = _nonzero_index(k)
    if len(k) != design.s:
        raise ValueError(f"index has {len(k)} components, design has s={design.s}")
    b = int(design.base)
    support = [j for j, c in enumerate(k) if c]
    tops = [max(kappa(k[j], b)) for j in support]
    if max(tops) > design.E:
        raise ValueError(f"precision exceeded: leading digit position {max(tops)} > E={design.E}")
    radices = []
    for top in tops:
        radices.extend([b] * (top - 1) + [b - 1])
    size = math.prod(radices)
    if size > ENUMERATION_GUARD:
        raise ValueError(f"enumeration guard exceeded: {size} index vectors > {ENUMERATION_GUARD}")

    flat = np.arange(size, dtype=np.int64)
    columns = []
    for radix in radices:
        flat, digit = np.divmod(flat, radix)
        columns.append(digit)
    enumerated = np.stack(columns, axis=1)

    mats = design.matrices.astype(np.int64)
    syndromes = np.zeros((size, design.m), dtype=np.int64)
    offset = 0
    for j, top in zip(support, tops):
        block = enumerated[:, offset:offset + top].copy()
        block[:, -1] += 1
        syndromes += block @ mats[j, :top, :]
        offset += top
    hits = int((~(syndromes % b).any(axis=1)).sum())
    return hits / size


def rank_deficiency_bound(q_total: int, m: int, b: BaseLike) -> float:
    """Union bound (b^|q| - 1) b^-m on a rank-deficient prefix stack"""
    b = int(PrimeBase(b))
    return float(Fraction(b ** q_total - 1, b ** m))


def t_tail_bound(m: int, s: int, b: BaseLike, t0: int) -> float:
    """Bound on Pr(t > t0) for HRD/URD via the union over compositions of m - t0"""
    b = int(PrimeBase(b))
    if t0 >= m:
        return 0.0
    count = comb(m - t0 + s - 1, s - 1, exact=True)
    return min(1.0, float(count * (Fraction(1, b ** t0) - Fraction(1, b ** m))))
