"""Exterior powers of R^d in the e_I basis.

Index sets are 0-based sorted tuples, ordered lexicographically as produced by
``itertools.combinations(range(d), l)``.  Coordinates of ``M`` acting on grade
``l`` are l x l minors with rows and columns taken in increasing order, so
``(M v)_I = sum_J det(M[I, J]) v_J``.
"""

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

from .errors import DimensionMismatch, GradeOutOfRange, IndexOutOfRange

MAX_DIM = 8


@lru_cache(maxsize=None)
def index_sets(d, l):
    return tuple(combinations(range(d), l))


@lru_cache(maxsize=None)
def _position(d, l):
    return {I: k for k, I in enumerate(index_sets(d, l))}


@lru_cache(maxsize=None)
def plus_mask(d, l, m):
    """Boolean mask over grade-l index sets: True where #(I & {0..m-1}) = min(l, m)."""
    if not 1 <= l <= d - 1:
        raise GradeOutOfRange(f"grade {l} outside 1..{d - 1}")
    target = min(l, m)
    mask = np.array([sum(1 for i in I if i < m) == target for I in index_sets(d, l)])
    mask.setflags(write=False)
    return mask


@dataclass(frozen=True, eq=False)
class WedgeVector:
    d: int
    l: int
    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.shape != (len(index_sets(self.d, self.l)),):
            raise DimensionMismatch(f"expected {len(index_sets(self.d, self.l))} coordinates, got {coords.shape}")
        object.__setattr__(self, "coords", coords)

    @classmethod
    def basis(cls, d, I):
        I = tuple(sorted(I))
        if len(set(I)) != len(I) or any(not 0 <= i < d for i in I):
            raise IndexOutOfRange(f"bad index set {I} for d={d}")
        coords = np.zeros(len(index_sets(d, len(I))))
        coords[_position(d, len(I))[I]] = 1.0
        return cls(d, len(I), coords)

    @classmethod
    def from_vectors(cls, vectors):
        """Wedge of the columns of a d x l matrix."""
        V = np.asarray(vectors, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        d, l = V.shape
        return cls(d, l, wedge_coords(V))

    def __getitem__(self, I):
        return self.coords[_position(self.d, self.l)[tuple(I)]]

    def __add__(self, other):
        if (self.d, self.l) != (other.d, other.l):
            raise DimensionMismatch("grades differ")
        return WedgeVector(self.d, self.l, self.coords + other.coords)

    def __sub__(self, other):
        return self + WedgeVector(other.d, other.l, -other.coords)

    def __mul__(self, s):
        return WedgeVector(self.d, self.l, self.coords * s)

    __rmul__ = __mul__

    def sup_norm(self):
        return float(np.max(np.abs(self.coords))) if self.coords.size else 0.0

    def euclidean_norm(self):
        return float(np.linalg.norm(self.coords))

    def allclose(self, other, atol=1e-12):
        return (self.d, self.l) == (other.d, other.l) and np.allclose(self.coords, other.coords, atol=atol, rtol=0)

    def __repr__(self):
        terms = [f"{c:+g} e{''.join(str(i + 1) for i in I)}"
                 for I, c in zip(index_sets(self.d, self.l), self.coords) if c != 0]
        return f"WedgeVector(d={self.d}, l={self.l}: {' '.join(terms) or '0'})"


def wedge_coords(V):
    """Plücker coordinates (all maximal minors) of the d x l matrix V, batched over leading axes."""
    V = np.asarray(V, dtype=float)
    d, l = V.shape[-2:]
    if l == 0:
        return np.ones(V.shape[:-2] + (1,))
    rows = np.array(index_sets(d, l))
    sub = V[..., rows, :]  # (..., N, l, l)
    return np.linalg.det(sub)


@lru_cache(maxsize=None)
def _minor_index(d, l):
    sets = np.array(index_sets(d, l))
    N = len(sets)
    rows = np.repeat(sets, N, axis=0)
    cols = np.tile(sets, (N, 1))
    return rows, cols, N


def compound(M, l):
    """The l-th compound matrix of M (batched over leading axes): entry (I, J) is det M[I, J]."""
    M = np.asarray(M, dtype=float)
    d = M.shape[-1]
    if M.shape[-2] != d:
        raise DimensionMismatch(f"matrix must be square, got {M.shape[-2:]}")
    if l == 0:
        return np.ones(M.shape[:-2] + (1, 1))
    rows, cols, N = _minor_index(d, l)
    sub = M[..., rows[:, :, None], cols[:, None, :]]  # (..., N*N, l, l)
    return np.linalg.det(sub).reshape(M.shape[:-2] + (N, N))


def wedge_action(M, v):
    M = np.asarray(M, dtype=float)
    if M.shape != (v.d, v.d):
        raise DimensionMismatch(f"matrix {M.shape} does not act on R^{v.d}")
    return WedgeVector(v.d, v.l, compound(M, v.l) @ v.coords)


def project_plus(v, m):
    mask = plus_mask(v.d, v.l, m)
    return WedgeVector(v.d, v.l, np.where(mask, v.coords, 0.0))


def project_minus(v, m):
    mask = plus_mask(v.d, v.l, m)
    return WedgeVector(v.d, v.l, np.where(mask, 0.0, v.coords))


def gt_wedge_exponent(weights, I):
    """Exponent e with g_t e_I = t^e e_I (0-based I)."""
    m = weights.m
    return sum(weights.a[i] for i in I if i < m) - sum(weights.b[i - m] for i in I if i >= m)


def min_plus_exponent(weights, l):
    d, m = weights.d, weights.m
    if not 1 <= l <= d - 1:
        raise IndexOutOfRange(f"l={l} outside 1..{d - 1}")
    mask = plus_mask(d, l, m)
    return min(gt_wedge_exponent(weights, I) for I, keep in zip(index_sets(d, l), mask) if keep)


def operator_norm(g, grades=None):
    """Operator norm of g on V = sum of all grades, each with the max-coordinate norm.

    For the max norm the operator norm of a matrix is its largest absolute row sum.
    """
    g = np.asarray(g, dtype=float)
    d = g.shape[-1]
    if grades is None:
        grades = range(1, d + 1)
    return max(float(np.max(np.sum(np.abs(compound(g, l)), axis=-1))) for l in grades)
