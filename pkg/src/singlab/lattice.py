"""Unimodular lattices in R^d, primitive sublattices and their sup-norm covolumes.

The canonical norm is the sup norm on coordinates (and, on wedges, the max over
Plücker coordinates).  Euclidean norms are used only inside LLL and for the
Euclidean variant of the intersection/sum inequality.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from itertools import chain, combinations, islice

import numpy as np

from . import intmat
from .errors import (
    BudgetExceeded,
    DimensionMismatch,
    GradeOutOfRange,
    NotPrimitive,
    NotUnimodular,
    NumericalInstability,
    RadiusOverflow,
    RankDeficient,
    ValidationError,
)
from .exterior import MAX_DIM, WedgeVector, compound, index_sets, wedge_coords
from .weights import parse_number

DET_TOL = 1e-9
MARGIN = 1e-9


# ---------------------------------------------------------------------------
# flows


def _iroot(n, k):
    """Exact integer k-th root of n >= 0, or None."""
    if n < 2:
        return n
    x = int(round(n ** (1.0 / k))) if n.bit_length() < 1000 else 1 << (n.bit_length() // k + 1)
    # Newton iteration from above, then verify
    x = max(x, 1) + 1
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            break
        x = y
    for c in (x - 1, x, x + 1):
        if c >= 0 and c**k == n:
            return c
    return None


def exact_power(t, e):
    """t**e as a Fraction when both are rational and the power is rational, else None."""
    if not isinstance(e, Fraction):
        return None
    try:
        t = Fraction(t) if not isinstance(t, float) else parse_number(t)
    except (TypeError, ValueError):
        return None
    if not isinstance(t, Fraction) or t <= 0:
        return None
    p, q = e.numerator, e.denominator
    num, den = _iroot(t.numerator, q), _iroot(t.denominator, q)
    if num is None or den is None:
        return None
    return Fraction(num, den) ** p


def diag_flow(weights, t):
    """The diagonal matrix g_t = diag(t^a_1, ..., t^a_m, t^-b_1, ..., t^-b_n).

    Returns an object array of Fractions when every power is exactly rational
    (e.g. t = tau**k with tau a perfect power for the weight denominators),
    otherwise a float array.
    """
    exps = weights.exponents()
    exact = [exact_power(t, e) for e in exps]
    if all(x is not None for x in exact):
        g = np.zeros((weights.d, weights.d), dtype=object)
        g[:] = Fraction(0)
        for i, x in enumerate(exact):
            g[i, i] = x
        return g
    tf = float(t)
    return np.diag([tf ** float(e) for e in exps])


def flow_exponent_base(weights):
    """Smallest integer L such that t = tau**L makes every g_t entry rational for integer tau."""
    dens = [x.denominator for x in weights.exponents() if isinstance(x, Fraction)]
    return reduce(lambda a, b: a * b // math.gcd(a, b), dens, 1)


def unipotent(theta):
    """u(theta) = [[I_m, theta], [0, I_n]]; exact when theta holds Fractions/ints."""
    theta = np.asarray(theta, dtype=object)
    if theta.ndim != 2:
        raise DimensionMismatch("theta must be an m x n matrix")
    m, n = theta.shape
    exact = all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in theta.flat)
    if exact:
        u = np.zeros((m + n, m + n), dtype=object)
        u[:] = Fraction(0)
        for i in range(m + n):
            u[i, i] = Fraction(1)
        for i in range(m):
            for j in range(n):
                u[i, m + j] = Fraction(theta[i, j])
        return u
    u = np.eye(m + n)
    u[:m, m:] = theta.astype(float)
    return u


def _is_exact_matrix(M):
    M = np.asarray(M)
    return M.dtype == object and all(isinstance(x, (int, Fraction)) for x in M.flat)


def _to_float(M):
    return np.array(np.asarray(M, dtype=object).tolist(), dtype=float) if np.asarray(M).dtype == object else np.asarray(M, dtype=float)


# ---------------------------------------------------------------------------
# lattices


@dataclass(frozen=True, eq=False)
class Lattice:
    """Lattice spanned by the columns of ``basis`` (|det| = 1).

    ``exact`` holds the same basis as Fractions when it is known exactly.
    """

    basis: np.ndarray
    exact: np.ndarray = None
    det_log: float = field(default=0.0)

    @classmethod
    def from_matrix(cls, M, check=True):
        M = np.asarray(M)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"basis must be square, got {M.shape}")
        if M.shape[0] > MAX_DIM:
            raise DimensionMismatch(f"d={M.shape[0]} exceeds the supported maximum {MAX_DIM}")
        exact = None
        if _is_exact_matrix(M):
            exact = np.vectorize(Fraction, otypes=[object])(M)
            det = Fraction(intmat_det_fraction(exact))
            if check and abs(det) != 1:
                raise NotUnimodular(f"|det| = {float(abs(det))} != 1")
            basis = _to_float(exact)
            det_log = 0.0
        else:
            basis = np.asarray(M, dtype=float)
            sign, det_log = np.linalg.slogdet(basis)
            if check and (sign == 0 or abs(det_log) > DET_TOL):
                raise NotUnimodular(f"|det| = {math.exp(det_log) if sign else 0.0} != 1")
        return cls(basis, exact, float(det_log))

    @classmethod
    def standard(cls, d):
        M = np.zeros((d, d), dtype=object)
        M[:] = Fraction(0)
        for i in range(d):
            M[i, i] = Fraction(1)
        return cls.from_matrix(M)

    @property
    def d(self):
        return self.basis.shape[0]

    def transform(self, g):
        """The lattice g L."""
        g = np.asarray(g)
        if self.exact is not None and _is_exact_matrix(g):
            return Lattice.from_matrix(g.dot(self.exact))
        return Lattice.from_matrix(_to_float(g) @ self.basis)

    def to_json(self):
        if self.exact is not None:
            return {"basis": [[str(x) for x in row] for row in self.exact]}
        return {"basis": self.basis.tolist()}

    @classmethod
    def from_json(cls, obj):
        rows = obj["basis"] if isinstance(obj, dict) else obj
        if all(isinstance(x, str) for row in rows for x in row):
            parsed = [[parse_number(x) for x in row] for row in rows]
            if all(isinstance(x, Fraction) for row in parsed for x in row):
                return cls.from_matrix(np.array(parsed, dtype=object))
            return cls.from_matrix(np.array(parsed, dtype=float))
        return cls.from_matrix(np.array(rows, dtype=float))


def intmat_det_fraction(M):
    """Exact determinant of a Fraction matrix by Gaussian elimination."""
    A = [[Fraction(x) for x in row] for row in np.asarray(M, dtype=object)]
    n = len(A)
    det = Fraction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if A[i][k] != 0), None)
        if p is None:
            return Fraction(0)
        if p != k:
            A[k], A[p] = A[p], A[k]
            det = -det
        det *= A[k][k]
        for i in range(k + 1, n):
            f = A[i][k] / A[k][k]
            if f:
                A[i] = [x - f * y for x, y in zip(A[i], A[k])]
    return det


def lattice_family(weights, theta, t, x0=None):
    """g_t u(theta) x0, with x0 = Z^d by default."""
    x0 = Lattice.standard(weights.d) if x0 is None else x0
    return x0.transform(np.asarray(diag_flow(weights, t)).dot(unipotent(theta)) if _flow_exact(weights, t, theta)
                        else _to_float(diag_flow(weights, t)) @ _to_float(unipotent(theta)))


def _flow_exact(weights, t, theta):
    return _is_exact_matrix(diag_flow(weights, t)) and _is_exact_matrix(unipotent(theta))


# ---------------------------------------------------------------------------
# reduction and enumeration


def lll_reduce(B, delta=0.99, max_iter=100000):
    """LLL-reduce the columns of B (Euclidean).  Returns (reduced, U) with reduced = B @ U."""
    B = np.array(B, dtype=float)
    k_dim = B.shape[1]
    U = np.eye(k_dim, dtype=np.int64)
    if k_dim <= 1:
        return B, U
    Q, R = np.linalg.qr(B)
    k = 1
    it = 0
    while k < k_dim:
        it += 1
        if it > max_iter:
            raise NumericalInstability("LLL did not terminate")
        for j in range(k - 1, -1, -1):
            if R[j, j] == 0:
                raise NumericalInstability("basis is numerically singular")
            q = round(R[j, k] / R[j, j])
            if q:
                if abs(q) > 2**52:
                    raise NumericalInstability("reduction coefficient overflow")
                B[:, k] -= q * B[:, j]
                R[:, k] -= q * R[:, j]
                U[:, k] -= q * U[:, j]
        mu = R[k - 1, k] / R[k - 1, k - 1]
        if R[k, k] ** 2 >= (delta - mu * mu) * R[k - 1, k - 1] ** 2:
            k += 1
        else:
            B[:, [k - 1, k]] = B[:, [k, k - 1]]
            U[:, [k - 1, k]] = U[:, [k, k - 1]]
            Q, R = np.linalg.qr(B)
            k = max(k - 1, 1)
    return B, U


def _enumerate(R, radius_sq, visit, budget):
    """Fincke-Pohst enumeration of nonzero x with ||R x||^2 <= radius_sq().

    ``R`` is upper triangular.  ``visit(x)`` is called for each candidate and
    may shrink the radius through the closure ``radius_sq``.
    """
    k = R.shape[0]
    diag = np.abs(np.diag(R))
    x = [0] * k
    count = 0

    def rec(i, partial):
        nonlocal count
        c = -sum(R[i, j] * x[j] for j in range(i + 1, k)) / R[i, i]
        rem = radius_sq() - partial
        if rem < 0:
            return
        half = math.sqrt(rem) / diag[i] + 1e-12
        lo, hi = math.ceil(c - half), math.floor(c + half)
        for xi in range(lo, hi + 1):
            x[i] = xi
            y = R[i, i] * xi + sum(R[i, j] * x[j] for j in range(i + 1, k))
            p = partial + y * y
            if p > radius_sq() * (1 + 1e-12):
                continue
            if i == 0:
                if any(x):
                    count += 1
                    if count > budget:
                        raise BudgetExceeded(f"enumeration visited more than {budget} points")
                    visit(tuple(x))
            else:
                rec(i - 1, p)
        x[i] = 0

    rec(k - 1, 0.0)


@dataclass
class Reduced:
    lattice: Lattice
    basis: np.ndarray  # float, accurate
    U: np.ndarray      # original = reduced @ U^-1, i.e. reduced = original @ U
    R: np.ndarray


def reduce_lattice(L):
    red, U = lll_reduce(L.basis)
    if L.exact is not None:
        red = _to_float(L.exact.dot(U.astype(object)))
    _, R = np.linalg.qr(red)
    return Reduced(L, red, U, R)


def shortest_vector(L, budget=10**6):
    """A nonzero vector of L with minimal sup norm, its norm and its integer coordinates."""
    red = reduce_lattice(L)
    B = red.basis
    d = L.d
    norms = np.max(np.abs(B), axis=0)
    j = int(np.argmin(norms))
    best = {"norm": float(norms[j]), "x": tuple(int(i == j) for i in range(d))}

    def radius_sq():
        return d * best["norm"] ** 2 * (1 + MARGIN)

    def visit(x):
        v = B @ np.array(x, dtype=float)
        s = float(np.max(np.abs(v)))
        if s < best["norm"]:
            best["norm"], best["x"] = s, x

    if not np.all(np.isfinite(B)) or np.linalg.cond(B) > 1e15:
        raise NumericalInstability("basis condition number overflow")
    _enumerate(red.R, radius_sq, visit, budget)
    x = np.array(best["x"], dtype=np.int64)
    coeffs = red.U @ x
    vec = B @ x.astype(float)
    return vec, best["norm"], coeffs


def lambda1(L):
    return shortest_vector(L)[1]


def lattice_points(L, radius, budget=200000, return_vectors=False):
    """Integer coordinates (w.r.t. L's basis) of all nonzero points with sup norm <= radius, one per +/- pair."""
    red = reduce_lattice(L)
    B = red.basis
    d = L.d
    found = []
    limit = radius * (1 + MARGIN)

    def visit(x):
        v = B @ np.array(x, dtype=float)
        if np.max(np.abs(v)) <= limit:
            last = next(c for c in reversed(x) if c)
            if last > 0:
                found.append(x)

    _enumerate(red.R, lambda: d * limit**2, visit, budget)
    X = np.array(found, dtype=np.int64).reshape(-1, d)
    coords = (red.U @ X.T).T
    if return_vectors:
        return coords, (B @ X.T.astype(float)).T
    return coords


# ---------------------------------------------------------------------------
# sublattices


@dataclass(frozen=True, eq=False)
class Sublattice:
    """Subgroup of ``parent`` spanned by the integer coordinate columns ``coords`` (d x l)."""

    parent: Lattice
    coords: np.ndarray

    def __post_init__(self):
        C = np.asarray(self.coords, dtype=object)
        if C.ndim == 1:
            C = C[:, None]
        if C.shape[0] != self.parent.d:
            raise DimensionMismatch("coordinate matrix rows must equal the ambient dimension")
        object.__setattr__(self, "coords", np.array([[int(x) for x in row] for row in C], dtype=object).reshape(C.shape))

    @property
    def rank(self):
        return self.coords.shape[1]

    def real_basis(self):
        P = self.parent
        if P.exact is not None:
            return _to_float(P.exact.dot(self.coords))
        return P.basis @ self.coords.astype(float)

    def wedge(self):
        if self.rank == 0:
            return WedgeVector(self.parent.d, 0, np.ones(1))
        return WedgeVector.from_vectors(self.real_basis())

    def is_primitive(self):
        return intmat.is_primitive(self.coords)

    def saturated(self):
        return Sublattice(self.parent, intmat.saturate(self.coords))


def sublattice_norm(S, norm="sup"):
    """||S||: the norm of the wedge of a basis of S; ||{0}|| = 1."""
    if S.rank == 0:
        return 1.0
    if intmat.rank(S.coords) < S.rank:
        raise RankDeficient(f"coordinate matrix has rank < {S.rank}")
    w = S.wedge()
    if norm == "sup":
        return w.sup_norm()
    if norm == "euclid":
        return w.euclidean_norm()
    raise ValidationError(f"unknown norm {norm!r}")


@dataclass(frozen=True)
class RadiusPolicy:
    """Search radius schedule for the subset-based covolume search."""

    initial: float = None
    growth: float = 2.0
    cap_factor: float = 2.0**20
    stable_rounds: int = 2
    max_points: int = 300


def _wedge_exterior_map(omega, d, l):
    """Integer matrix of x -> x ^ omega from Z^d to the grade l+1 part."""
    pos = {I: k for k, I in enumerate(index_sets(d, l))}
    rows = index_sets(d, l + 1)
    A = [[0] * d for _ in rows]
    for r, K in enumerate(rows):
        for p, i in enumerate(K):
            rest = K[:p] + K[p + 1:]
            A[r][i] += (-1) ** p * omega[pos[rest]]
    return A


def _phi_wedge(L, l, budget):
    d = L.d
    red = reduce_lattice(L)
    B = red.basis
    # start from basis subsets of the reduced basis (all primitive)
    best = {"norm": min(np.max(np.abs(wedge_coords(B[:, list(J)]))) for J in combinations(range(d), l))}
    C = compound(B, l)
    Cred, W = lll_reduce(C)
    _, R = np.linalg.qr(Cred)
    N = C.shape[0]
    Bu = red.U

    def radius_sq():
        return N * best["norm"] ** 2 * (1 + MARGIN)

    def visit(z):
        v = Cred @ np.array(z, dtype=float)
        s = float(np.max(np.abs(v)))
        if s >= best["norm"]:
            return
        omega = [int(c) for c in W @ np.array(z, dtype=np.int64)]
        if reduce(math.gcd, (abs(c) for c in omega), 0) != 1:
            return
        A = _wedge_exterior_map(omega, d, l)
        if intmat.rank(A) != d - l:
            return
        best["norm"] = s

    _enumerate(R, radius_sq, visit, budget)
    return best["norm"]


def _phi_subsets(L, l, policy, chunk=20000):
    _, lam, _ = shortest_vector(L)
    R = policy.initial or lam
    cap = policy.cap_factor * lam
    history = []
    while True:
        if R > cap:
            raise RadiusOverflow(f"radius {R} exceeded cap {cap} without stabilizing")
        P, V = lattice_points(L, R, budget=10**6, return_vectors=True)
        keep = np.gcd.reduce(np.abs(P), axis=1) == 1 if len(P) else np.zeros(0, bool)
        P, V = P[keep], V[keep]
        if len(P) > policy.max_points:
            raise RadiusOverflow(f"{len(P)} candidate vectors at radius {R} exceed max_points")
        best = math.inf
        combos = combinations(range(len(P)), l)
        while True:
            idx = np.fromiter(chain.from_iterable(islice(combos, chunk)), dtype=np.int64)
            if idx.size == 0:
                break
            idx = idx.reshape(-1, l)
            real = np.abs(wedge_coords(np.moveaxis(V[idx], 1, 2))).max(axis=1)
            # index of the span in its saturation = gcd of the integer Plucker coordinates
            ints = np.rint(wedge_coords(np.moveaxis(P[idx].astype(float), 1, 2))).astype(np.int64)
            g = np.gcd.reduce(np.abs(ints), axis=1)
            ok = g > 0
            if np.any(ok):
                best = min(best, float(np.min(real[ok] / g[ok])))
            if idx.shape[0] < chunk:
                break
        value = 1.0 / best if best < math.inf else 0.0
        history.append(value)
        if len(history) >= policy.stable_rounds and value > 0 and \
                all(abs(h - value) <= 1e-9 * value for h in history[-policy.stable_rounds:]):
            return value
        R *= policy.growth


def phi(L, l, policy=None, method="wedge", budget=10**6):
    """phi_l(L): the largest 1/||L_l|| over primitive rank-l subgroups L_l.

    ``method="wedge"`` enumerates decomposable primitive vectors of the grade-l
    lattice and is exact; ``method="subsets"`` saturates l-subsets of short
    vectors, doubling the radius until the value is stable.
    """
    d = L.d
    if not 0 <= l <= d:
        raise GradeOutOfRange(f"l={l} outside 0..{d}")
    if l in (0, d):
        return 1.0
    if l == 1:
        return 1.0 / shortest_vector(L, budget)[1]
    if method == "wedge":
        return 1.0 / _phi_wedge(L, l, budget)
    if method == "subsets":
        return _phi_subsets(L, l, policy or RadiusPolicy())
    raise ValidationError(f"unknown method {method!r}")


def emm_defect(L, S1, S2, norm="sup", saturate_sum=True):
    """(||S1 & S2|| ||S1 + S2||) / (||S1|| ||S2||) for primitive S1, S2."""
    for S in (S1, S2):
        if not S.is_primitive():
            raise NotPrimitive("sublattice is not primitive")
    inter = Sublattice(L, intmat.intersection(S1.coords, S2.coords))
    total = Sublattice(L, intmat.subgroup_sum(S1.coords, S2.coords, saturated=saturate_sum))
    return (sublattice_norm(inter, norm) * sublattice_norm(total, norm)) / (
        sublattice_norm(S1, norm) * sublattice_norm(S2, norm))


def random_lattice(d, rng, spread=1.0):
    """A random unimodular lattice: a Gaussian basis rescaled to determinant 1,
    then pushed into the cusp by a random diagonal with log-scales of size ``spread``."""
    G = rng.standard_normal((d, d))
    det = np.linalg.det(G)
    if det < 0:
        G[:, 0] = -G[:, 0]
        det = -det
    G /= det ** (1.0 / d)
    s = rng.normal(0.0, spread, d)
    s -= s.mean()
    return Lattice.from_matrix(np.diag(np.exp(s)) @ G)


def random_primitive_sublattice(L, l, rng, entry_bound=3):
    """A primitive rank-l sublattice of L from small random integer coordinates."""
    d = L.d
    while True:
        C = rng.integers(-entry_bound, entry_bound + 1, size=(d, l))
        if intmat.rank(np.array(C, dtype=object)) == l:
            return Sublattice(L, intmat.saturate(np.array(C, dtype=object)))
