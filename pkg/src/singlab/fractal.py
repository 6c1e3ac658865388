"""Equal-ratio IFSs on R, product fractals in M_{m x n}(R), Bernoulli sampling and cell arithmetic.

Each IFS is normalized so that min K = 0; every cell then contains its anchor,
the image of 0 under the cell's word.  Words are little-endian: the first
symbol is the coarsest.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from .errors import BadSymbol, DimensionMismatch, OSCViolation, ROutOfXi, ValidationError
from .weights import is_exact, number_to_json, parse_number

PRECISION_DIAM = 1e-12


@dataclass(frozen=True)
class IFS:
    """Maps x -> c x + w_e, one per translation, all with the same ratio c."""

    c: object
    translations: tuple

    @classmethod
    def make(cls, c, translations, normalize=True, check=True):
        c = parse_number(c)
        w = sorted(parse_number(x) for x in translations)
        if not 0 < c < 1:
            raise ValidationError(f"contraction ratio must lie in (0,1), got {c}")
        if not w:
            raise ValidationError("an IFS needs at least one map")
        if len(set(w)) != len(w):
            raise OSCViolation("repeated translation")
        if normalize:
            # the fixed point of the leftmost map is min K
            lo = w[0] / (1 - c)
            w = [x - (1 - c) * lo for x in w]
        ifs = cls(c, tuple(w))
        if check:
            ifs.check_osc()
        return ifs

    @property
    def p(self):
        return len(self.translations)

    @property
    def exact(self):
        return is_exact(self.c, *self.translations)

    @property
    def dimension(self):
        """Similarity dimension -log p / log c (= Hausdorff dimension under OSC)."""
        if self.p == 1:
            return 0.0
        return -math.log(self.p) / math.log(float(self.c))

    @property
    def dimension_exact(self):
        """The dimension as a Fraction u/v when p^v = (1/c)^u exactly (v <= 64), else the float."""
        if isinstance(self.c, Fraction):
            inv = 1 / self.c
            s = self.dimension
            for v in range(1, 65):
                u = round(s * v)
                if u > 0 and abs(u / v - s) < 1e-9 and Fraction(self.p) ** v == inv ** u:
                    return Fraction(u, v)
        return self.dimension

    def hull(self):
        """[min K, max K] as the fixed points of the extreme maps."""
        c = self.c
        return self.translations[0] / (1 - c), self.translations[-1] / (1 - c)

    @property
    def diameter(self):
        lo, hi = self.hull()
        return hi - lo

    def check_osc(self):
        """Open set condition with U the open convex hull of K.

        The images c U + w_e must be pairwise disjoint sub-intervals of U;
        with exact data the comparison is exact.
        """
        lo, hi = self.hull()
        c = self.c
        images = sorted((c * lo + w, c * hi + w) for w in self.translations)
        for (l1, h1), (l2, h2) in zip(images, images[1:]):
            if h1 > l2:
                raise OSCViolation(f"images ({l1}, {h1}) and ({l2}, {h2}) overlap")
        if images[0][0] < lo or images[-1][1] > hi:
            raise OSCViolation("an image leaves the hull")
        return True

    def to_json(self):
        return {"c": number_to_json(self.c), "w": [number_to_json(x) for x in self.translations]}

    def default_depth(self):
        """Smallest L with c^L * diam < 1e-12."""
        diam = float(self.diameter)
        if diam == 0:
            return 1
        return max(1, math.ceil(math.log(PRECISION_DIAM / diam) / math.log(float(self.c))) + 1)


PRESETS = {
    "unit_interval": lambda: IFS.make(Fraction(1, 2), [0, Fraction(1, 2)]),
    "cantor3": lambda: IFS.make(Fraction(1, 3), [0, Fraction(2, 3)]),
    "cantor5": lambda: IFS.make(Fraction(1, 5), [0, Fraction(4, 5)]),
}


def ifs_from_json(obj):
    if isinstance(obj, str):
        if obj not in PRESETS:
            raise ValidationError(f"unknown preset {obj!r}; choose from {sorted(PRESETS)}")
        return PRESETS[obj]()
    if isinstance(obj, IFS):
        return obj
    try:
        return IFS.make(obj["c"], obj["w"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"bad IFS description {obj!r}: {exc}")


def coding_map(ifs, word):
    """phi_{b_1} o ... o phi_{b_L}(0)."""
    x = 0 * ifs.c
    for b in reversed(list(word)):
        if not (isinstance(b, (int, np.integer)) and 0 <= b < ifs.p):
            raise BadSymbol(f"symbol {b!r} not in alphabet of size {ifs.p}")
        x = ifs.c * x + ifs.translations[b]
    return x


def coding_map_batch(c, w, words):
    """Vectorized coding map: ``words`` is an integer array (..., L), returns floats."""
    words = np.asarray(words)
    L = words.shape[-1]
    powers = float(c) ** np.arange(L)
    return np.asarray(w, dtype=float)[words] @ powers


@dataclass(frozen=True)
class ProductFractal:
    """K = {theta : theta_ij in K_ij} for an m x n grid of IFSs."""

    grid: tuple  # tuple of tuples of IFS

    @classmethod
    def make(cls, grid):
        rows = tuple(tuple(ifs_from_json(e) for e in row) for row in grid)
        if not rows or not rows[0] or any(len(r) != len(rows[0]) for r in rows):
            raise DimensionMismatch("fractal grid must be a nonempty rectangle")
        K = cls(rows)
        for ifs in K.entries():
            if ifs.p < 2:
                raise ValidationError("every entry needs positive dimension (at least two maps)")
        return K

    @classmethod
    def uniform(cls, preset, m, n):
        return cls.make([[preset] * n for _ in range(m)])

    @classmethod
    def from_json(cls, obj, m=None, n=None):
        if isinstance(obj, (str, dict)) and not (isinstance(obj, dict) and "grid" in obj):
            if m is None or n is None:
                raise ValidationError("a single IFS description needs the weights shape to broadcast")
            return cls.make([[obj] * n for _ in range(m)])
        if isinstance(obj, dict):
            obj = obj["grid"]
        K = cls.make(obj)
        if m is not None and K.shape != (m, n):
            raise DimensionMismatch(f"fractal grid {K.shape} does not match weights ({m}, {n})")
        return K

    def to_json(self):
        return {"grid": [[e.to_json() for e in row] for row in self.grid]}

    @property
    def shape(self):
        return len(self.grid), len(self.grid[0])

    def entries(self):
        return [e for row in self.grid for e in row]

    def _field(self, f):
        return [[f(e) for e in row] for row in self.grid]

    def ratios(self):
        return np.array(self._field(lambda e: float(e.c)))

    def dimensions(self):
        return np.array(self._field(lambda e: e.dimension))

    def dimensions_exact(self):
        """Entry dimensions as a nested list of Fractions where exact, floats otherwise."""
        return self._field(lambda e: e.dimension_exact)

    @property
    def s_total(self):
        return float(np.sum(self.dimensions()))

    @property
    def s_total_exact(self):
        return sum(x for row in self.dimensions_exact() for x in row)

    def diameters(self):
        return np.array(self._field(lambda e: float(e.diameter)))

    def is_full_box(self):
        """True when every entry is exactly the unit interval attractor."""
        return all(e.exact and e.p * e.c == 1 and e.diameter == 1 for e in self.entries())

    def check_r(self, r):
        r = np.broadcast_to(np.asarray(r, dtype=float), self.shape)
        c = self.ratios()
        tol = 1e-12
        if np.any(r < c * (1 - tol)) or np.any(r > (1 / c) * (1 + tol)):
            raise ROutOfXi(f"r must satisfy c_ij <= r_ij <= 1/c_ij entrywise, got {r.tolist()}")
        return r


def rng_for(seed, *stream):
    """Independent numpy Generator for (seed, stream...)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), *stream])))


def sample_mu(K, count, seed, depth=None, stream=0):
    """``count`` i.i.d. draws from the Bernoulli measure mu on K, shape (count, m, n)."""
    m, n = K.shape
    out = np.zeros((count, m, n))
    if count == 0:
        return out
    rng = rng_for(seed, 1, stream)
    for i in range(m):
        for j in range(n):
            ifs = K.grid[i][j]
            L = depth or ifs.default_depth()
            words = rng.integers(0, ifs.p, size=(count, L))
            out[:, i, j] = coding_map_batch(ifs.c, ifs.translations, words)
    return out


def sample_mu_r(K, r, count, seed, depth=None, stream=0):
    """Draws from mu^(r), the pushforward of mu under theta_ij -> r_ij theta_ij."""
    r = K.check_r(r)
    return sample_mu(K, count, seed, depth, stream) * r


def random_r(K, rng, size=None):
    """Log-uniform points of Xi = prod [c_ij, 1/c_ij]."""
    c = K.ratios()
    shape = (size,) + c.shape if size else c.shape
    u = rng.uniform(-1.0, 1.0, size=shape)
    return np.exp(u * -np.log(c))


def holder_constant(ifs, levels=12, safety=2.0):
    """A constant lambda with mu([x-y, x+y]) <= lambda y^s, found by cell counting.

    For y in the grid c^k (k = 0..levels) the worst interval of length 2y
    meets at most N level-k cells, each of mass p^-k; the result is the
    maximum of N p^-k / y^s times ``safety``.  Intermediate y are covered by
    the factor c^-s between grid points.
    """
    c, p, s = float(ifs.c), ifs.p, ifs.dimension
    diam = float(ifs.diameter)
    best = 1.0 / diam**s
    for k in range(levels + 1):
        y = diam * c**k
        # anchors of level-k cells; cell k covers [a, a + c^k diam]
        if p**k > 2**16:
            break
        words = np.array(np.unravel_index(np.arange(p**k), (p,) * k)).T if k else np.zeros((1, 0), int)
        anchors = np.sort(coding_map_batch(ifs.c, ifs.translations, words)) if k else np.zeros(1)
        ends = anchors + c**k * diam
        # most cells meeting a window of length 2y starting at each left end
        worst = 0
        for a in anchors:
            lo, hi = a - 2 * y, a + 2 * y
            worst = max(worst, int(np.sum((ends >= lo) & (anchors <= hi))))
        best = max(best, worst * p**-k / y**s)
    return safety * best / c**s


# ---------------------------------------------------------------------------
# cell arithmetic


def _level_ratio(c, t, e):
    """e log t / -log c in double precision, or None when it is within rounding of an integer."""
    val = float(e) * math.log(float(t)) / -math.log(float(c))
    if abs(val - round(val)) <= 1e-9 * max(1.0, abs(val)):
        return None
    return val


def _exact_floor_level(c, t, e):
    """Largest N with t^-e <= c^N, i.e. N = floor(e log t / -log c), exactly when possible."""
    val = _level_ratio(c, t, e)
    if val is not None:
        return math.floor(val)
    with mpmath.workdps(50):
        val = e * mpmath.log(t) / -mpmath.log(c)
        N = int(mpmath.floor(val))
        near = abs(val - mpmath.nint(val)) < mpmath.mpf(10) ** -30
    if near and is_exact(c, t, e):
        # decide c^N0 >= t^-e exactly at the integer candidate N0 = nint(val)
        N0 = int(mpmath.nint(val))
        N = N0 if _power_cmp(c, N0, t, -e) >= 0 else N0 - 1
    return N


def _exact_ceil_level(c, t, e):
    """Smallest P with c^P <= t^-e, i.e. P = ceil(e log t / -log c), exactly when possible."""
    val = _level_ratio(c, t, e)
    if val is not None:
        return math.ceil(val)
    with mpmath.workdps(50):
        val = e * mpmath.log(t) / -mpmath.log(c)
        P = int(mpmath.ceil(val))
        near = abs(val - mpmath.nint(val)) < mpmath.mpf(10) ** -30
    if near and is_exact(c, t, e):
        P0 = int(mpmath.nint(val))
        P = P0 if _power_cmp(c, P0, t, -e) <= 0 else P0 + 1
    return P


def _power_cmp(c, N, t, e):
    """Sign of c^N - t^e for rationals, comparing (c^N)^q with t^p where e = p/q."""
    e = Fraction(e)
    c, t = Fraction(c), Fraction(t)
    lhs = c ** (N * e.denominator)
    rhs = t ** e.numerator
    return (lhs > rhs) - (lhs < rhs)


def subdivision_levels(K, weights, t, k):
    """N_k(i,j), r_k and s_k for the level-k subdivision.

    N_k(i,j) is the integer with c^(N+1) < t^-k(a_i+b_j) <= c^N,
    (r_k)_ij = t^k(a_i+b_j) c^N lies in [1, 1/c) and (s_k)_ij = c^N.
    """
    m, n = K.shape
    if (m, n) != (weights.m, weights.n):
        raise DimensionMismatch("fractal grid does not match the weights")
    if not t > 1 or k < 0:
        raise ValidationError("need t > 1 and k >= 0")
    N = np.zeros((m, n), dtype=np.int64)
    r = np.zeros((m, n))
    s = np.zeros((m, n))
    t = parse_number(t)
    for i in range(m):
        for j in range(n):
            c = K.grid[i][j].c
            e = k * (weights.a[i] + weights.b[j])
            Nij = _exact_floor_level(c, t, e)
            N[i, j] = Nij
            log_s = Nij * math.log(float(c))
            r[i, j] = math.exp(float(e) * math.log(float(t)) + log_s)
            s[i, j] = math.exp(log_s)
    return {"N": N, "r": r, "s": s}


def covering_levels(K, weights, t, l):
    """P_l(i,j), the integer with c^P <= t^-(a_1+b_1) l < c^(P-1)."""
    m, n = K.shape
    t = parse_number(t)
    e = l * weights.top
    P = np.zeros((m, n), dtype=np.int64)
    for i in range(m):
        for j in range(n):
            c = K.grid[i][j].c
            P[i, j] = _exact_ceil_level(c, t, e)
    return P


def cell_count(K, levels, weights=None, t=None, M=None):
    """prod p_ij^P(i,j) as an exact integer, plus the comparison value when (weights, t, M) are given."""
    levels = np.asarray(levels)
    if np.any(levels < 0):
        raise ValidationError("levels must be nonnegative")
    total = 1
    for ifs, P in zip(K.entries(), levels.ravel()):
        total *= ifs.p ** int(P)
    if weights is None:
        return total
    c_prod = float(np.prod(K.ratios()))
    bound = (1.0 / c_prod) * float(t) ** (K.s_total * float(weights.top) * M)
    return total, bound


def cell_anchors(ifs, level):
    """Anchors of all level-L cells of one IFS, in word order (first symbol coarsest)."""
    p = ifs.p
    if level == 0:
        return np.zeros(1)
    words = np.array(np.unravel_index(np.arange(p**level), (p,) * level)).T
    return coding_map_batch(ifs.c, ifs.translations, words)


# ---------------------------------------------------------------------------
# stratified integration over the cell tree


@dataclass
class StratifiedResult:
    mean: float
    stderr: float
    leaves: int
    evaluations: int


def _cell_sample(K, r, anchors, levels, count, rng, depth):
    """Draws from mu^(r) restricted to one product cell (a scaled copy of mu^(r))."""
    m, n = K.shape
    out = np.empty((count, m, n))
    for i in range(m):
        for j in range(n):
            ifs = K.grid[i][j]
            L = depth or ifs.default_depth()
            words = rng.integers(0, ifs.p, size=(count, L))
            base = coding_map_batch(ifs.c, ifs.translations, words)
            out[:, i, j] = anchors[i, j] + float(ifs.c) ** levels[i, j] * base
    return out * r


def stratified_expectation(K, r, func, count, seed, pilot=16, depth=None, stream=0, max_level=60):
    """Integral of ``func`` against mu^(r) by adaptive stratification over IFS cells.

    Cells are products of per-entry IFS cells; each has mass prod p^-level and
    mu restricted to it is a rescaled copy of mu.  Half the budget goes to
    pilot samples while the leaf with the largest mass * std is split (along
    its widest entry) into its children; the other half is allocated to the
    leaves in proportion to mass * std.  Singular integrands are thus resolved
    scale by scale instead of relying on rare draws.
    ``func`` maps an (N, m, n) array of matrices to N values.
    """
    import heapq

    r = K.check_r(r)
    m, n = K.shape
    rng = rng_for(seed, 3, stream)
    diam = K.diameters()
    ratios = K.ratios()
    P = np.array([[e.p for e in row] for row in K.grid])

    leaves = {}
    heap = []
    counter = 0

    def add_leaf(anchors, levels, mass):
        nonlocal counter
        x = _cell_sample(K, r, anchors, levels, pilot, rng, depth)
        vals = np.asarray(func(x), dtype=float)
        key = counter
        counter += 1
        leaves[key] = [anchors, levels, mass, vals]
        score = mass * float(np.std(vals))
        heapq.heappush(heap, (-score, key))
        return pilot

    used = add_leaf(np.zeros((m, n)), np.zeros((m, n), dtype=np.int64), 1.0)
    budget_pilot = count // 2
    while used + pilot * int(P.max()) <= budget_pilot and heap:
        score, key = heapq.heappop(heap)
        if -score <= 0:
            heapq.heappush(heap, (score, key))
            break
        anchors, levels, mass, _ = leaves[key]
        widths = diam * ratios ** levels
        i, j = np.unravel_index(int(np.argmax(widths)), widths.shape)
        if levels[i, j] >= max_level:
            continue
        del leaves[key]
        ifs = K.grid[i][j]
        for w in ifs.translations:
            a = anchors.copy()
            lv = levels.copy()
            a[i, j] = anchors[i, j] + float(ifs.c) ** levels[i, j] * float(w)
            lv[i, j] += 1
            used += add_leaf(a, lv, mass / ifs.p)
    # Neyman allocation of the remaining budget
    keys = list(leaves)
    masses = np.array([leaves[k][2] for k in keys])
    sds = np.array([np.std(leaves[k][3], ddof=1) if len(leaves[k][3]) > 1 else 0.0 for k in keys])
    remaining = max(count - used, 0)
    weight = masses * sds
    if weight.sum() > 0 and remaining > 0:
        alloc = np.floor(remaining * weight / weight.sum()).astype(int)
        for k, extra in zip(keys, alloc):
            if extra > 0:
                anchors, levels, mass, vals = leaves[k]
                x = _cell_sample(K, r, anchors, levels, int(extra), rng, depth)
                leaves[k][3] = np.concatenate([vals, np.asarray(func(x), dtype=float)])
                used += int(extra)
    mean = 0.0
    var = 0.0
    for anchors, levels, mass, vals in leaves.values():
        mean += mass * float(vals.mean())
        if len(vals) > 1:
            var += mass**2 * float(vals.var(ddof=1)) / len(vals)
    return StratifiedResult(mean, math.sqrt(var), len(leaves), used)
