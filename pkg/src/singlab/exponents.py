"""Critical exponents: Monte Carlo moments, tail slopes, closed-form bounds and eta profiles.

For a decomposable unit vector v of grade l the quantity of interest is
||pi_{l+}(u(theta) v)||, the size of the expanding part of u(theta) v.  Its
small-ball probabilities under mu^(r) control which negative moments are
finite.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import (
    DimensionMismatch,
    GradeOutOfRange,
    InfeasibleZeta,
    InsufficientMass,
    RhoOutOfRange,
    ValidationError,
)
from .exterior import WedgeVector, compound, plus_mask, wedge_coords
from .fractal import random_r, rng_for, sample_mu_r
from .weights import expansion_exponent, is_exact

SLOPE_CAP = 10.0
SAFETY = Fraction(9, 10)
STRICT_MARGIN = 1e-9
CHUNK = 20000
TAIL_MASS = 0.2


# ---------------------------------------------------------------------------
# projections


def unipotent_batch(theta):
    """u(theta) for a stack of m x n matrices, shape (N, d, d)."""
    theta = np.asarray(theta, dtype=float)
    N, m, n = theta.shape
    U = np.broadcast_to(np.eye(m + n), (N, m + n, m + n)).copy()
    U[:, :m, m:] = theta
    return U


def projection_norms(theta, v, m):
    """||pi_{l+}(u(theta) v)|| for each theta in a stack.

    ``v`` is a WedgeVector or a d x l matrix whose columns are its factors.
    """
    theta = np.asarray(theta, dtype=float)
    out = np.empty(len(theta))
    if isinstance(v, WedgeVector):
        d, l = v.d, v.l
        coords = v.coords
        factors = None
    else:
        factors = np.asarray(v, dtype=float)
        d, l = factors.shape
    if theta.shape[1] + theta.shape[2] != d or theta.shape[1] != m:
        raise DimensionMismatch("theta shape does not match the wedge vector")
    mask = plus_mask(d, l, m)
    for s in range(0, len(theta), CHUNK):
        U = unipotent_batch(theta[s:s + CHUNK])
        if factors is None:
            w = compound(U, l) @ coords
        else:
            w = wedge_coords(U @ factors)
        out[s:s + CHUNK] = np.max(np.abs(w[:, mask]), axis=1)
    return out


def random_unit_wedge(d, l, rng):
    """Factors (d x l) of a Gaussian decomposable vector, scaled to sup norm 1."""
    G = rng.standard_normal((d, l))
    norm = np.max(np.abs(wedge_coords(G)))
    G[:, 0] /= norm
    return G


def anchored_unit_wedge(K, l, rng, r=None):
    """Factors of a unit wedge v with pi_{l+}(u(theta0) v) = 0 for a point theta0 of supp mu^(r).

    v = u(-theta0) w where w is a wedge with no component in V_l^+: l random
    vectors in the contracting coordinates when l <= n, otherwise all of them
    plus l - n random vectors in the expanding coordinates.
    """
    m, n = K.shape
    d = m + n
    r = random_r(K, rng) if r is None else r
    theta0 = sample_mu_r(K, r, 1, int(rng.integers(2**63)))[0]
    W = np.zeros((d, l))
    if l <= n:
        W[m:, :] = rng.standard_normal((n, l))
    else:
        W[m:, :n] = np.eye(n)
        W[:m, n:] = rng.standard_normal((m, l - n))
    U = np.eye(d)
    U[:m, m:] = -theta0
    G = U @ W
    G[:, 0] /= np.max(np.abs(wedge_coords(G)))
    return G


def _as_wedge(v):
    if isinstance(v, WedgeVector):
        return v
    return WedgeVector.from_vectors(v)


# ---------------------------------------------------------------------------
# Monte Carlo moments


@dataclass
class IntegralEstimate:
    mean: float
    stderr: float
    winsorized_mean: float
    tail_index: float
    count: int
    nonintegrable: bool

    def to_json(self):
        return {k: (v if not isinstance(v, float) or math.isfinite(v) else str(v))
                for k, v in self.__dict__.items()}


def hill_tail_index(x, k=None):
    """Hill estimate of alpha in P(X > x) ~ x^-alpha from the k largest samples."""
    x = np.sort(np.asarray(x, dtype=float))[::-1]
    x = x[x > 0]
    if len(x) < 20:
        return math.inf
    k = k or max(10, int(math.sqrt(len(x))))
    k = min(k, len(x) - 1)
    logs = np.log(x[:k + 1])
    h = float(np.mean(logs[:k] - logs[k]))
    return math.inf if h <= 0 else 1.0 / h


def summarize_samples(values, winsor=0.999):
    """Mean, standard error, winsorized mean and tail diagnostics of positive samples."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    if n == 0:
        raise ValidationError("no samples")
    if not np.all(np.isfinite(values)):
        return IntegralEstimate(math.inf, math.inf, math.inf, 0.0, n, True)
    cut = np.quantile(values, winsor)
    wins = np.minimum(values, cut)
    alpha = hill_tail_index(values)
    return IntegralEstimate(float(values.mean()), float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf,
                            float(wins.mean()), float(alpha), n, bool(alpha <= 1.0))


def mc_projection_integral(v, gamma, K, r, count, seed, depth=None, stream=0):
    """Monte Carlo estimate of the integral of ||pi_{l+}(u(theta) v)||^-gamma d mu^(r)(theta)."""
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    m, n = K.shape
    theta = sample_mu_r(K, r, count, seed, depth, stream)
    norms = projection_norms(theta, v, m)
    with np.errstate(divide="ignore"):
        vals = norms ** -float(gamma)
    return summarize_samples(vals)


# ---------------------------------------------------------------------------
# tail slopes


@dataclass
class ZetaEstimate:
    l: int
    gamma_certified: float
    method: str
    slope: float = None
    diagnostics: dict = field(default_factory=dict)

    def to_json(self):
        return {"l": self.l, "gamma_certified": float(self.gamma_certified), "method": self.method,
                "slope": None if self.slope is None else float(self.slope), "diagnostics": self.diagnostics}


def default_eps_grid(count, points=12):
    """Geometric grid from 1/2 down to about 30/count."""
    lo = max(30.0 / count, 1e-8)
    return np.geomspace(0.5, lo, points)


def fit_log_slope(eps, mass, count, min_hits=30, max_mass=TAIL_MASS):
    """Least-squares slope of log mass vs log eps over tail grid points with enough hits."""
    eps = np.asarray(eps, dtype=float)
    mass = np.asarray(mass, dtype=float)
    ok = (mass * count >= min_hits) & (mass <= max_mass)
    if ok.sum() < 3:
        return None, None
    x, y = np.log(eps[ok]), np.log(mass[ok])
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(coef[0]), resid


def tail_slope(l, K, r=None, v_sampler=None, eps_grid=None, count=10**5, seed=0,
               n_vectors=100, strict=False, min_hits=30):
    """Estimate the small-ball exponent of ||pi_{l+}(u(theta) v)|| under mu^(r).

    Test vectors alternate between Gaussian wedges and wedges anchored at a
    random support point (see ``anchored_unit_wedge``); Gaussian wedges
    almost surely miss a measure-zero fractal.  For each vector the masses mu^(r){||pi_{l+}(u(theta)v)|| <= eps}
    are measured on ``eps_grid``.  The estimate is the log-log slope of the
    envelope max_v mass_v(eps), i.e. the exponent of a tail bound holding
    uniformly over the sampled v; ``gamma_certified`` applies a 0.9 safety
    factor.  Per-vector slopes are kept in the diagnostics; they are biased
    low whenever the support boundary falls inside the grid.  ``r`` is fixed
    when given, otherwise drawn log-uniformly from Xi per vector.  With no
    usable mass on the grid the slope is ``SLOPE_CAP``, or InsufficientMass
    is raised when ``strict``.
    """
    m, n = K.shape
    d = m + n
    if not 1 <= l <= d - 1:
        raise GradeOutOfRange(f"l={l} outside 1..{d - 1}")
    eps_grid = default_eps_grid(count) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    if len(eps_grid) < 4:
        raise ValidationError("eps_grid needs at least 4 points")
    rng = rng_for(seed, 2, l)
    masses = np.zeros((n_vectors, len(eps_grid)))
    vectors, rs = [], []
    for k in range(n_vectors):
        rk = r if r is not None else random_r(K, rng)
        if v_sampler is not None:
            v = v_sampler(rng)
        elif k % 2:
            v = anchored_unit_wedge(K, l, rng, rk)
        else:
            v = random_unit_wedge(d, l, rng)
        theta = sample_mu_r(K, rk, count, seed, stream=1000 + k)
        norms = np.sort(projection_norms(theta, v, m))
        masses[k] = np.searchsorted(norms, eps_grid, side="right") / count
        vectors.append(_as_wedge(v).coords.tolist())
        rs.append(np.asarray(rk, dtype=float).tolist())
    envelope = masses.max(axis=0)
    slope, resid = fit_log_slope(eps_grid, envelope, count, min_hits)
    per_vector = []
    for row in masses:
        sv, _ = fit_log_slope(eps_grid, row, count, min_hits)
        per_vector.append(SLOPE_CAP if sv is None else min(sv, SLOPE_CAP))
    if slope is None:
        if strict:
            raise InsufficientMass("no sampled vector had enough small-ball mass on the grid")
        slope = SLOPE_CAP
    slope = min(slope, SLOPE_CAP)
    worst = int(np.argmax(masses.sum(axis=1)))
    diag = {"n_vectors": n_vectors, "count": count, "eps_grid": list(map(float, eps_grid)),
            "envelope": envelope.tolist(), "fit_residual": resid,
            "min_vector_slope": float(min(per_vector)),
            "vector_slope_quantiles": np.quantile(per_vector, [0, 0.1, 0.5]).tolist(),
            "capped_vectors": int(sum(sv >= SLOPE_CAP for sv in per_vector)),
            "heaviest_v": vectors[worst], "heaviest_r": rs[worst]}
    return ZetaEstimate(l, float(SAFETY) * slope, "tail_slope", slope, diag)


def certify_layer_cake(gamma, rho, L):
    """Bound 1 + L rho/(1 - rho) on the (rho gamma)-moment given the tail bound L eps^gamma."""
    if not 0 < rho < 1:
        raise RhoOutOfRange(f"rho must lie in (0,1), got {rho}")
    if is_exact(rho, L) or all(isinstance(x, (int, Fraction)) for x in (rho, L)):
        rho, L = Fraction(rho), Fraction(L)
    return 1 + L * rho / (1 - rho)


# ---------------------------------------------------------------------------
# closed forms


@dataclass
class ClosedForm:
    bounds: list  # zeta lower bounds for l = 1..d-1, or None
    case: str
    cases: dict = field(default_factory=dict)


def _full_box_beta(m, n):
    d = m + n
    return [Fraction(m, l) if l <= m else Fraction(n, d - l) for l in range(1, d)]


def _min_subset_sum(values, k):
    return sum(sorted(values)[:k])


def zeta_closed_form(K, weights=None):
    """Lower bounds for zeta_1..zeta_{d-1} in the full-box, n = 1 and m = 1 cases."""
    m, n = K.shape
    d = m + n
    s = K.dimensions_exact()
    cases = {}
    if K.is_full_box():
        cases["full_box"] = _full_box_beta(m, n)
    if n == 1:
        col = [s[i][0] for i in range(m)]
        cases["n=1"] = [_min_subset_sum(col, d - l) for l in range(1, d)]
    if m == 1:
        row = list(s[0])
        cases["m=1"] = [_min_subset_sum(row, l) for l in range(1, d)]
    if not cases:
        return ClosedForm(None, "none", {})
    bounds = [max(vals) for vals in zip(*cases.values())]
    return ClosedForm(bounds, "+".join(cases), cases)


# ---------------------------------------------------------------------------
# eta profiles


def constraint_pairs(d):
    return [(i, j) for i in range(1, d) for j in range(1, min(i, d - i) + 1)]


def _inv(x):
    return 1 / x if isinstance(x, Fraction) else 1.0 / x


@dataclass
class EtaProfile:
    eta: tuple
    weights: object
    strict: bool = False
    source: str = "user"

    @property
    def d(self):
        return len(self.eta) + 1

    def x(self):
        """1/eta with the boundary values 1/eta_0 = 1/eta_d = 0."""
        return [0] + [_inv(e) for e in self.eta] + [0]

    @property
    def eta_min_combo(self):
        """min over l of w_l eta_l."""
        return min(expansion_exponent(self.weights, l) * e for l, e in enumerate(self.eta, start=1))

    def constraint_slacks(self, zeta=None):
        x = self.x()
        slacks = [2 * x[i] - x[i - j] - x[i + j] for i, j in constraint_pairs(self.d)]
        if zeta is not None:
            slacks += [z - e for z, e in zip(zeta, self.eta)]
        slacks += list(self.eta)
        return slacks

    def min_slack(self, zeta=None):
        return float(min(self.constraint_slacks(zeta)))

    def is_feasible(self, zeta=None, tol=1e-12):
        return self.min_slack(zeta) >= -tol

    def to_json(self):
        from .weights import number_to_json
        return {"eta": [number_to_json(e) for e in self.eta],
                "eta_min_combo": number_to_json(self.eta_min_combo),
                "strict": self.strict, "source": self.source}


def closed_form_profile(K, weights, case=None):
    """The explicit eta choices for the full box, n = 1 and m = 1 cases."""
    m, n = K.shape
    d = m + n
    s = K.dimensions_exact()
    if case is None:
        case = "full_box" if K.is_full_box() else "n=1" if n == 1 else "m=1" if m == 1 else None
    if case == "full_box":
        if not K.is_full_box():
            raise ValidationError("fractal is not the full unit box")
        eta = _full_box_beta(m, n)
    elif case == "n=1":
        if n != 1:
            raise ValidationError("the n=1 profile needs a single column")
        smin = min(s[i][0] for i in range(m))
        eta = [Fraction(m, l) * smin for l in range(1, d)]
    elif case == "m=1":
        if m != 1:
            raise ValidationError("the m=1 profile needs a single row")
        # the entries of a single row are K_{1j}; take the smallest of their dimensions
        smin = min(s[0])
        eta = [Fraction(n, n + 1 - l) * smin for l in range(1, d)]
    else:
        raise ValidationError("no closed-form profile for this fractal")
    return EtaProfile(tuple(eta), weights, False, f"closed_form:{case}")


def concave_majorant(y):
    """Least concave majorant of the points (k, y_k), k = 0..len(y)-1, evaluated at each k."""
    exact = all(isinstance(v, (int, Fraction)) for v in y)
    pts = list(enumerate(y))
    hull = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point when it lies on or below the chord
            if (y2 - y1) * (p[0] - x1) <= (p[1] - y1) * (x2 - x1):
                hull.pop()
            else:
                break
        hull.append(p)
    out = []
    for k in range(len(y)):
        for (x1, y1), (x2, y2) in zip(hull, hull[1:]):
            if x1 <= k <= x2:
                frac = Fraction(k - x1, x2 - x1) if exact else (k - x1) / (x2 - x1)
                out.append(y1 + (y2 - y1) * frac)
                break
        else:
            out.append(y[k])
    return out


def eta_optimize(zeta_bounds, weights, strict=False, margin=STRICT_MARGIN):
    """Maximize min_l w_l eta_l subject to eta_l <= zeta_l and the harmonic constraints.

    In x_l = 1/eta_l the constraints say x is concave on 0..d with
    x_0 = x_d = 0 and x_l >= 1/zeta_l.  The pointwise smallest such x is the
    least concave majorant of the lower bounds, so it maximizes every eta_l
    at once and in particular the objective.  With ``strict`` the result is
    moved into the interior: x = y + margin q with q_l = l(d-l)/2 and y the
    majorant of 1/zeta_l + margin - margin q_l, which makes every constraint
    strict by at least ``margin``.
    """
    d = weights.d
    zeta = list(zeta_bounds)
    if len(zeta) != d - 1:
        raise DimensionMismatch(f"need {d - 1} zeta bounds, got {len(zeta)}")
    if any(not z > 0 for z in zeta):
        raise InfeasibleZeta("every zeta bound must be positive")
    zero = Fraction(0) if all(isinstance(z, (int, Fraction)) for z in zeta) else 0.0
    lower = [zero] + [_inv(z) for z in zeta] + [zero]
    if not strict:
        x = concave_majorant(lower)
    else:
        q = [l * (d - l) / 2 for l in range(d + 1)]
        shifted = [0.0] + [float(lower[l]) + margin - margin * q[l] for l in range(1, d)] + [0.0]
        y = concave_majorant(shifted)
        x = [y[l] + margin * q[l] for l in range(d + 1)]
    eta = tuple(_inv(x[l]) for l in range(1, d))
    return EtaProfile(eta, weights, strict, "optimized")
