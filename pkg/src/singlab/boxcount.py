"""Covering experiments: count product cells whose anchors pass a Diophantine
test along a time ladder t, t^2, ..., t^M, and fit the growth rate of the counts.

These are diagnostics to set beside the proven bounds, not certificates.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .diophantine import _floor_power
from .errors import BudgetExceeded, DegenerateCounts, DimensionMismatch, ValidationError
from .fractal import cell_anchors, cell_count, covering_levels
from .lattice import Lattice, diag_flow, lambda1, unipotent
from .weights import parse_number

DEFAULT_MAX_CELLS = 2**22
CELL_CHUNK = 4096


class AlwaysTrue:
    name = "always"

    def params(self):
        return {}

    def __call__(self, theta, K, weights, t, M):
        return np.ones(len(theta), dtype=bool)


class Dirichlet:
    """For every k = 1..M some 0 < ||q||_b <= t^k has ||p + theta q||_a <= eps t^-k."""

    name = "dirichlet"

    def __init__(self, eps, q_budget=10**6):
        if not eps > 0:
            raise ValidationError("eps must be positive")
        self.eps = float(eps)
        self.q_budget = q_budget

    def params(self):
        return {"eps": self.eps}

    def _candidates(self, weights, t, M):
        """Nonzero q up to sign in the largest box, with the first ladder index that contains them."""
        bounds = [[_floor_power(parse_number(t) ** k, b) for b in weights.b] for k in range(M + 1)]
        top = bounds[M]
        total = math.prod(2 * x + 1 for x in top)
        if total > self.q_budget:
            raise BudgetExceeded(f"{total} q-candidates exceed the budget {self.q_budget}")
        grids = np.meshgrid(*[np.arange(-x, x + 1) for x in top], indexing="ij")
        q = np.stack([g.ravel() for g in grids], axis=1)
        nz = np.array([row[np.nonzero(row)[0][-1]] > 0 if np.any(row) else False for row in q])
        q = q[nz]
        first = np.full(len(q), M + 1)
        for k in range(M, 0, -1):
            inside = np.all(np.abs(q) <= np.array(bounds[k]), axis=1)
            first[inside] = k
        return q, first

    def __call__(self, theta, K, weights, t, M):
        q, first = self._candidates(weights, t, M)
        a = np.array([float(x) for x in weights.a])
        logt = math.log(float(t))
        covered = np.zeros((len(theta), M + 1), dtype=bool)
        for qq, k0 in zip(q, first):
            x = theta @ qq.astype(float)
            resid = np.abs(x - np.round(x))
            with np.errstate(divide="ignore"):
                quasi = np.max(resid ** (1.0 / a), axis=1)
                kmax = np.floor((math.log(self.eps) - np.log(quasi)) / logt + 1e-12)
            kmax = np.minimum(np.where(quasi == 0, M, kmax), M).astype(int)
            for k in range(k0, M + 1):
                covered[:, k] |= kmax >= k
        return np.all(covered[:, 1:], axis=1)


class Phi1Growth:
    """phi_1(g_{t^k} u(theta) Z^d) >= t^(gamma k) for every k = 1..M."""

    name = "phi1-growth"

    def __init__(self, gamma):
        if gamma < 0:
            raise ValidationError("gamma must be nonnegative")
        self.gamma = float(gamma)

    def params(self):
        return {"gamma": self.gamma}

    def __call__(self, theta, K, weights, t, M):
        flows = [np.asarray(diag_flow(weights, float(t) ** k), dtype=float) for k in range(1, M + 1)]
        out = np.ones(len(theta), dtype=bool)
        for c, th in enumerate(theta):
            u = unipotent(th)
            for k, g in enumerate(flows, start=1):
                lam = lambda1(Lattice.from_matrix(g @ u, check=False))
                if lam > float(t) ** (-self.gamma * k) * (1 + 1e-12):
                    out[c] = False
                    break
        return out


def make_predicate(name, eps=None, gamma=None):
    if name in ("always", "always-true", "none"):
        return AlwaysTrue()
    if name == "dirichlet":
        return Dirichlet(1.0 if eps is None else eps)
    if name in ("phi1-growth", "phi1"):
        return Phi1Growth(0.0 if gamma is None else gamma)
    raise ValidationError(f"unknown predicate {name!r}")


def _anchor_chunks(K, levels, chunk):
    per_entry = [cell_anchors(ifs, int(P)) for ifs, P in zip(K.entries(), levels.ravel())]
    shape = tuple(len(x) for x in per_entry)
    total = math.prod(shape)
    m, n = K.shape
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), shape)
        theta = np.stack([vals[i] for vals, i in zip(per_entry, idx)], axis=1)
        yield theta.reshape(-1, m, n)


def surviving_cells(K, weights, t, M, predicate=None, level=None, max_cells=DEFAULT_MAX_CELLS, threads=1):
    """Number of level-P cells (P = P_M unless ``level`` is given) whose anchor passes ``predicate``."""
    if (K.shape) != (weights.m, weights.n):
        raise DimensionMismatch("fractal grid does not match the weights")
    if M < 1:
        raise ValidationError("M must be at least 1")
    predicate = AlwaysTrue() if predicate is None else predicate
    levels = covering_levels(K, weights, t, M if level is None else level)
    total = cell_count(K, levels)
    if isinstance(predicate, AlwaysTrue):
        return total
    if total > max_cells:
        raise BudgetExceeded(f"{total} cells exceed the budget {max_cells}")

    def work(theta):
        return int(np.count_nonzero(predicate(theta, K, weights, t, M)))

    chunks = _anchor_chunks(K, levels, CELL_CHUNK)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return sum(pool.map(work, chunks))
    return sum(map(work, chunks))


@dataclass
class CoverExperiment:
    t: float
    M_range: list
    predicate: str
    params: dict
    counts: list
    s: float
    top: float
    slope: float = None
    slope_ci: tuple = None
    reference_bound: float = None
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {"t": float(self.t), "M": list(self.M_range), "predicate": self.predicate, "params": self.params,
                "counts": [int(c) for c in self.counts], "s": self.s, "slope": self.slope,
                "slope_ci": list(self.slope_ci) if self.slope_ci else None,
                "reference_bound": self.reference_bound, **self.extra}

    def rows(self):
        return [{"M": M, "count": int(c)} for M, c in zip(self.M_range, self.counts)]


def run_experiment(K, weights, t, M_range, predicate=None, reference_bound=None, max_cells=DEFAULT_MAX_CELLS,
                   threads=1):
    predicate = AlwaysTrue() if predicate is None else predicate
    M_range = list(M_range)
    counts = [surviving_cells(K, weights, t, M, predicate, max_cells=max_cells, threads=threads) for M in M_range]
    exp = CoverExperiment(float(t), M_range, predicate.name, predicate.params(), counts, float(K.s_total),
                          float(weights.top), reference_bound=None if reference_bound is None else float(reference_bound))
    try:
        exp.slope, exp.slope_ci = fit_slope(exp)
    except DegenerateCounts:
        pass
    return exp


def fit_slope(exp, confidence=0.95):
    """Least-squares slope of log(count) against M (a_1 + b_1) log t, with a confidence interval."""
    pairs = [(M, c) for M, c in zip(exp.M_range, exp.counts) if c > 0]
    if len(pairs) < 3 or len(pairs) < len(exp.counts):
        raise DegenerateCounts("need at least 3 levels, all with nonzero counts")
    x = np.array([M * exp.top * math.log(exp.t) for M, _ in pairs])
    y = np.array([math.log(c) for _, c in pairs])
    fit = stats.linregress(x, y)
    half = stats.t.ppf(0.5 + confidence / 2, len(x) - 2) * fit.stderr if len(x) > 2 else math.inf
    return float(fit.slope), (float(fit.slope - half), float(fit.slope + half))
