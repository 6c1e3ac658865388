"""Height functions on the space of lattices and their contraction under averaging.

f(L) = 1/eps + sum_l phi_l(L)^eta_l.  The constants entering the contraction
inequality (alpha_eta, xi(t), eps(t), b(t)) are computed here; the moment
constant C_hat and the EMM constant D are measured, since they have no
constructive closed form.
"""

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import stats

from .errors import AlphaNonPositive, DimensionMismatch, TTooSmall, ValidationError
from .exponents import (anchored_unit_wedge, constraint_pairs, mc_projection_integral,
                        random_unit_wedge)
from .exterior import WedgeVector, compound, index_sets, operator_norm
from .fractal import random_r, rng_for, stratified_expectation
from .lattice import (Lattice, diag_flow, emm_defect, phi, random_lattice,
                      random_primitive_sublattice, unipotent)
from .weights import expansion_exponent, number_to_json

C_SAFETY = 1.5
D_SAFETY = 2.0


def _inv(x):
    return 0 if x == 0 else (Fraction(1) / x if isinstance(x, (int, Fraction)) else 1.0 / x)


def alpha_eta(profile):
    """min over (i, j) of 1 - eta_i/2 (1/eta_{i-j} + 1/eta_{i+j}), with 1/eta_0 = 1/eta_d = 0."""
    x = profile.x()
    eta = [None] + list(profile.eta) + [None]
    d = profile.d
    return min(1 - eta[i] * (x[i - j] + x[i + j]) / 2 for i, j in constraint_pairs(d))


@dataclass
class HeightConfig:
    profile: object
    C_hat: float
    alpha: float
    t: float
    xi_t: float
    epsilon_t: float
    b_t: float
    notes: dict = field(default_factory=dict)

    @property
    def eta(self):
        return self.profile.eta_min_combo

    def to_json(self):
        return {"eta_profile": self.profile.to_json(), "C_hat": float(self.C_hat),
                "alpha": number_to_json(self.alpha), "t": float(self.t), "xi_t": float(self.xi_t),
                "epsilon_t": float(self.epsilon_t), "b_t": float(self.b_t), "notes": self.notes}


def height_f(L, cfg, epsilon=None):
    """1/eps + sum_{l=1}^{d-1} phi_l(L)^eta_l."""
    eps = cfg.epsilon_t if epsilon is None else epsilon
    eta = cfg.profile.eta if isinstance(cfg, HeightConfig) else cfg.eta
    if len(eta) != L.d - 1:
        raise DimensionMismatch(f"profile has {len(eta)} entries for a lattice in dimension {L.d}")
    total = 1.0 / float(eps)
    for l, e in enumerate(eta, start=1):
        total += phi(L, l) ** float(e)
    return total


def support_corners(K, r_max=True):
    """Corner matrices of the box containing supp mu^(r) for every r in Xi.

    With K normalized to min 0, supp mu^(r) lies in prod [0, r_ij diam_ij] and
    r_ij <= 1/c_ij.  A box with a zero-width side contributes a single value.
    """
    hi = K.diameters() / K.ratios() if r_max else K.diameters()
    sides = [(0.0,) if h == 0 else (0.0, float(h)) for h in hi.flat]
    m, n = K.shape
    for corner in itertools.product(*sides):
        yield np.array(corner).reshape(m, n)


def xi_prime(t, K, weights):
    """Operator norm of g_t u(x) maximized over x in the support box.

    Every entry of every compound of u(x) is affine in each x_ij separately, so
    each absolute row sum is convex in each coordinate and the maximum over the
    box is attained at a corner.
    """
    if not t > 1:
        raise ValidationError("t must exceed 1")
    g = np.asarray(diag_flow(weights, t), dtype=float)
    return max(operator_norm(g @ unipotent(x)) for x in support_corners(K))


def xi_estimate(t, K, profile, D):
    """xi(t) = max_i (D xi'(t))^eta_i, an upper bound by construction."""
    base = float(D) * xi_prime(t, K, profile.weights)
    return max(base ** float(e) for e in profile.eta)


def epsilon_b_constants(t, profile, C_hat, xi_t, alpha=None):
    """eps = (C t^-eta / ((d-1) xi))^(1/alpha) and b = (1 - C t^-eta)/eps."""
    alpha = alpha_eta(profile) if alpha is None else alpha
    if not alpha > 0:
        raise AlphaNonPositive(f"alpha_eta = {float(alpha):.3e} <= 0; use a strict profile")
    decay = float(C_hat) * float(t) ** -float(profile.eta_min_combo)
    if not decay < 1:
        raise TTooSmall(f"C_hat t^-eta = {decay:.4g} >= 1; increase t")
    eps = (decay / ((profile.d - 1) * float(xi_t))) ** (1.0 / float(alpha))
    if not 0 < eps < 1:
        raise TTooSmall(f"epsilon = {eps:.4g} is not in (0, 1); increase t")
    return eps, (1 - decay) / eps


def make_config(t, profile, C_hat, xi_t):
    alpha = alpha_eta(profile)
    eps, b = epsilon_b_constants(t, profile, C_hat, xi_t, alpha)
    return HeightConfig(profile, C_hat, alpha, t, xi_t, eps, b)


def measure_C_hat(K, profile, count=20000, seed=0, n_vectors=20, safety=C_SAFETY):
    """safety x the largest winsorized moment of ||pi_{l+}(u(x) v)||^-eta_l over sampled unit v, r."""
    m, n = K.shape
    d = m + n
    rng = rng_for(seed, 11)
    worst = 0.0
    for l, e in enumerate(profile.eta, start=1):
        for k in range(n_vectors):
            r = random_r(K, rng)
            v = anchored_unit_wedge(K, l, rng, r) if k % 2 else random_unit_wedge(d, l, rng)
            est = mc_projection_integral(v, float(e), K, r, count, seed, stream=1000 * l + k)
            worst = max(worst, est.winsorized_mean)
    return safety * worst


def measure_D(d, samples=200, seed=0, safety=D_SAFETY, spread=1.0):
    """safety x the largest sup-norm EMM defect over random lattices and primitive pairs."""
    rng = rng_for(seed, 12)
    worst = 1.0
    for _ in range(samples):
        L = random_lattice(d, rng, spread)
        l1, l2 = rng.integers(1, d, size=2)
        S1 = random_primitive_sublattice(L, int(l1), rng)
        S2 = random_primitive_sublattice(L, int(l2), rng)
        worst = max(worst, emm_defect(L, S1, S2, norm="sup"))
    return safety * worst


def coordinate_wedges(d, l):
    return [WedgeVector.basis(d, I) for I in index_sets(d, l)]


def decay_integral(v, gamma, K, weights, t, r=1, count=20000, seed=0, stream=0):
    """Integral of ||g_t u(x) v||^-gamma d mu^(r)(x) by stratified sampling."""
    g = np.asarray(diag_flow(weights, t), dtype=float)
    m, n = K.shape
    d = m + n
    l = v.l
    gl = compound(g, l)
    coords = np.asarray(v.coords, dtype=float)

    def func(x):
        U = np.broadcast_to(np.eye(d), (len(x), d, d)).copy()
        U[:, :m, m:] = x
        w = (compound(U, l) @ coords) @ gl.T
        return np.max(np.abs(w), axis=1) ** -float(gamma)

    return stratified_expectation(K, r, func, count, seed, stream=stream)


def decay_fit(v, gamma, K, weights, t_grid, r=1, count=20000, seed=0):
    """Log-log regression of the decay integral against t; slope with its standard error."""
    t_grid = [float(t) for t in t_grid]
    res = [decay_integral(v, gamma, K, weights, t, r, count, seed, stream=k) for k, t in enumerate(t_grid)]
    means = np.array([x.mean for x in res])
    fit = stats.linregress(np.log(t_grid), np.log(means))
    return {"t": t_grid, "integral": means.tolist(), "stderr": [x.stderr for x in res],
            "slope": float(fit.slope), "slope_stderr": float(fit.stderr), "intercept": float(fit.intercept)}


def default_t_grid():
    return [2.0**k for k in range(1, 11)]


def contraction_check(L, t, cfg, K, r=1, count=2000, seed=0, t_grid=None, decay_vectors=None,
                      decay_count=20000, slope_factor=1.0):
    """Compare the average of f over g_t u(x) L, x ~ mu^(r), with 2 C t^-eta f(L) + b.

    Also fits the per-grade decay of the integral of ||g_t u(x) v||^-eta_l against t
    (default vectors: the coordinate wedges) and reports the worst slope against
    -slope_factor * eta.
    """
    r = K.check_r(r)
    weights = cfg.profile.weights
    m, n = K.shape
    d = m + n
    if L.d != d:
        raise DimensionMismatch("lattice dimension does not match the fractal shape")
    g = np.asarray(diag_flow(weights, t), dtype=float)
    B = L.basis

    def func(x):
        out = np.empty(len(x))
        for k, xk in enumerate(x):
            out[k] = height_f(Lattice.from_matrix(g @ unipotent(xk) @ B, check=False), cfg)
        return out

    lhs = stratified_expectation(K, r, func, count, seed, pilot=8)
    fL = height_f(L, cfg)
    eta = float(cfg.eta)
    rhs = 2 * float(cfg.C_hat) * float(t) ** -eta * fL + float(cfg.b_t)
    report = {"t": float(t), "f_L": fL, "integral": lhs.mean, "integral_stderr": lhs.stderr,
              "rhs": rhs, "margin": rhs - lhs.mean, "holds": bool(lhs.mean <= rhs),
              "dominant_term": "contraction" if 2 * float(cfg.C_hat) * float(t) ** -eta * fL > cfg.b_t else "b",
              "config": cfg.to_json(), "grades": []}
    t_grid = default_t_grid() if t_grid is None else t_grid
    for l, e in enumerate(cfg.profile.eta, start=1):
        vecs = decay_vectors.get(l) if isinstance(decay_vectors, dict) else None
        vecs = coordinate_wedges(d, l) if vecs is None else vecs
        fits = [decay_fit(v, e, K, weights, t_grid, r, decay_count, seed) for v in vecs]
        worst = max(range(len(fits)), key=lambda k: fits[k]["slope"])
        target = -slope_factor * eta
        report["grades"].append({"l": l, "eta_l": float(e), "target_slope": target,
                                 "worst_slope": fits[worst]["slope"], "worst_vector": vecs[worst].coords.tolist(),
                                 "slopes": [f["slope"] for f in fits], "worst_fit": fits[worst],
                                 "holds": bool(fits[worst]["slope"] <= target)})
    return report
