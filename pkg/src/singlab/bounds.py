"""Packing-dimension upper bounds from an eta profile.

All formulas have the shape s - (eta + extra)/(a_1 + b_1) with
eta = min_l w_l eta_l.  When the weights, fractal dimensions and profile are
exact rationals the arithmetic is exact.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import GammaOutOfRange, InfeasibleProfile, NegativeOmega, POutOfRange
from .weights import number_to_json

FEAS_TOL = 1e-12


def _check_profile(profile, zeta=None):
    if len(profile.eta) != profile.weights.d - 1:
        raise InfeasibleProfile(f"profile has {len(profile.eta)} entries, expected {profile.weights.d - 1}")
    if any(not e > 0 for e in profile.eta):
        raise InfeasibleProfile("every eta_l must be positive")
    if not profile.is_feasible(zeta, FEAS_TOL):
        raise InfeasibleProfile(f"profile violates its constraints (min slack {profile.min_slack(zeta):.3e})")


def dimension_of(K):
    """dim_P(K) = sum of the entry dimensions, exact where possible."""
    return K.s_total_exact


def gamma_of_omega(weights, omega):
    """a_m b_n omega / (a_m + b_n + a_m omega); the omega -> infinity limit is b_n."""
    am, bn = weights.a[-1], weights.b[-1]
    if omega == math.inf:
        return bn
    return am * bn * omega / (am + bn + am * omega)


def gamma_cap(K, weights, profile):
    """Largest admissible gamma, ((a_1 + b_1) s - eta) / eta_1."""
    return (weights.top * dimension_of(K) - profile.eta_min_combo) / profile.eta[0]


def bound_sing(K, weights, profile, zeta=None):
    """s - min_l(eta_l w_l) / (a_1 + b_1)."""
    _check_profile(profile, zeta)
    return dimension_of(K) - profile.eta_min_combo / weights.top


def bound_divergent(K, weights, profile, p, zeta=None):
    """s - p min_l(eta_l w_l) / (a_1 + b_1) for 0 < p <= 1."""
    if not 0 < p <= 1:
        raise POutOfRange(f"p must lie in (0, 1], got {p}")
    _check_profile(profile, zeta)
    return dimension_of(K) - p * profile.eta_min_combo / weights.top


def bound_gamma(K, weights, profile, gamma, zeta=None):
    """s - (min_l(eta_l w_l) + eta_1 gamma) / (a_1 + b_1) for 0 <= gamma <= cap."""
    _check_profile(profile, zeta)
    cap = gamma_cap(K, weights, profile)
    if gamma < 0 or gamma > cap * (1 + FEAS_TOL) + FEAS_TOL * (not isinstance(cap, Fraction)):
        raise GammaOutOfRange(f"gamma must lie in [0, {float(cap):.12g}], got {float(gamma)}")
    return dimension_of(K) - (profile.eta_min_combo + profile.eta[0] * gamma) / weights.top


def bound_sing_omega(K, weights, profile, omega, zeta=None):
    """The omega-singular bound: bound_gamma at gamma = a_m b_n omega/(a_m + b_n + a_m omega).

    A gamma beyond the admissible cap is clamped to it (the bound is then 0).
    """
    if omega < 0:
        raise NegativeOmega(f"omega must be nonnegative, got {omega}")
    gamma = gamma_of_omega(weights, omega)
    _check_profile(profile, zeta)
    cap = gamma_cap(K, weights, profile)
    return bound_gamma(K, weights, profile, min(gamma, cap), zeta)


@dataclass
class BoundReport:
    weights: object
    fractal: object
    profile: object
    s: object
    bounds: dict
    inputs: dict = field(default_factory=dict)
    provenance: str = ""

    def to_json(self):
        out = {"weights": self.weights.to_json(), "fractal": self.fractal.to_json(),
               "eta_profile": self.profile.to_json(), "s": number_to_json(self.s),
               "inputs": {k: number_to_json(v) if v is not None else None for k, v in self.inputs.items()},
               "provenance": self.provenance}
        for name, val in self.bounds.items():
            out[name] = float(val)
            out[name + "_exact"] = str(val) if isinstance(val, Fraction) else None
        return out


def bound_report(K, weights, profile, p=None, omega=None, gamma=None, zeta=None, provenance=None):
    """Evaluate the bound selected by (p, omega, gamma); plain Sing when none is given."""
    if sum(x is not None for x in (p, omega, gamma)) > 1:
        raise ValueError("give at most one of p, omega, gamma")
    if p is not None:
        value = bound_divergent(K, weights, profile, p, zeta)
    elif omega is not None:
        value = bound_sing_omega(K, weights, profile, omega, zeta)
    elif gamma is not None:
        value = bound_gamma(K, weights, profile, gamma, zeta)
    else:
        value = bound_sing(K, weights, profile, zeta)
    if provenance is None:
        provenance = profile.source
    if not provenance.startswith("closed_form"):
        provenance += " (empirically certified)" if "mc" in provenance or "tail" in provenance else ""
    return BoundReport(weights, K, profile, dimension_of(K), {"bound": value},
                       {"p": p, "omega": omega, "gamma": gamma}, provenance)
