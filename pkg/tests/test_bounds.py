import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, strategies as st

from singlab.bounds import (bound_divergent, bound_gamma, bound_report, bound_sing, bound_sing_omega,
                            gamma_cap, gamma_of_omega)
from singlab.errors import GammaOutOfRange, InfeasibleProfile, NegativeOmega, POutOfRange
from singlab.exponents import EtaProfile, closed_form_profile, eta_optimize
from singlab.fractal import IFS, ProductFractal
from singlab.weights import equal_weights, validate_weights

BOX21 = ProductFractal.uniform("unit_interval", 2, 1)
W21 = equal_weights(2, 1)
UNIT = ProductFractal.uniform("unit_interval", 1, 1)
W11 = equal_weights(1, 1)


def test_golden_four_thirds():
    assert bound_sing(BOX21, W21, closed_form_profile(BOX21, W21)) == F(4, 3)


def test_unweighted_full_box_family():
    for m in range(1, 4):
        for n in range(1, 4):
            K = ProductFractal.uniform("unit_interval", m, n)
            W = equal_weights(m, n)
            assert bound_sing(K, W, closed_form_profile(K, W)) == m * n - F(m * n, m + n)


def test_cantor_single_entry():
    K = ProductFractal.uniform("cantor3", 1, 1)
    s = math.log(2) / math.log(3)
    assert float(bound_sing(K, W11, closed_form_profile(K, W11))) == pytest.approx(s / 2)


def test_column_of_cantor_sets():
    # n = 1: eta_l w_l = s_min for every l, so the bound is s - m s_min / (m + 1)
    K = ProductFractal.uniform("cantor3", 2, 1)
    s = math.log(2) / math.log(3)
    assert float(bound_sing(K, W21, closed_form_profile(K, W21))) == pytest.approx(2 * s - 2 * s / 3)


def test_omega_and_gamma_examples():
    P = closed_form_profile(UNIT, W11)
    assert bound_sing_omega(UNIT, W11, P, 2) == F(1, 4)
    assert bound_sing_omega(UNIT, W11, P, 0) == bound_sing(UNIT, W11, P)
    assert bound_sing_omega(UNIT, W11, P, math.inf) == 0
    assert gamma_of_omega(W11, math.inf) == 1
    assert bound_gamma(UNIT, W11, P, 0) == bound_sing(UNIT, W11, P)
    assert bound_gamma(UNIT, W11, P, gamma_cap(UNIT, W11, P)) == 0
    with pytest.raises(GammaOutOfRange):
        bound_gamma(UNIT, W11, P, 2)
    with pytest.raises(NegativeOmega):
        bound_sing_omega(UNIT, W11, P, -1)


def test_divergent_examples():
    P = closed_form_profile(BOX21, W21)
    assert bound_divergent(BOX21, W21, P, F(1, 2)) == F(5, 3)
    assert bound_divergent(BOX21, W21, P, 1) == bound_sing(BOX21, W21, P)
    assert float(bound_divergent(BOX21, W21, P, 1e-9)) == pytest.approx(2)
    with pytest.raises(POutOfRange):
        bound_divergent(BOX21, W21, P, 0)


def test_infeasible_profile_rejected():
    with pytest.raises(InfeasibleProfile):
        bound_sing(BOX21, W21, EtaProfile((F(1), F(3)), W21))
    with pytest.raises(InfeasibleProfile):
        bound_sing(BOX21, W21, EtaProfile((F(3), F(1)), W21), zeta=[2, 1])


def fractions(lo, hi):
    return st.fractions(min_value=lo, max_value=hi, max_denominator=50)


def weights_strategy():
    def side(xs):
        tot = sum(xs)
        return sorted((F(x, tot) for x in xs), reverse=True)
    ints = st.lists(st.integers(1, 9), min_size=1, max_size=3)
    return st.tuples(ints, ints).map(lambda ab: validate_weights(side(ab[0]), side(ab[1])))


@given(weights_strategy(), fractions(0, 20))
def test_omega_gamma_identity_exact(W, omega):
    K = ProductFractal.uniform("unit_interval", W.m, W.n)
    P = eta_optimize([F(W.m, l) if l <= W.m else F(W.n, W.d - l) for l in range(1, W.d)], W)
    gamma = W.a[-1] * W.b[-1] * omega / (W.a[-1] + W.b[-1] + W.a[-1] * omega)
    if gamma <= gamma_cap(K, W, P):
        assert bound_sing_omega(K, W, P, omega) == bound_gamma(K, W, P, gamma)


@given(weights_strategy(), fractions(0, 10), fractions(0, 10))
def test_bounds_monotone_and_below_s(W, x, y):
    K = ProductFractal.uniform("unit_interval", W.m, W.n)
    P = closed_form_profile(K, W)
    s = K.s_total_exact
    lo, hi = sorted((x, y))
    assert bound_sing(K, W, P) < s
    assert bound_sing_omega(K, W, P, hi) <= bound_sing_omega(K, W, P, lo) <= bound_sing(K, W, P)
    plo, phi_ = sorted((F(1, 1) / (1 + x), F(1, 1) / (1 + y)))
    assert bound_divergent(K, W, P, phi_) <= bound_divergent(K, W, P, plo) < s


def test_report_provenance():
    P = closed_form_profile(BOX21, W21)
    rep = bound_report(BOX21, W21, P).to_json()
    assert rep["bound_exact"] == "4/3" and rep["provenance"] == "closed_form:full_box"
    Q = EtaProfile(P.eta, W21, source="tail_slope")
    assert "empirically certified" in bound_report(BOX21, W21, Q).to_json()["provenance"]
    with pytest.raises(ValueError):
        bound_report(BOX21, W21, P, p=1, omega=1)
