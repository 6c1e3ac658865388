import itertools
import math
from fractions import Fraction as F

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlab.diophantine import (DirichletWitness, best_residual, dani_rescale_check, dirichlet_test,
                                 escape_average, geometric_times, omega_at, omega_estimate, trajectory,
                                 verify_witness)
from singlab.errors import BoxTooLarge, GridMismatch, InvalidWitness
from singlab.lattice import lambda1, lattice_family
from singlab.weights import equal_weights, validate_weights

from oracles import continued_fraction_convergent_denominators

GOLDEN = (math.sqrt(5) - 1) / 2


def dirichlet_oracle(theta, a, b, T, eps):
    """Plain loops with exact rationals: is there 0 < ||q||_b <= T with ||p + theta q||_a <= eps/T?"""
    m, n = len(a), len(b)
    bounds = [math.floor(float(T) ** float(bj) + 1e-9) for bj in b]
    for q in itertools.product(*[range(-B, B + 1) for B in bounds]):
        if not any(q):
            continue
        if any(F(abs(qj)) ** bj.denominator > F(T) ** bj.numerator for qj, bj in zip(q, b)):
            continue
        ok = True
        for i in range(m):
            x = sum(theta[i][j] * q[j] for j in range(n))
            r = abs(x - round(x))
            # r^(1/a_i) <= eps/T  <=>  r^den <= (eps/T)^num with a_i = num/den
            if F(r) ** a[i].denominator > (F(eps) / T) ** a[i].numerator:
                ok = False
                break
        if ok:
            return True
    return False


rationals = st.fractions(min_value=0, max_value=1, max_denominator=60)


@settings(max_examples=40)
@given(st.lists(rationals, min_size=2, max_size=2), st.integers(2, 30), st.sampled_from([F(1), F(1, 2), F(1, 5)]))
def test_dirichlet_matches_loop_oracle_2x1(th, T, eps):
    W = validate_weights(["1/2", "1/2"], [1])
    theta = [[th[0]], [th[1]]]
    wit = dirichlet_test(theta, W, T, eps)
    assert (wit is not None) == dirichlet_oracle(theta, W.a, W.b, T, eps)
    if wit is not None:
        assert verify_witness(theta, W, T, eps, wit.p, wit.q)


@settings(max_examples=40)
@given(rationals, st.integers(2, 200), st.sampled_from([F(1), F(1, 3), F(1, 10)]))
def test_dirichlet_matches_loop_oracle_1x1(th, T, eps):
    W = equal_weights(1, 1)
    wit = dirichlet_test([[th]], W, T, eps)
    assert (wit is not None) == dirichlet_oracle([[th]], W.a, W.b, T, eps)


def test_first_witness_in_search_order():
    W = equal_weights(1, 1)
    wit = dirichlet_test([[F(1, 3)]], W, 10, F(1, 2))
    assert wit.q == (3,) and wit.p == (-1,)
    assert wit.residual_a == 0


def test_minkowski_eps_one_always_succeeds():
    rng = np.random.default_rng(5)
    W = validate_weights(["2/3", "1/3"], ["1/2", "1/2"])
    for _ in range(10):
        theta = rng.random((2, 2))
        assert dirichlet_test(theta, W, 20, 1) is not None


def test_verify_witness_rejects_bad_pairs():
    W = equal_weights(1, 1)
    assert not verify_witness([[F(1, 3)]], W, 10, F(1, 2), [0], [1])
    assert not verify_witness([[F(1, 3)]], W, 10, F(1, 2), [0], [0])
    assert verify_witness([[F(1, 3)]], W, 10, F(1, 2), [-1], [3])


def test_box_budget():
    with pytest.raises(BoxTooLarge):
        dirichlet_test([[0.3]], equal_weights(1, 1), 10**6, F(1, 10**7), budget=100)


def test_omega_values():
    W = equal_weights(1, 1)
    assert omega_at([[F(2, 7)]], W, 100) == 16.0
    est = omega_estimate([[GOLDEN]], W, [2.0**k for k in range(4, 14)])
    assert 0 <= est < 0.1
    with pytest.raises(GridMismatch):
        omega_estimate([[GOLDEN]], W, [10, 5])
    assert best_residual([[0.5]], W, 3) == 0


def test_golden_lambda1_matches_continued_fractions():
    W = equal_weights(1, 1)
    qs = continued_fraction_convergent_denominators(GOLDEN, 45)
    with mpmath.workdps(50):
        x = mpmath.mpf(GOLDEN)  # the exact value of the float the code receives
        resid = [float(abs(q * x - mpmath.nint(q * x))) for q in qs]
    for t in np.geomspace(2, 1e6, 30):
        oracle = min(max(t * r, q / t) for q, r in zip(qs, resid))
        oracle = min(oracle, t)  # the vector (1, 0) before any convergent helps
        # t (p + q theta) cancels terms of size t q ~ 1e12 in double precision
        assert lambda1(lattice_family(W, [[GOLDEN]], t)) == pytest.approx(oracle, rel=1e-6)


def test_trajectory_rational_decays():
    W = equal_weights(1, 1)
    st_ = trajectory([[F(1, 3)]], W, geometric_times(2**12), grades=(1,))
    tail = [(t, l) for t, l in zip(st_.times, st_.lambda1) if t >= 9]
    for t, l in tail:
        assert l == pytest.approx(3 / t)
    assert st_.phi[1][-1] == pytest.approx(1 / st_.lambda1[-1])
    assert escape_average(st_, 0.01, math.log(2)) > 0.3
    with pytest.raises(GridMismatch):
        trajectory([[0.5]], W, [4, 2])


def test_escape_average_requires_consecutive_grid():
    W = equal_weights(1, 1)
    st_ = trajectory([[0.5]], W, [2.0, 8.0])
    with pytest.raises(GridMismatch):
        escape_average(st_, 0.5, math.log(2))


def test_dani_rescaling():
    W = equal_weights(1, 1)
    wit = dirichlet_test([[GOLDEN]], W, 100, 1)
    rep = dani_rescale_check(wit, [[GOLDEN]], W)
    assert rep["eps"]["holds"]
    wit = dirichlet_test([[F(1, 3)]], W, 100, F(1, 10))
    rep = dani_rescale_check(wit, [[F(1, 3)]], W, omega=2)
    assert rep["eps"]["holds"] and rep["omega"]["holds"]
    bad = DirichletWitness((0,), (1,), 100, 1, 0.0, 1.0)
    with pytest.raises(InvalidWitness):
        dani_rescale_check(bad, [[GOLDEN]], W)
