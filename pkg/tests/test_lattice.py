import itertools
import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from singlab.errors import BudgetExceeded, NotPrimitive, NotUnimodular, RadiusOverflow
from singlab.lattice import (Lattice, RadiusPolicy, Sublattice, diag_flow, emm_defect, lambda1,
                             lattice_family, lattice_points, lll_reduce, phi, random_lattice,
                             random_primitive_sublattice, shortest_vector, sublattice_norm, unipotent)
from singlab.weights import equal_weights, validate_weights
from singlab import intmat

seeds = st.integers(0, 2**32 - 1)


def brute_lambda1(B, K):
    d = B.shape[0]
    best = math.inf
    for x in itertools.product(range(-K, K + 1), repeat=d):
        if any(x):
            best = min(best, float(np.max(np.abs(B @ np.array(x, float)))))
    return best


def test_from_matrix_checks_determinant():
    with pytest.raises(NotUnimodular):
        Lattice.from_matrix(np.diag([2.0, 1.0]))
    L = Lattice.from_matrix(np.array([[F(1, 2), 0], [0, 2]], dtype=object))
    assert L.exact is not None
    assert Lattice.from_json(L.to_json()).exact[0, 0] == F(1, 2)


def test_diag_flow_exact_and_float():
    W = validate_weights(["1/2", "1/2"], [1])
    g = diag_flow(W, 4)
    assert g[0, 0] == 2 and g[2, 2] == F(1, 4)
    g = diag_flow(W, 3)
    assert g.dtype == float and g[0, 0] == pytest.approx(math.sqrt(3))


def test_lattice_family_exact():
    W = equal_weights(1, 1)
    L = lattice_family(W, [[F(1, 3)]], 9)
    assert L.exact is not None
    assert L.exact[0, 1] == 3  # t * theta
    assert lambda1(L) == pytest.approx(1 / 3)  # (p, q) = (-1, 3) maps to (t(p + q/3), q/t) = (0, 1/3)


@given(seeds, st.integers(2, 4))
def test_lll_is_unimodular_change(seed, d):
    rng = np.random.default_rng(seed)
    B = random_lattice(d, rng, spread=1.5).basis
    red, U = lll_reduce(B)
    assert abs(round(np.linalg.det(U.astype(float)))) == 1
    np.testing.assert_allclose(B @ U, red, atol=1e-8 * np.abs(B).max() * np.abs(U).max())


@settings(max_examples=25)
@given(seeds, st.integers(2, 3))
def test_shortest_vector_matches_brute_force(seed, d):
    rng = np.random.default_rng(seed)
    L = random_lattice(d, rng, spread=0.3)
    vec, norm, coeffs = shortest_vector(L)
    np.testing.assert_allclose(L.basis @ coeffs.astype(float), vec, atol=1e-9)
    K = 7 if d == 2 else 4
    brute = brute_lambda1(L.basis, K)
    assert norm <= brute * (1 + 1e-12)
    if np.max(np.abs(coeffs)) <= K:
        assert norm == pytest.approx(brute, rel=1e-12)


def test_lattice_points_counts_standard():
    P = lattice_points(Lattice.standard(2), 1.0)
    assert len(P) == 4  # (1,0), (0,1), (1,1), (-1,1) up to sign


def test_phi_examples():
    for d in range(2, 5):
        for l in range(0, d + 1):
            assert phi(Lattice.standard(d), l) == pytest.approx(1.0)
    assert phi(Lattice.from_matrix(np.diag([0.25, 4.0])), 1) == pytest.approx(4.0)
    L = Lattice.from_matrix(np.diag([0.5, 1.0, 2.0]))
    assert phi(L, 1) == pytest.approx(2.0)
    assert phi(L, 2) == pytest.approx(2.0)  # span of e1, e2 has covolume 1/2


@settings(max_examples=20)
@given(seeds, st.integers(3, 4))
def test_top_grade_phi_is_dual_shortest_vector(seed, d):
    # Hodge duality preserves the sup norm, so phi_{d-1}(L) = 1 / lambda_1(L*)
    rng = np.random.default_rng(seed)
    L = random_lattice(d, rng, spread=0.7)
    dual = Lattice.from_matrix(np.linalg.inv(L.basis).T, check=False)
    assert phi(L, d - 1) == pytest.approx(1 / lambda1(dual), rel=1e-9)


@settings(max_examples=10)
@given(seeds)
def test_phi_methods_agree(seed):
    rng = np.random.default_rng(seed)
    L = random_lattice(4, rng, spread=0.5)
    try:
        alt = phi(L, 2, method="subsets")
    except RadiusOverflow:
        return
    assert phi(L, 2) == pytest.approx(alt, rel=1e-9)


@settings(max_examples=20)
@given(seeds, st.integers(2, 4))
def test_phi_invariant_under_basis_change(seed, d):
    rng = np.random.default_rng(seed)
    L = random_lattice(d, rng, spread=0.5)
    U = np.eye(d, dtype=np.int64)
    for _ in range(4):
        i, j = rng.choice(d, 2, replace=False)
        U[:, j] += int(rng.integers(-3, 4)) * U[:, i]
    L2 = Lattice.from_matrix(L.basis @ U)
    for l in range(1, d):
        assert phi(L2, l) == pytest.approx(phi(L, l), rel=1e-9)


def test_phi_along_cusp():
    t = 1e3
    L = lattice_family(equal_weights(1, 1), [[0.0]], t)
    assert phi(L, 1) == pytest.approx(t)
    L = Lattice.from_matrix(np.diag([1e-6, 1e6]))
    assert phi(L, 1) == pytest.approx(1e6)


def test_sublattice_norms_and_emm():
    Z3 = Lattice.standard(3)
    S1 = Sublattice(Z3, [[1, 0], [0, 1], [0, 0]])
    S2 = Sublattice(Z3, [[0, 0], [1, 0], [0, 1]])
    assert sublattice_norm(S1) == 1.0
    assert emm_defect(Z3, S1, S2, "euclid") == pytest.approx(1.0)
    with pytest.raises(NotPrimitive):
        emm_defect(Z3, Sublattice(Z3, [[2], [0], [0]]), S2)


@settings(max_examples=30)
@given(seeds, st.integers(2, 4))
def test_emm_euclidean_defect_at_most_one(seed, d):
    rng = np.random.default_rng(seed)
    L = random_lattice(d, rng)
    l1, l2 = rng.integers(1, d, size=2)
    S1 = random_primitive_sublattice(L, int(l1), rng)
    S2 = random_primitive_sublattice(L, int(l2), rng)
    assert emm_defect(L, S1, S2, "euclid") <= 1 + 1e-9


def test_budget():
    with pytest.raises(BudgetExceeded):
        shortest_vector(random_lattice(4, np.random.default_rng(0)), budget=1)
