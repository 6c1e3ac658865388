from fractions import Fraction as F
from itertools import combinations
from math import gcd
from functools import reduce

import numpy as np
from hypothesis import given, strategies as st

from singlab import intmat


def det_oracle(A):
    """Gaussian elimination over the rationals."""
    M = [[F(int(x)) for x in row] for row in A]
    n = len(M)
    det = F(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if M[r][c] != 0), None)
        if piv is None:
            return 0
        if piv != c:
            M[c], M[piv] = M[piv], M[c]
            det = -det
        det *= M[c][c]
        for r in range(c + 1, n):
            f = M[r][c] / M[c][c]
            M[r] = [a - f * b for a, b in zip(M[r], M[c])]
    return det


int_mats = st.integers(1, 4).flatmap(
    lambda n: st.lists(st.lists(st.integers(-6, 6), min_size=n, max_size=n), min_size=n, max_size=n))


@given(int_mats)
def test_det_matches_rational_elimination(A):
    assert intmat.det(np.array(A, dtype=object)) == det_oracle(A)


def gcd_minors(C):
    return reduce(gcd, (abs(int(x)) for x in intmat.maximal_minors(C)), 0)


@given(st.integers(2, 4), st.data())
def test_saturate_is_primitive_with_same_span(d, data):
    l = data.draw(st.integers(1, d - 1))
    rows = data.draw(st.lists(st.lists(st.integers(-5, 5), min_size=l, max_size=l), min_size=d, max_size=d))
    C = np.array(rows, dtype=object)
    if intmat.rank(C) < l:
        return
    S = intmat.saturate(C)
    assert gcd_minors(S) == 1
    assert intmat.is_primitive(S)
    assert intmat.rank(np.hstack([S, C])) == l
    # C's lattice sits inside S's lattice with index gcd of C's minors
    assert gcd_minors(C) % 1 == 0 and gcd_minors(C) >= 1


def test_kernel_and_echelon():
    A = np.array([[2, 4, 6], [1, 3, 5]], dtype=object)
    K = intmat.integer_kernel(A)
    assert K.shape == (3, 1)
    assert not np.any(A.dot(K))
    assert abs(int(K[0, 0])) == 1
    H, U, r = intmat.column_echelon(A)
    assert r == 2
    assert abs(intmat.det(U)) == 1
    assert (A.dot(U) == H).all()


def test_intersection_and_sum():
    C1 = np.array([[1, 0], [0, 1], [0, 0]], dtype=object)
    C2 = np.array([[1, 0], [0, 0], [0, 1]], dtype=object)
    I = intmat.intersection(C1, C2)
    assert I.shape[1] == 1 and abs(int(I[0, 0])) == 1 and I[1, 0] == 0 and I[2, 0] == 0
    S = intmat.subgroup_sum(C1, C2)
    assert intmat.rank(S) == 3 and abs(intmat.det(S)) == 1
    # the sum of 2Z e1 and Z e2 is not saturated; saturating restores e1
    C3 = np.array([[2], [0], [0]], dtype=object)
    C4 = np.array([[0], [1], [0]], dtype=object)
    assert abs(intmat.det(intmat.subgroup_sum(C3, C4)[:2, :])) == 2
    assert abs(intmat.det(intmat.subgroup_sum(C3, C4, saturated=True)[:2, :])) == 1
    assert not intmat.is_primitive(C3)
