"""Exact integer matrix routines: column echelon form, kernels, saturation.

Matrices are nested lists (or integer numpy arrays) and results are numpy
object arrays of Python ints, so entries never overflow.
"""

from functools import reduce
from itertools import combinations
from math import gcd

import numpy as np


def _as_int_rows(A):
    A = np.asarray(A, dtype=object)
    if A.ndim != 2:
        raise ValueError("expected a 2-d integer matrix")
    return [[int(x) for x in row] for row in A]


def column_echelon(A):
    """Unimodular column reduction: return (H, U, rank) with A @ U = H.

    The first ``rank`` columns of H are in lower echelon form and the
    remaining columns are zero, so the trailing columns of U span the
    integer kernel of A.
    """
    rows = _as_int_rows(A)
    r = len(rows)
    c = len(rows[0]) if r else np.asarray(A).shape[1]
    cols = [[rows[i][j] for i in range(r)] for j in range(c)]
    ucols = [[int(i == j) for i in range(c)] for j in range(c)]
    piv = 0
    for i in range(r):
        if piv == c:
            break
        while True:
            nz = [j for j in range(piv, c) if cols[j][i] != 0]
            if not nz:
                break
            k = min(nz, key=lambda j: abs(cols[j][i]))
            done = True
            for j in nz:
                if j == k:
                    continue
                q = cols[j][i] // cols[k][i]
                if q:
                    cols[j] = [x - q * y for x, y in zip(cols[j], cols[k])]
                    ucols[j] = [x - q * y for x, y in zip(ucols[j], ucols[k])]
                if cols[j][i] != 0:
                    done = False
            if done:
                cols[piv], cols[k] = cols[k], cols[piv]
                ucols[piv], ucols[k] = ucols[k], ucols[piv]
                if cols[piv][i] < 0:
                    cols[piv] = [-x for x in cols[piv]]
                    ucols[piv] = [-x for x in ucols[piv]]
                piv += 1
                break
    H = np.array([[cols[j][i] for j in range(c)] for i in range(r)], dtype=object).reshape(r, c)
    U = np.array([[ucols[j][i] for j in range(c)] for i in range(c)], dtype=object).reshape(c, c)
    return H, U, piv


def integer_kernel(A):
    """Basis (as columns) of {x in Z^c : A x = 0}; the result is saturated."""
    A = np.asarray(A, dtype=object)
    _, U, rank = column_echelon(A)
    return U[:, rank:]


def lattice_basis(G):
    """Basis (columns) of the subgroup of Z^d generated by the columns of G."""
    G = np.asarray(G, dtype=object)
    H, _, rank = column_echelon(G)
    return H[:, :rank]


def rank(A):
    return column_echelon(A)[2]


def saturate(C):
    """Basis of Z^d intersected with the rational span of the columns of C."""
    C = np.asarray(C, dtype=object)
    d = C.shape[0]
    if C.shape[1] == 0:
        return np.zeros((d, 0), dtype=object)
    left = integer_kernel(C.T)  # d x (d - rank)
    if left.shape[1] == 0:
        return np.array([[int(i == j) for j in range(d)] for i in range(d)], dtype=object)
    return integer_kernel(left.T)


def det(A):
    """Exact determinant by fraction-free Bareiss elimination."""
    M = _as_int_rows(A)
    n = len(M)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if M[k][k] == 0:
            for i in range(k + 1, n):
                if M[i][k] != 0:
                    M[k], M[i] = M[i], M[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) // prev
        prev = M[k][k]
    return sign * M[n - 1][n - 1]


def maximal_minors(C):
    C = np.asarray(C, dtype=object)
    d, l = C.shape
    return [det(C[list(I), :]) for I in combinations(range(d), l)]


def is_primitive(C):
    """True when the columns of C are independent and span a saturated subgroup of Z^d."""
    C = np.asarray(C, dtype=object)
    if C.shape[1] == 0:
        return True
    return reduce(gcd, (abs(x) for x in maximal_minors(C)), 0) == 1


def intersection(C1, C2):
    """Basis of the intersection of the subgroups spanned by the (independent) columns of C1 and C2."""
    C1 = np.asarray(C1, dtype=object)
    C2 = np.asarray(C2, dtype=object)
    l1 = C1.shape[1]
    K = integer_kernel(np.hstack([C1, -C2]))
    if K.shape[1] == 0:
        return np.zeros((C1.shape[0], 0), dtype=object)
    return lattice_basis(C1.dot(K[:l1, :]))


def subgroup_sum(C1, C2, saturated=False):
    S = lattice_basis(np.hstack([np.asarray(C1, dtype=object), np.asarray(C2, dtype=object)]))
    return saturate(S) if saturated else S
