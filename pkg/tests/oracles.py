"""Independent reference computations shared by several test modules."""

import math
from fractions import Fraction as F


def compare_power(c, N, t, e):
    """Sign of c^N - t^-e for rationals c, t and e = u/v, computed exactly."""
    u, v = F(e).numerator, F(e).denominator
    # c^N vs t^(-u/v)  <=>  c^(N v) vs t^(-u)
    lhs, rhs = F(c) ** (int(N) * v), F(t) ** (-u)
    return (lhs > rhs) - (lhs < rhs)


def subdivision_level_oracle(c, t, e):
    """The integer N with c^(N+1) < t^-e <= c^N, by linear search from a float guess."""
    N = max(0, int(math.floor(float(e) * math.log(float(t)) / -math.log(float(c)))) - 2)
    while compare_power(c, N + 1, t, e) >= 0:
        N += 1
    return N


def unit_interval_decay(t, eta):
    """Integral over [0, 1] of max(t x, 1/t)^-eta."""
    if eta == 1:
        return (1 + 2 * math.log(t)) / t
    return t ** (eta - 2) + t ** -eta * (1 - t ** (-2 * (1 - eta))) / (1 - eta)


def continued_fraction_convergent_denominators(x, count):
    """Denominators of the first ``count`` convergents of x (a float, expanded exactly)."""
    qs = [0, 1]
    y = F(x)
    for _ in range(count):
        k = math.floor(y)
        qs.append(k * qs[-1] + qs[-2])
        if y == k:
            break
        y = 1 / (y - k)
    return [q for q in qs[2:] if q > 0]


def eta_objective_by_bisection(zeta, w, tol=1e-10):
    """max over feasible eta of min_l w_l eta_l, by bisection on the objective value.

    For a target v the constraints on x_l = 1/eta_l are linear:
    1/zeta_l <= x_l <= w_l / v and x concave on 0..d with x_0 = x_d = 0.
    """
    import numpy as np
    from scipy.optimize import linprog

    d = len(zeta) + 1
    rows = []
    for i in range(1, d):
        for j in range(1, min(i, d - i) + 1):
            row = np.zeros(d - 1)
            row[i - 1] -= 2  # x_{i-j} + x_{i+j} - 2 x_i <= 0
            if i - j >= 1:
                row[i - j - 1] += 1
            if i + j <= d - 1:
                row[i + j - 1] += 1
            rows.append(row)
    A = np.array(rows) if rows else None
    b = np.zeros(len(rows)) if rows else None

    def feasible(v):
        bounds = [(1 / float(z), float(wl) / v) for z, wl in zip(zeta, w)]
        if any(lo > hi + 1e-15 for lo, hi in bounds):
            return False
        res = linprog(np.zeros(d - 1), A_ub=A, b_ub=b, bounds=bounds, method="highs")
        return res.status == 0

    lo, hi = 0.0, max(float(z) * float(wl) for z, wl in zip(zeta, w)) * 1.0001
    while hi - lo > tol * max(1.0, hi):
        mid = (lo + hi) / 2
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo
