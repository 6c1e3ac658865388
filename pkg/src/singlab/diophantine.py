"""Weighted Dirichlet tests, uniform exponent estimates, flow trajectories and rescaling checks."""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BoxTooLarge, GridMismatch, InvalidWitness, ValidationError
from .lattice import Lattice, diag_flow, lattice_family, phi, shortest_vector, unipotent
from .weights import is_exact, number_to_json, parse_number

DEFAULT_BUDGET = 10**7
OMEGA_CAP = 16.0
CHUNK = 1 << 18
REL_TOL = 1e-12


@dataclass(frozen=True)
class DirichletWitness:
    p: tuple
    q: tuple
    T: object
    eps: object
    residual_a: float
    qnorm_b: float

    def to_json(self):
        return {"p": list(self.p), "q": list(self.q), "T": number_to_json(self.T),
                "eps": number_to_json(self.eps), "residual_a": self.residual_a, "qnorm_b": self.qnorm_b}


def parse_theta(theta, m=None, n=None):
    """An m x n matrix as an object array of Fractions (when exact) or floats."""
    arr = np.asarray(theta, dtype=object)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1) if n == 1 else arr.reshape(1, -1)
    vals = np.vectorize(parse_number, otypes=[object])(arr)
    if m is not None and vals.shape != (m, n):
        raise ValidationError(f"theta has shape {vals.shape}, expected ({m}, {n})")
    return vals


def _theta_float(theta):
    return np.array(theta.tolist(), dtype=float)


def _floor_power(T, e):
    """floor(T^e), exactly when T and e are rational."""
    T = parse_number(T)
    if is_exact(T, e):
        u, v = e.numerator, e.denominator
        target = T ** u  # compare Q^v <= T^u
        Q = int(math.floor(float(T) ** float(e) * (1 + 1e-12))) + 1
        while Q > 0 and Fraction(Q) ** v > target:
            Q -= 1
        return Q
    return int(math.floor(float(T) ** float(e) * (1 + REL_TOL)))


def _signed_values(Q):
    """0, 1, -1, 2, -2, ..., Q, -Q."""
    out = [0]
    for k in range(1, Q + 1):
        out += [k, -k]
    return np.array(out, dtype=np.int64)


class _Residuals:
    """Evaluates ||p + theta q||_a with p the nearest integer vector, exactly for rational theta."""

    def __init__(self, theta, weights):
        self.a = np.array(weights.a, dtype=float)
        self.exact = all(isinstance(x, Fraction) for x in theta.flat)
        self.theta = _theta_float(theta)
        if self.exact:
            D = 1
            for x in theta.flat:
                D = D * x.denominator // math.gcd(D, x.denominator)
            if D < 2**40 and all(abs(x.numerator * (D // x.denominator)) < 2**40 for x in theta.flat):
                self.D = D
                self.N = np.array([[int(x * D) for x in row] for row in theta], dtype=np.int64)
            else:
                self.exact = False

    def evaluate(self, q):
        """Per-coordinate |p + theta q| (floats, exact zeros for rational theta) and p."""
        if self.exact:
            num = q @ self.N.T  # D * theta q
            p = -np.floor_divide(num + self.D // 2, self.D)
            r = np.abs(num + p * self.D)
            return r / self.D, p
        x = q @ self.theta.T
        p = -np.rint(x).astype(np.int64)
        return np.abs(x + p), p

    def quasi(self, resid):
        with np.errstate(divide="ignore"):
            return np.max(resid ** (1.0 / self.a), axis=-1)


def _scan(theta, weights, T, budget):
    """Yield (q, p, resid) chunks covering the box |q_j| <= T^b_j, q != 0, up to sign."""
    values = [_signed_values(_floor_power(T, b)) for b in weights.b]
    shape = tuple(len(v) for v in values)
    total = math.prod(shape)
    if total > budget:
        raise BoxTooLarge(f"box of {total} q-candidates exceeds the budget {budget}")
    res = _Residuals(theta, weights)
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK))
        digits = np.unravel_index(idx, shape, order="F")
        q = np.stack([v[dg] for v, dg in zip(values, digits)], axis=1)
        nz = q != 0
        any_nz = nz.any(axis=1)
        last = np.where(any_nz, q.shape[1] - 1 - np.argmax(nz[:, ::-1], axis=1), 0)
        keep = any_nz & (q[np.arange(len(q)), last] > 0)
        q = q[keep]
        if len(q) == 0:
            continue
        resid, p = res.evaluate(q)
        yield q, p, resid, res


def _within(resid, eps, T, a):
    bound = (float(eps) / float(T)) ** a
    return np.all(resid <= bound * (1 + REL_TOL), axis=1)


def verify_witness(theta, weights, T, eps, p, q):
    """Exact check of ||p + theta q||_a <= eps/T and ||q||_b <= T (rational data), float otherwise."""
    theta = parse_theta(theta, weights.m, weights.n)
    q = [int(x) for x in q]
    p = [int(x) for x in p]
    if not any(q):
        return False
    T, eps = parse_number(T), parse_number(eps)
    exact = is_exact(T, eps, *weights.a, *weights.b) and all(isinstance(x, Fraction) for x in theta.flat)
    if exact:
        ratio = eps / T
        for i in range(weights.m):
            x = abs(p[i] + sum(theta[i, j] * q[j] for j in range(weights.n)))
            u, v = weights.a[i].numerator, weights.a[i].denominator
            if x ** v > ratio ** u:
                return False
        for j in range(weights.n):
            u, v = weights.b[j].numerator, weights.b[j].denominator
            if Fraction(abs(q[j])) ** v > T ** u:
                return False
        return True
    th = _theta_float(theta)
    resid = np.abs(np.array(p) + th @ np.array(q, dtype=float))
    a, b = weights.as_arrays()
    ok_a = np.all(resid <= (float(eps) / float(T)) ** a * (1 + 1e-9))
    ok_b = np.all(np.abs(q) <= float(T) ** b * (1 + 1e-9))
    return bool(ok_a and ok_b)


def dirichlet_test(theta, weights, T, eps, budget=DEFAULT_BUDGET):
    """First (p, q) in the search order with ||p + theta q||_a <= eps/T and ||q||_b <= T, or None.

    q runs over the box |q_j| <= T^b_j with the first coordinate varying
    fastest and each coordinate in the order 0, 1, -1, 2, -2, ...; of q and
    -q only the one whose last nonzero entry is positive is tried.
    """
    theta = parse_theta(theta, weights.m, weights.n)
    if parse_number(T) < 1 or parse_number(eps) <= 0:
        raise ValidationError("need T >= 1 and eps > 0")
    a = np.array(weights.a, dtype=float)
    bvec = np.array(weights.b, dtype=float)
    for q, p, resid, res in _scan(theta, weights, T, budget):
        hits = np.flatnonzero(_within(resid, eps, T, a))
        for h in hits:
            if res.exact and not verify_witness(theta, weights, T, eps, p[h], q[h]):
                continue
            qnorm = float(np.max(np.abs(q[h]) ** (1.0 / bvec)))
            return DirichletWitness(tuple(int(x) for x in p[h]), tuple(int(x) for x in q[h]), T, eps,
                                    float(res.quasi(resid[h:h + 1])[0]), qnorm)
    return None


def best_residual(theta, weights, T, budget=DEFAULT_BUDGET):
    """min over 0 < ||q||_b <= T of ||p + theta q||_a, with p nearest."""
    theta = parse_theta(theta, weights.m, weights.n)
    best = math.inf
    for q, p, resid, res in _scan(theta, weights, T, budget):
        best = min(best, float(np.min(res.quasi(resid))))
    return best


def omega_at(theta, weights, T, cap=OMEGA_CAP, budget=DEFAULT_BUDGET):
    """sup of omega with a solution of ||p + theta q||_a <= T^-(1+omega), ||q||_b <= T (capped)."""
    if float(T) <= 1:
        raise ValidationError("need T > 1")
    R = best_residual(theta, weights, T, budget)
    if R == 0:
        return cap
    return float(min(cap, -math.log(R) / math.log(float(T)) - 1.0))


def omega_estimate(theta, weights, T_grid, cap=OMEGA_CAP, budget=DEFAULT_BUDGET, tail=0.5):
    """Lower estimate of the uniform exponent: min of the per-T supremum over the tail of the grid."""
    T_grid = list(T_grid)
    if len(T_grid) < 2 or any(float(x) >= float(y) for x, y in zip(T_grid, T_grid[1:])):
        raise GridMismatch("T_grid must be increasing with at least two points")
    start = min(len(T_grid) - 1, int(len(T_grid) * (1 - tail)))
    return min(omega_at(theta, weights, T, cap, budget) for T in T_grid[start:])


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryStats:
    times: list
    lambda1: list
    phi: dict = field(default_factory=dict)

    def to_rows(self):
        ls = sorted(self.phi)
        return [[t, l1] + [self.phi[l][k] for l in ls] for k, (t, l1) in enumerate(zip(self.times, self.lambda1))]


def trajectory(theta, weights, times, x0=None, grades=()):
    """lambda_1 and the requested phi_l along g_t u(theta) x0."""
    theta = parse_theta(theta, weights.m, weights.n)
    times = list(times)
    if any(float(t) <= 1 for t in times) or any(float(x) >= float(y) for x, y in zip(times, times[1:])):
        raise GridMismatch("times must be increasing and > 1")
    stats = TrajectoryStats(times, [], {l: [] for l in grades})
    for t in times:
        L = lattice_family(weights, theta, t, x0)
        stats.lambda1.append(shortest_vector(L)[1])
        for l in grades:
            stats.phi[l].append(phi(L, l))
    return stats


def geometric_times(tmax, delta=math.log(2), tmin=None):
    """t_k = e^(k delta) for k >= 1 up to tmax."""
    k_max = int(math.floor(math.log(tmax) / delta + 1e-12))
    return [math.exp(k * delta) for k in range(1 if tmin is None else max(1, math.ceil(math.log(tmin) / delta - 1e-12)),
                                                 k_max + 1)]


def escape_average(stats, eps, delta):
    """Fraction of sampled times with lambda_1 <= eps; the times must form the grid e^(k delta)."""
    times = np.asarray(stats.times, dtype=float)
    if times.size == 0:
        raise GridMismatch("empty time window")
    k = np.log(times) / delta
    if not np.allclose(k, np.rint(k), atol=1e-6) or np.any(np.diff(np.rint(k)) != 1):
        raise GridMismatch(f"times are not consecutive points of the grid e^(k*{delta})")
    return float(np.mean(np.asarray(stats.lambda1) <= eps))


# ---------------------------------------------------------------------------
# rescaling between witnesses and short vectors


def _flowed_vector(theta, weights, tau, p, q, x0):
    g = np.array(diag_flow(weights, tau).tolist(), dtype=float) @ np.array(
        unipotent(_theta_float(theta)).tolist(), dtype=float)
    coords = np.array(list(p) + list(q), dtype=float)
    base = x0.basis if x0 is not None else np.eye(weights.d)
    return g @ (base @ coords)


def dani_rescale_check(witness, theta, weights, x0=None, omega=None):
    """Check that a Dirichlet witness produces a short vector at the rescaled time.

    For a witness with ||p + theta q||_a <= delta/T, the time is
    tau = delta^(-a_m/(a_m+b_n)) T and phi_1 must reach delta^(-a_m b_n/(a_m+b_n)).
    With ``omega`` the witness must satisfy ||p + theta q||_a <= T^-(1+omega);
    then tau = T^(1 + a_m omega/(a_m+b_n)) and the threshold is
    tau^(a_m b_n omega/(a_m+b_n+a_m omega)).
    """
    theta = parse_theta(theta, weights.m, weights.n)
    am, bn = float(weights.a[-1]), float(weights.b[-1])
    T = float(witness.T)
    report = {}
    delta = float(witness.eps)
    if not verify_witness(theta, weights, witness.T, witness.eps, witness.p, witness.q):
        raise InvalidWitness("witness does not satisfy the Dirichlet inequalities")
    if delta > 1:
        raise InvalidWitness("the rescaling needs eps <= 1")
    tau = delta ** (-am / (am + bn)) * T
    report["eps"] = _rescale_side(theta, weights, tau, witness, x0, delta ** (-am * bn / (am + bn)))
    if omega is not None:
        if omega < 0:
            raise ValidationError("omega must be nonnegative")
        T_omega = T ** (-(1 + omega))
        if not verify_witness(theta, weights, witness.T, T_omega * T, witness.p, witness.q):
            raise InvalidWitness(f"witness does not satisfy the omega={omega} inequalities")
        tau_w = T ** (1 + am * omega / (am + bn))
        report["omega"] = _rescale_side(theta, weights, tau_w, witness, x0,
                                        tau_w ** (am * bn * omega / (am + bn + am * omega)))
        report["omega"]["omega"] = omega
    return report


def _rescale_side(theta, weights, tau, witness, x0, threshold):
    v = _flowed_vector(theta, weights, tau, witness.p, witness.q, x0)
    vnorm = float(np.max(np.abs(v)))
    L = lattice_family(weights, _theta_float(theta), tau, x0)
    phi1 = 1.0 / shortest_vector(L)[1]
    return {"tau": tau, "phi1": phi1, "threshold": threshold,
            "witness_vector_norm": vnorm, "witness_bound": 1.0 / threshold,
            "holds": bool(phi1 >= threshold * (1 - 1e-9)),
            "slack": phi1 - threshold}
