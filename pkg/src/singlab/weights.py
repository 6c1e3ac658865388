"""Weight vectors (a, b), the quasi-norms they induce and the exponents w_l."""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

import numpy as np

from .errors import (
    IndexOutOfRange,
    LengthMismatch,
    NonPositiveEntry,
    NotNormalized,
    NotSorted,
    ValidationError,
)

SUM_TOL = 1e-12
MAX_DENOMINATOR = 10**6


def parse_number(x):
    """Return ``x`` as a Fraction when it is an exact rational, else a float.

    Strings such as ``"1/3"`` or ``"0.25"`` are parsed exactly. Floats are kept
    exact only when they round-trip through a fraction with denominator at
    most 10**6 (``0.7`` becomes ``7/10``, ``0.1 + 1e-14`` stays a float).
    """
    if isinstance(x, bool):
        raise ValidationError(f"not a number: {x!r}")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        try:
            fr = Fraction(x.strip())
        except ValueError:
            return float(x)
        if fr.denominator <= MAX_DENOMINATOR:
            return fr
        return float(fr)
    if isinstance(x, Real):
        x = float(x)
        if not np.isfinite(x):
            raise ValidationError(f"not a finite number: {x!r}")
        fr = Fraction(x).limit_denominator(MAX_DENOMINATOR)
        if float(fr) == x:
            return fr
        return x
    raise ValidationError(f"not a number: {x!r}")


def is_exact(*values):
    return all(isinstance(v, Fraction) for v in values)


def number_to_json(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else str(x.numerator)
    return float(x)


@dataclass(frozen=True)
class Weights:
    """Weights a (length m) and b (length n); entries are Fractions or floats."""

    a: tuple
    b: tuple

    @property
    def m(self):
        return len(self.a)

    @property
    def n(self):
        return len(self.b)

    @property
    def d(self):
        return self.m + self.n

    @property
    def exact(self):
        return is_exact(*self.a, *self.b)

    @property
    def top(self):
        """a_1 + b_1, the fastest expansion rate of the flow on matrices."""
        return self.a[0] + self.b[0]

    def as_arrays(self):
        return np.array(self.a, dtype=float), np.array(self.b, dtype=float)

    def exponents(self):
        """Diagonal exponents of g_t: (a_1, ..., a_m, -b_1, ..., -b_n)."""
        return tuple(self.a) + tuple(-x for x in self.b)

    def to_json(self):
        return {"a": [number_to_json(x) for x in self.a],
                "b": [number_to_json(x) for x in self.b]}

    @classmethod
    def from_json(cls, obj):
        try:
            return validate_weights(obj["a"], obj["b"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"weights must look like {{'a': [...], 'b': [...]}}: {exc}")


def _check_side(values, name):
    if len(values) == 0:
        raise ValidationError(f"{name} must be nonempty")
    for x in values:
        if x <= 0:
            raise NonPositiveEntry(f"{name} has a nonpositive entry {x}")
    for i in range(len(values) - 1):
        if values[i] < values[i + 1]:
            raise NotSorted(f"{name} must be nonincreasing, got {name}_{i + 1} < {name}_{i + 2}")
    total = sum(values)
    if isinstance(total, Fraction):
        ok = total == 1
    else:
        ok = abs(float(total) - 1.0) <= SUM_TOL
    if not ok:
        raise NotNormalized(f"{name} sums to {float(total)!r}, expected 1")


def validate_weights(a, b):
    """Build a :class:`Weights`, rejecting unsorted, unnormalized or nonpositive input."""
    a = tuple(parse_number(x) for x in a)
    b = tuple(parse_number(x) for x in b)
    _check_side(a, "a")
    _check_side(b, "b")
    return Weights(a, b)


def equal_weights(m, n):
    return Weights(tuple([Fraction(1, m)] * m), tuple([Fraction(1, n)] * n))


def quasi_norm(x, w):
    """max_i |x_i|^(1/w_i)."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape[-1:] != w.shape:
        raise LengthMismatch(f"vector of length {x.shape[-1:]} vs {len(w)} weights")
    if np.any(w <= 0):
        raise NonPositiveEntry("weights must be positive")
    if x.size == 0:
        return 0.0
    return np.max(np.abs(x) ** (1.0 / w), axis=-1)


def expansion_exponent(weights, l):
    """The exponent w_l: the slowest g_t growth rate on the expanding part of grade l."""
    m, d = weights.m, weights.d
    if not 1 <= l <= d - 1:
        raise IndexOutOfRange(f"l={l} outside 1..{d - 1}")
    if l <= m:
        return sum(weights.a[m - l:])
    return 1 - sum(weights.b[:l - m])
