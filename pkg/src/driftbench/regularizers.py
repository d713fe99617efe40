"""Mirror maps used by the OMD updates.

Each regularizer exposes its value, gradient, inverse gradient, the
strong-convexity constant ``sigma(n)`` and the exponent of the norm that
constant refers to.  The module-level functions (``bregman``,
``three_point_residual``, ``strong_convexity_gap``) are generic in the
regularizer and are what the tests probe.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import DomainError, InvalidInputError
from .norms import as_vector, dual_exponent, norm


def _scaled_power(v, r):
    """sign(v) |v|^r, computed relative to max|v| to keep it finite."""
    m = np.abs(v).max(initial=0.0)
    if m == 0:
        return np.zeros_like(v), 0.0
    h = v / m
    return np.sign(h) * np.abs(h) ** r, m


class Regularizer:
    kind = "abstract"
    reference_p = 2.0
    domain_note = ""

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def gradient_inverse(self, g):
        raise NotImplementedError

    def sigma(self, n):
        raise NotImplementedError

    @property
    def dual_p(self):
        return dual_exponent(self.reference_p)

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class CenteredSquaredL2(Regularizer):
    """R(x) = ||x - k||^2 / 2 (k = 0 when center is None)."""

    center: tuple = None
    kind = "centered_sq_l2"
    reference_p = 2.0
    domain_note = "all of R^n"

    def _k(self, x):
        if self.center is None:
            return np.zeros_like(x)
        k = np.asarray(self.center, dtype=float)
        if k.shape != x.shape:
            raise InvalidInputError(f"center has shape {k.shape}, point has {x.shape}")
        return k

    def value(self, x):
        x = as_vector(x, "x")
        d = x - self._k(x)
        return 0.5 * float(d @ d)

    def gradient(self, x):
        x = as_vector(x, "x")
        return x - self._k(x)

    def gradient_inverse(self, g):
        g = as_vector(g, "g")
        return g + self._k(g)

    def sigma(self, n=None):
        return 1.0

    def to_dict(self):
        return {"kind": self.kind, "center": None if self.center is None else list(self.center)}


@dataclass(frozen=True)
class NegEntropy(Regularizer):
    """R(x) = sum_i x_i ln x_i on x >= 0; 1/mass strongly convex wrt l1 on ||x||_1 <= mass."""

    mass: float = 1.0
    kind = "neg_entropy"
    reference_p = 1.0
    domain_note = "x_i >= 0 (gradient needs x_i > 0)"

    def value(self, x):
        x = as_vector(x, "x")
        if np.any(x < 0):
            raise DomainError("negative entropy needs x_i >= 0")
        pos = x > 0
        return float(np.sum(x[pos] * np.log(x[pos])))

    def gradient(self, x):
        x = as_vector(x, "x")
        if np.any(x <= 0):
            # zero coordinates send the gradient to -inf; the shifted variant exists for this
            raise DomainError("negative entropy gradient is unbounded at x_i <= 0")
        return np.log(x) + 1.0

    def gradient_inverse(self, g):
        g = as_vector(g, "g")
        return np.exp(g - 1.0)

    def sigma(self, n=None):
        return 1.0 / self.mass

    def to_dict(self):
        return {"kind": self.kind, "mass": self.mass}


@dataclass(frozen=True)
class ShiftedNegEntropy(Regularizer):
    """R(x) = sum_i (x_i + theta) ln(x_i + theta), theta > 0."""

    theta: float = 1.0
    mass: float = 1.0
    kind = "shifted_neg_entropy"
    reference_p = 1.0

    def __post_init__(self):
        if not (self.theta > 0 and math.isfinite(self.theta)):
            raise InvalidInputError(f"theta must be positive and finite, got {self.theta}")

    @property
    def domain_note(self):
        return f"x_i > -{self.theta!r}"

    @classmethod
    def for_dual_bound(cls, eta, alpha):
        """Smallest shift keeping the dual b_{i,t} inside [0, alpha]: 1/(e^{eta alpha} - 1)."""
        if eta <= 0 or alpha <= 0:
            raise InvalidInputError("eta and alpha must be positive")
        return cls(theta=1.0 / math.expm1(eta * alpha))

    def _shifted(self, x):
        s = x + self.theta
        if np.any(s <= 0):
            raise DomainError(f"shifted entropy needs x_i > -theta = {-self.theta!r}")
        return s

    def value(self, x):
        s = self._shifted(as_vector(x, "x"))
        return float(np.sum(s * np.log(s)))

    def gradient(self, x):
        s = self._shifted(as_vector(x, "x"))
        return np.log(s) + 1.0

    def gradient_inverse(self, g):
        g = as_vector(g, "g")
        return np.exp(g - 1.0) - self.theta

    def sigma(self, n):
        # entropy of the shifted point, whose l1 mass is mass + n*theta on the simplex
        return 1.0 / (self.mass + n * self.theta)

    def to_dict(self):
        return {"kind": self.kind, "theta": self.theta, "mass": self.mass}


@dataclass(frozen=True)
class PNormSquared(Regularizer):
    """R(x) = ||x||_p^2 / 2 for p in (1, 2]; (p-1)-strongly convex wrt l_p."""

    p: float = 2.0
    kind = "pnorm_sq"
    domain_note = "all of R^n"

    def __post_init__(self):
        if not (1 < self.p <= 2):
            raise InvalidInputError(f"PNormSquared needs p in (1, 2], got {self.p}")

    @property
    def reference_p(self):
        return float(self.p)

    def value(self, x):
        return 0.5 * norm(as_vector(x, "x"), self.p) ** 2

    def gradient(self, x):
        x = as_vector(x, "x")
        h, m = _scaled_power(x, self.p - 1)
        if m == 0:
            return h
        return m * norm(x / m, self.p) ** (2 - self.p) * h

    def gradient_inverse(self, g):
        # gradient of the conjugate ||g||_q^2 / 2
        g = as_vector(g, "g")
        q = dual_exponent(self.p)
        h, m = _scaled_power(g, q - 1)
        if m == 0:
            return h
        return m * norm(g / m, q) ** (2 - q) * h

    def sigma(self, n=None):
        return self.p - 1.0

    def to_dict(self):
        return {"kind": self.kind, "p": self.p}


def from_dict(d):
    kind = d["kind"]
    if kind == CenteredSquaredL2.kind:
        c = d.get("center")
        return CenteredSquaredL2(None if c is None else tuple(float(v) for v in c))
    if kind == NegEntropy.kind:
        return NegEntropy(mass=float(d.get("mass", 1.0)))
    if kind == ShiftedNegEntropy.kind:
        return ShiftedNegEntropy(theta=float(d["theta"]), mass=float(d.get("mass", 1.0)))
    if kind == PNormSquared.kind:
        return PNormSquared(p=float(d["p"]))
    raise InvalidInputError(f"unknown regularizer kind {kind!r}")


def value(R, x):
    return R.value(x)


def gradient(R, x):
    return R.gradient(x)


def gradient_inverse(R, g):
    return R.gradient_inverse(g)


def bregman(R, x, y):
    """B_R(x, y) = R(x) - R(y) - grad R(y).(x - y)."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return R.value(x) - R.value(y) - float(R.gradient(y) @ (x - y))


def three_point_residual(R, a, b, c):
    """|[grad R(a) - grad R(b)].(c - b) - (B(b,a) - B(c,a) + B(c,b))|."""
    a, b, c = (as_vector(v, name) for v, name in ((a, "a"), (b, "b"), (c, "c")))
    lhs = float((R.gradient(a) - R.gradient(b)) @ (c - b))
    rhs = bregman(R, b, a) - bregman(R, c, a) + bregman(R, c, b)
    return abs(lhs - rhs)


def strong_convexity_gap(R, x, y):
    """B_R(x, y) - sigma/2 ||x - y||^2 in the regularizer's reference norm."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    d = norm(x - y, R.reference_p)
    return bregman(R, x, y) - 0.5 * R.sigma(x.size) * d * d
