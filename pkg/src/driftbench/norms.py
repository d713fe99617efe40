"""p-norms, dual exponents and the Hoelder gap."""
import math

import numpy as np

from .errors import InvalidInputError

INF = math.inf

# Default absolute tolerance for derived inequalities.
DEFAULT_TOL = 1e-9


def as_vector(v, name="v"):
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return arr


def check_exponent(p):
    p = float(p)
    if math.isnan(p) or p < 1:
        raise InvalidInputError(f"norm exponent must lie in [1, inf], got {p}")
    return p


def dual_exponent(p):
    """Hoelder conjugate q with 1/p + 1/q = 1 (1 <-> inf)."""
    p = check_exponent(p)
    if p == 1:
        return INF
    if p == INF:
        return 1.0
    return p / (p - 1)


def norm(v, p=2):
    v = as_vector(v)
    p = check_exponent(p)
    if v.size == 0:
        return 0.0
    a = np.abs(v)
    if p == INF:
        return float(a.max())
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(a @ a))
    # scale first so |v|^p cannot overflow
    m = a.max()
    if m == 0:
        return 0.0
    return float(m * np.sum((a / m) ** p) ** (1 / p))


def dual_norm(v, p=2):
    return norm(v, dual_exponent(p))


def holder_gap(x, y, p=2):
    """||x||_p * ||y||_q - x.y, nonnegative by Hoelder's inequality."""
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise InvalidInputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return norm(x, p) * dual_norm(y, p) - float(x @ y)
