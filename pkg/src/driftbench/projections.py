"""Bregman projections onto the probability simplex and p-balls.

Projections onto the simplex take the *gradient* target g = grad R(y): for
the shifted entropy the pre-projection point can leave the domain of R even
though the mirror step is perfectly well defined in gradient space.
"""
from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp

from .errors import DegenerateBodyError, InvalidInputError, NumericError
from .norms import as_vector, dual_norm, norm
from .regularizers import (
    CenteredSquaredL2,
    NegEntropy,
    PNormSquared,
    Regularizer,
    ShiftedNegEntropy,
)

# coordinates at or below this count as zero when checking KKT conditions
ACTIVE_EPS = 1e-9
SIMPLEX_RESIDUAL_TOL = 1e-12
BISECT_MAX_ITER = 200


@dataclass(frozen=True)
class Simplex:
    n: int
    kind = "simplex"

    def violation(self, x):
        x = np.asarray(x, dtype=float)
        return max(abs(float(x.sum()) - 1.0), float(max(0.0, -x.min(initial=0.0))))

    def contains(self, x, tol=1e-9):
        return len(x) == self.n and self.violation(x) <= tol

    def default_point(self):
        return np.full(self.n, 1.0 / self.n)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}


@dataclass(frozen=True)
class PBall:
    """{x : ||x - center||_p <= radius}; center None means the origin."""

    p: float
    radius: float
    center: tuple = None
    kind = "pball"

    def __post_init__(self):
        if not self.radius > 0:
            raise DegenerateBodyError(f"ball radius must be positive, got {self.radius}")

    def k(self, n):
        if self.center is None:
            return np.zeros(n)
        return np.asarray(self.center, dtype=float)

    def violation(self, x):
        x = np.asarray(x, dtype=float)
        return max(0.0, norm(x - self.k(x.size), self.p) - self.radius)

    def contains(self, x, tol=1e-9):
        return self.violation(x) <= tol

    def default_point(self, n=None):
        if self.center is None:
            return np.zeros(n)
        return np.asarray(self.center, dtype=float)

    def to_dict(self):
        return {
            "kind": self.kind,
            "p": self.p,
            "radius": self.radius,
            "center": None if self.center is None else list(self.center),
        }


def body_from_dict(d):
    if d["kind"] == "simplex":
        return Simplex(int(d["n"]))
    if d["kind"] == "pball":
        c = d.get("center")
        return PBall(float(d["p"]), float(d["radius"]), None if c is None else tuple(float(v) for v in c))
    raise InvalidInputError(f"unknown body kind {d['kind']!r}")


@dataclass
class ProjectionResult:
    x: np.ndarray
    lam: float
    kappa: np.ndarray = None
    iterations: int = 0
    residual: float = 0.0


def project_ball_l2(k, D, y):
    """Euclidean projection onto the 2-ball around k; lam = ||y - k|| - D when clipped."""
    y = as_vector(y, "y")
    k = np.zeros_like(y) if k is None else as_vector(k, "k")
    if not D > 0:
        raise DegenerateBodyError(f"ball radius must be positive, got {D}")
    d = y - k
    r = norm(d, 2)
    if r <= D:
        return ProjectionResult(x=y.copy(), lam=0.0)
    x = k + (D / r) * d
    return ProjectionResult(x=x, lam=r - D, residual=abs(norm(x - k, 2) - D))


def project_pball(R, D, y):
    """Bregman projection for R = ||x||_p^2/2 onto the origin-centred p-ball of radius D.

    The KKT system forces grad R(x) to be a positive multiple of grad R(y), and
    R is p-homogeneous, so the minimiser is the radial rescaling of y.  lam is
    ||grad R(y) - grad R(x)||_q = ||y||_p - D.
    """
    if not isinstance(R, PNormSquared):
        raise InvalidInputError("project_pball needs a PNormSquared regularizer")
    if not D > 0:
        raise DegenerateBodyError(f"ball radius must be positive, got {D}")
    y = as_vector(y, "y")
    r = norm(y, R.p)
    if r <= D:
        return ProjectionResult(x=y.copy(), lam=0.0)
    x = (D / r) * y
    res = abs(norm(x, R.p) - D)
    if res > 1e-9 * max(1.0, D):
        raise NumericError("p-ball projection missed the boundary", residual=res)
    return ProjectionResult(x=x, lam=r - D, residual=res)


def _simplex_mass(w, lam, theta):
    return float(np.maximum(np.exp(w - lam) - theta, 0.0).sum())


def _shifted_lambda_sorted(w, theta):
    ws = np.sort(w)[::-1]
    ks = np.arange(1, ws.size + 1)
    lse = np.logaddexp.accumulate(ws)
    lams = lse - np.log1p(ks * theta)
    ok = np.exp(ws - lams) > theta
    k = int(np.nonzero(ok)[0].max()) if ok.any() else 0
    return float(lams[k])


def _shifted_lambda_bisect(w, theta):
    top = float(w.max())
    lo, hi = top - math.log1p(theta), top - math.log(theta)
    step = 1.0
    while _simplex_mass(w, lo, theta) < 1.0:
        lo -= step
        step *= 2
    step = 1.0
    while _simplex_mass(w, hi, theta) > 1.0:
        hi += step
        step *= 2
    for it in range(1, BISECT_MAX_ITER + 1):
        mid = 0.5 * (lo + hi)
        f = _simplex_mass(w, mid, theta) - 1.0
        if abs(f) <= SIMPLEX_RESIDUAL_TOL:
            return mid, it
        if f > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            return mid, it
    raise NumericError("simplex bisection hit the iteration cap", residual=abs(f))


def project_simplex_shifted_entropy(theta, y_gradient_point, method="sort"):
    """Project onto the simplex under R(x) = sum (x_i+theta) ln(x_i+theta).

    Solves sum_i max(0, exp(g_i - lam - 1) - theta) = 1 for the scalar lam;
    then g - grad R(x) = lam - kappa with kappa >= 0 and kappa_i x_i = 0.
    """
    if not (theta > 0 and math.isfinite(theta)):
        raise InvalidInputError(f"theta must be positive and finite, got {theta}")
    g = as_vector(y_gradient_point, "g")
    w = g - 1.0
    iterations = 0
    if method == "sort":
        lam = _shifted_lambda_sorted(w, theta)
        if abs(_simplex_mass(w, lam, theta) - 1.0) > SIMPLEX_RESIDUAL_TOL:
            lam, iterations = _shifted_lambda_bisect(w, theta)
    elif method == "bisect":
        lam, iterations = _shifted_lambda_bisect(w, theta)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    x = np.maximum(np.exp(w - lam) - theta, 0.0)
    grad_x = np.log(x + theta) + 1.0
    kappa = np.maximum(lam - (g - grad_x), 0.0)
    return ProjectionResult(x=x, lam=lam, kappa=kappa, iterations=iterations,
                            residual=abs(float(x.sum()) - 1.0))


def project_simplex_entropy(y_gradient_point):
    """Unshifted entropy: the projection is a softmax and lam = logsumexp(g - 1)."""
    g = as_vector(y_gradient_point, "g")
    lam = float(logsumexp(g - 1.0))
    x = np.exp(g - 1.0 - lam)
    return ProjectionResult(x=x, lam=lam, kappa=np.zeros_like(x), residual=abs(float(x.sum()) - 1.0))


def bregman_project(R: Regularizer, body, g):
    """Project the point whose mirror image is g onto body; dispatches on (R, body)."""
    g = as_vector(g, "g")
    if isinstance(body, Simplex):
        if g.size != body.n:
            raise InvalidInputError(f"gradient target has {g.size} entries, simplex has {body.n}")
        if isinstance(R, ShiftedNegEntropy):
            return project_simplex_shifted_entropy(R.theta, g)
        if isinstance(R, NegEntropy):
            return project_simplex_entropy(g)
    elif isinstance(body, PBall):
        if isinstance(R, CenteredSquaredL2) and body.p == 2:
            k = body.k(g.size)
            if not np.array_equal(R._k(g), k):
                raise InvalidInputError("regularizer center must match the ball center")
            return project_ball_l2(k, body.radius, R.gradient_inverse(g))
        if isinstance(R, PNormSquared) and body.p == R.p and body.center is None:
            return project_pball(R, body.radius, R.gradient_inverse(g))
    raise InvalidInputError(f"no projection for {type(R).__name__} onto {body!r}")


def projection_lemma_gap(R, body, y1, y2, gradients=False):
    """||grad R(y1) - grad R(y2)||_* - sigma ||x1 - x2||; nonnegative by the projection lemma.

    With gradients=True, y1 and y2 are already mirror-space targets.
    """
    g1 = as_vector(y1, "y1") if gradients else R.gradient(y1)
    g2 = as_vector(y2, "y2") if gradients else R.gradient(y2)
    x1 = bregman_project(R, body, g1).x
    x2 = bregman_project(R, body, g2).x
    p = R.reference_p
    return dual_norm(g1 - g2, p) - R.sigma(x1.size) * norm(x1 - x2, p)
