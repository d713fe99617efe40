"""0-lookahead and 1-lookahead online mirror descent runs.

A run produces a :class:`Trace` holding every iterate, the mirror-space
target grad R(y_t), the projection multipliers and the per-step service and
movement charges.  Charging order:

* 0LA: pay c_t . x_{t-1}, then step.
* 1LA: receive c_t, step, then pay c_t . x_t plus ||x_t - x_{t-1}||.
"""
from dataclasses import dataclass, replace

import numpy as np

from .errors import DriftbenchError, InvalidInputError, StepError
from .norms import as_vector, dual_norm, norm
from .projections import PBall, Simplex, bregman_project
from .regularizers import bregman

LOOKAHEADS = ("0LA", "1LA")


@dataclass
class Scenario:
    body: object
    regularizer: object
    eta: float
    costs: np.ndarray
    lookahead: str = "0LA"
    x0: np.ndarray = None
    movement_p: float = None
    epsilon: float = 0.0
    alpha: float = 0.0

    def __post_init__(self):
        if self.lookahead not in LOOKAHEADS:
            raise InvalidInputError(f"lookahead must be one of {LOOKAHEADS}")
        if not self.eta > 0:
            raise InvalidInputError(f"eta must be positive, got {self.eta}")
        costs = np.asarray(self.costs, dtype=float)
        n = self.dimension
        if costs.size == 0:
            costs = np.zeros((0, n))
        if costs.ndim != 2 or costs.shape[1] != n:
            raise InvalidInputError(f"costs must have shape (T, {n}), got {costs.shape}")
        if not np.all(np.isfinite(costs)):
            raise InvalidInputError("costs contain non-finite entries")
        self.costs = costs
        if self.x0 is None:
            self.x0 = default_start(self.body, n)
        self.x0 = as_vector(self.x0, "x0")
        if not self.body.contains(self.x0):
            raise InvalidInputError("x0 is not feasible for the body")
        if self.movement_p is None:
            self.movement_p = 1.0 if isinstance(self.body, Simplex) else float(self.body.p)
        if self.lookahead == "1LA":
            if np.any(costs < 0):
                raise InvalidInputError("1-lookahead needs nonnegative costs")
            if isinstance(self.body, PBall):
                k = self.body.k(n)
                if np.any(k - self.body.radius < 0):
                    raise InvalidInputError("1-lookahead ball must lie in the nonnegative orthant")

    @property
    def dimension(self):
        if isinstance(self.body, Simplex):
            return self.body.n
        if self.body.center is not None:
            return len(self.body.center)
        if self.x0 is not None:
            return len(self.x0)
        return np.asarray(self.costs).shape[-1]

    @property
    def T(self):
        return self.costs.shape[0]


def default_start(body, n):
    """Uniform point on the simplex, the centre of a ball."""
    if isinstance(body, Simplex):
        return body.default_point()
    return body.default_point(n)


@dataclass
class Trace:
    """Full record of a run.  Row t of ``xs`` is x_t (row 0 is x0); rows of
    ``costs``, ``grads``, ``lam``, ``kappa``, ``service``, ``movement`` are
    indexed by t-1."""

    lookahead: str
    eta: float
    body: object
    regularizer: object
    movement_p: float
    costs: np.ndarray
    xs: np.ndarray
    grads: np.ndarray
    lam: np.ndarray
    kappa: np.ndarray
    service: np.ndarray
    movement: np.ndarray

    @property
    def T(self):
        return self.costs.shape[0]

    @property
    def n(self):
        return self.xs.shape[1]

    @property
    def S(self):
        return float(self.service.sum())

    @property
    def M(self):
        return float(self.movement.sum())

    def records(self):
        for t in range(1, self.T + 1):
            yield {
                "t": t,
                "c": self.costs[t - 1],
                "x": self.xs[t],
                "y_grad": self.grads[t - 1],
                "lam": float(self.lam[t - 1]),
                "kappa": None if self.kappa is None else self.kappa[t - 1],
                "service": float(self.service[t - 1]),
                "movement": float(self.movement[t - 1]),
            }


@dataclass
class OMDState:
    regularizer: object
    body: object
    eta: float
    x: np.ndarray


def omd_step(state, c):
    """grad R(y_t) = grad R(x_{t-1}) - eta c_t, x_t = Pi(y_t).

    Returns the new state, the mirror target and the projection result.
    """
    c = as_vector(c, "c")
    g = state.regularizer.gradient(state.x) - state.eta * c
    proj = bregman_project(state.regularizer, state.body, g)
    return replace(state, x=proj.x), g, proj


def _empty_trace(sc, n):
    T = sc.T
    has_kappa = isinstance(sc.body, Simplex)
    return Trace(
        lookahead=sc.lookahead,
        eta=float(sc.eta),
        body=sc.body,
        regularizer=sc.regularizer,
        movement_p=float(sc.movement_p),
        costs=sc.costs.copy(),
        xs=np.zeros((T + 1, n)),
        grads=np.zeros((T, n)),
        lam=np.zeros(T),
        kappa=np.zeros((T, n)) if has_kappa else None,
        service=np.zeros(T),
        movement=np.zeros(T),
    )


def _truncate(tr, t):
    """Keep the first t completed steps."""
    return replace(
        tr,
        costs=tr.costs[:t], xs=tr.xs[: t + 1], grads=tr.grads[:t], lam=tr.lam[:t],
        kappa=None if tr.kappa is None else tr.kappa[:t],
        service=tr.service[:t], movement=tr.movement[:t],
    )


def run(scenario):
    sc = scenario
    n = sc.x0.size
    tr = _empty_trace(sc, n)
    tr.xs[0] = sc.x0
    state = OMDState(sc.regularizer, sc.body, float(sc.eta), sc.x0.copy())
    for t in range(1, sc.T + 1):
        c = sc.costs[t - 1]
        x_prev = state.x
        try:
            state, g, proj = omd_step(state, c)
        except DriftbenchError as exc:
            raise StepError(str(exc), t, partial=_truncate(tr, t - 1)) from exc
        tr.xs[t] = state.x
        tr.grads[t - 1] = g
        tr.lam[t - 1] = proj.lam
        if tr.kappa is not None:
            tr.kappa[t - 1] = proj.kappa
        paid_at = x_prev if sc.lookahead == "0LA" else state.x
        tr.service[t - 1] = float(c @ paid_at)
        tr.movement[t - 1] = norm(state.x - x_prev, sc.movement_p)
    return tr


def mirror_potential(R, x):
    """phi(x) = grad R(x).x - R(x); the u-free remainder of the regret decomposition."""
    return float(R.gradient(x) @ x) - R.value(x)


@dataclass
class DecompositionTerms:
    lhs: float
    P: float
    Q: float
    A: float
    B: float
    C: float
    drift_term: float
    residual: float
    three_point_residual: float
    part2_lhs: float
    part2_rhs: float
    multiplier_term: float

    @property
    def part2_slack(self):
        return self.part2_rhs - self.part2_lhs


def lemma2_decomposition(trace, comparators):
    """Regret decomposition of a run against comparators u_0..u_{T-1}.

    eta sum c_t.x_{t-1} = sum_{t=1}^{T-1} (R(u_t) - R(u_{t-1})) + A + B + C (part 1),
    B + C <= sum ||eta c_t||_*^2 / sigma - sum [grad R(y_t) - grad R(x_t)].x_t (part 2),
    and the last sum equals D * sum lam_t on origin-centred balls, sum lam_t on the simplex.
    """
    T, n = trace.T, trace.n
    U = np.asarray(comparators, dtype=float).reshape(-1, n) if T else np.zeros((0, n))
    if U.shape[0] != T:
        raise InvalidInputError(f"need {T} comparators, got {U.shape[0]}")
    R, eta, xs = trace.regularizer, trace.eta, trace.xs
    lhs = eta * float(np.sum(trace.costs * xs[:-1]))
    if T == 0:
        return DecompositionTerms(lhs, 0, 0, 0, 0, 0, 0, abs(lhs), abs(lhs), 0, 0, 0)
    grads_x = np.array([R.gradient(x) for x in xs])
    P = Q = B = C = 0.0
    cs = 0.0
    for t in range(1, T + 1):
        u = U[t - 1]
        P += bregman(R, u, xs[t - 1]) - bregman(R, u, xs[t])
        Q += float((grads_x[t - 1] - grads_x[t]) @ u)
        B += bregman(R, xs[t - 1], xs[t])
        C += float((grads_x[t] - trace.grads[t - 1]) @ xs[t - 1])
        cs += float((trace.grads[t - 1] - grads_x[t]) @ xs[t])
    A = (bregman(R, U[0], xs[0]) - bregman(R, U[-1], xs[T])
         + float(grads_x[0] @ U[0]) - float(grads_x[T] @ U[-1]))
    drift = R.value(U[-1]) - R.value(U[0])  # telescoped sum_{t=1}^{T-1}
    residual = abs(lhs - (drift + A + B + C))
    tp_residual = abs(lhs - (P + Q + B + C))
    body = trace.body
    if isinstance(body, Simplex):
        mult = float(trace.lam.sum())
    elif isinstance(body, PBall) and body.center is None:
        mult = body.radius * float(trace.lam.sum())
    else:
        mult = cs
    sigma = R.sigma(n)
    qp = R.reference_p
    sq = sum(dual_norm(eta * c, qp) ** 2 for c in trace.costs) / sigma
    return DecompositionTerms(lhs, P, Q, A, B, C, drift, residual, tp_residual,
                       part2_lhs=B + C, part2_rhs=sq - mult, multiplier_term=mult)


def replay_residual(trace):
    """Largest gap between the stored iterates and a fresh run on the same inputs."""
    sc = Scenario(trace.body, trace.regularizer, trace.eta, trace.costs, trace.lookahead,
                  x0=trace.xs[0], movement_p=trace.movement_p)
    fresh = run(sc)
    return float(np.max(np.abs(fresh.xs - trace.xs), initial=0.0))
