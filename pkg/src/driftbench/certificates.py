"""Dual certificates built from OMD traces, their feasibility checks and the
bound inequalities they imply.

Four program pairs are covered:

=============  ======================  =================================
program        primal                  run that builds it
=============  ======================  =================================
OCO_PBALL      fixed comparator, p-ball  0LA, R = ||x||_p^2/2 (or ||x||^2/2)
DRIFT_EXPERT   drifting experts (LP)   0LA, shifted entropy on simplex
ONELA_2BALL    1LA, l2 movement        1LA, R = ||x-k||^2/2 on a 2-ball
ONELA_MTS      alpha-unfair MTS (LP)   1LA, shifted entropy on simplex
=============  ======================  =================================

OCO_PBALL and ONELA_2BALL carry one extra *terminal* multiplier.  The last
dual vector b_T (resp. b_{T+1}) multiplies a primal variable that has no
constraint of its own, so without closing the program at the horizon the
dual objective is not a lower bound on OPT.  The closure adds the redundant
ball constraint on the last iterate; ``terminal=False`` drops it.
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import InvalidInputError
from .norms import dual_exponent, dual_norm, norm
from .omd import lemma2_decomposition, mirror_potential
from .projections import ACTIVE_EPS, PBall, Simplex
from .regularizers import CenteredSquaredL2, ShiftedNegEntropy

PROGRAMS = ("OCO_PBALL", "DRIFT_EXPERT", "ONELA_2BALL", "ONELA_MTS")
FEAS_TOL = 1e-8


@dataclass
class DualCertificate:
    """Dual variables for one program.

    ``a[j]`` is a_j (j from 0).  Row j of ``b`` is b_{j+1}.  ``a_terminal`` is
    the closing multiplier (None when the program needs none or it was
    disabled).
    """

    program: str
    a: np.ndarray
    b: np.ndarray
    eta: float
    objective: float
    alpha: float = None
    radius: float = None
    center: tuple = None
    theta: float = None
    drift_budget: float = 0.0
    a_terminal: float = None
    a0_convention: str = ""
    p: float = 2.0

    @property
    def q(self):
        return dual_exponent(self.p)

    def to_dict(self):
        return {
            "program": self.program,
            "a": self.a.tolist(),
            "b": self.b.tolist(),
            "eta": self.eta,
            "objective": self.objective,
            "alpha": self.alpha,
            "radius": self.radius,
            "center": None if self.center is None else list(self.center),
            "theta": self.theta,
            "drift_budget": self.drift_budget,
            "a_terminal": self.a_terminal,
            "a0_convention": self.a0_convention,
            "p": self.p,
        }

    @classmethod
    def from_dict(cls, d):
        n = len(d["b"][0]) if d["b"] else 0
        return cls(
            program=d["program"],
            a=np.asarray(d["a"], dtype=float),
            b=np.asarray(d["b"], dtype=float).reshape(-1, n),
            eta=d["eta"],
            objective=d["objective"],
            alpha=d["alpha"],
            radius=d["radius"],
            center=None if d["center"] is None else tuple(d["center"]),
            theta=d["theta"],
            drift_budget=d["drift_budget"],
            a_terminal=d["a_terminal"],
            a0_convention=d["a0_convention"],
            p=d["p"],
        )


def _check_eta(trace, eta):
    if eta is None:
        return trace.eta
    if not math.isclose(eta, trace.eta, rel_tol=1e-12):
        raise InvalidInputError(f"eta={eta} does not match the trace's eta={trace.eta}")
    return float(eta)


def _check_theta(trace, eta, alpha):
    R = trace.regularizer
    if not isinstance(R, ShiftedNegEntropy) or not isinstance(trace.body, Simplex):
        raise InvalidInputError("needs a shifted-entropy simplex trace")
    if not alpha > 0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    want = 1.0 / math.expm1(eta * alpha)
    if not math.isclose(R.theta, want, rel_tol=1e-9):
        raise InvalidInputError(f"trace theta={R.theta} but 1/(e^(eta alpha)-1)={want}")
    return R


def _grads(trace):
    R = trace.regularizer
    return np.array([R.gradient(x) for x in trace.xs])


def build_oco_pball(trace, eta=None, terminal=True):
    """eta b_t = -grad R(x_t); eta a_t = ||grad R(y_{t+1}) - grad R(x_{t+1})||_q,
    eta a_0 = ||grad R(y_1) - grad R(x_1) - grad R(x_0)||_q."""
    eta = _check_eta(trace, eta)
    body = trace.body
    if trace.lookahead != "0LA" or not isinstance(body, PBall) or body.center is not None:
        raise InvalidInputError("OCO_PBALL needs a 0LA trace on an origin-centred p-ball")
    q = dual_exponent(body.p)
    T = trace.T
    gx = _grads(trace)
    b = -gx[1:] / eta
    a = np.zeros(T)
    if T:
        a[0] = dual_norm(trace.grads[0] - gx[1] - gx[0], body.p) / eta
        for t in range(1, T):
            a[t] = dual_norm(trace.grads[t] - gx[t + 1], body.p) / eta
    a_term = float(norm(b[-1], q)) if (terminal and T) else None
    total = a.sum() + (a_term or 0.0)
    return DualCertificate(
        program="OCO_PBALL", a=a, b=b, eta=eta, objective=-body.radius * float(total),
        radius=body.radius, a_terminal=a_term, a0_convention="shifted", p=float(body.p),
    )


def build_drift_expert(trace, eta, alpha, drift_budget=0.0):
    """eta b_{i,t} = [grad R(1) - grad R(x_t)]_i, a_t = lam_{t+1}/eta (t >= 1),
    a_0 = max_i (b_{i,1} - c_{i,1})."""
    eta = _check_eta(trace, eta)
    if trace.lookahead != "0LA":
        raise InvalidInputError("DRIFT_EXPERT needs a 0LA trace")
    R = _check_theta(trace, eta, alpha)
    T = trace.T
    g_one = math.log1p(R.theta) + 1.0
    b = (g_one - _grads(trace)[1:]) / eta
    a = np.zeros(T)
    if T:
        a[0] = float(np.max(b[0] - trace.costs[0]))
        a[1:] = trace.lam[1:] / eta
    return DualCertificate(
        program="DRIFT_EXPERT", a=a, b=b, eta=eta, alpha=float(alpha),
        objective=-float(a.sum()) - alpha * drift_budget, theta=R.theta,
        drift_budget=float(drift_budget), a0_convention="tight", p=1.0,
    )


def build_onela_2ball(trace, eta=None, terminal=True):
    """eta b_{t+1} = -(x_t - k); eta a_t = ||grad R(y_t - k) - grad R(x_t - k)|| (t >= 1),
    eta a_0 = ||x_0 - k||."""
    eta = _check_eta(trace, eta)
    body = trace.body
    if trace.lookahead != "1LA" or not isinstance(body, PBall) or body.p != 2:
        raise InvalidInputError("ONELA_2BALL needs a 1LA trace on a 2-ball")
    if not isinstance(trace.regularizer, CenteredSquaredL2):
        raise InvalidInputError("ONELA_2BALL needs the centred squared-l2 regularizer")
    T, n = trace.T, trace.n
    k = body.k(n)
    shifted = trace.xs - k
    b = -shifted / eta
    a = np.zeros(T + 1)
    a[0] = norm(shifted[0], 2) / eta
    for t in range(1, T + 1):
        a[t] = norm(trace.grads[t - 1] - shifted[t], 2) / eta
    a_term = float(norm(b[-1], 2)) if terminal else None
    total = a.sum() + (a_term or 0.0)
    return DualCertificate(
        program="ONELA_2BALL", a=a, b=b, eta=eta,
        objective=float(np.sum(trace.costs @ k)) - body.radius * float(total),
        radius=body.radius, center=tuple(float(v) for v in k), a_terminal=a_term,
        a0_convention="centre_distance", p=2.0,
    )


def build_onela_mts(trace, eta, alpha):
    """b_{t+1} = (grad R(1) - grad R(x_t))/eta, a_t = -lam_t/eta (t >= 1), a_0 = -max_i b_{i,1}."""
    eta = _check_eta(trace, eta)
    if trace.lookahead != "1LA":
        raise InvalidInputError("ONELA_MTS needs a 1LA trace")
    R = _check_theta(trace, eta, alpha)
    T = trace.T
    g_one = math.log1p(R.theta) + 1.0
    b = (g_one - _grads(trace)) / eta
    a = np.zeros(T + 1)
    a[0] = -float(np.max(b[0]))
    a[1:] = -trace.lam / eta
    return DualCertificate(
        program="ONELA_MTS", a=a, b=b, eta=eta, alpha=float(alpha), objective=float(a.sum()),
        theta=R.theta, a0_convention="tight", p=1.0,
    )


@dataclass(frozen=True)
class Violation:
    constraint: str
    t: int
    i: object
    magnitude: float


def _collect(out, name, excess, ts, tol, coords=False):
    """Append a violation for every entry of excess above tol.  excess is
    indexed [row] or [row, i]; ts maps rows to time indices."""
    excess = np.asarray(excess, dtype=float)
    if excess.ndim == 1:
        for r in np.nonzero(excess > tol)[0]:
            out.append(Violation(name, int(ts[r]), None, float(excess[r])))
    else:
        for r, i in zip(*np.nonzero(excess > tol)):
            out.append(Violation(name, int(ts[r]), int(i), float(excess[r, i])))


def check_feasibility(cert, costs, tol=FEAS_TOL):
    """List every violated dual constraint (empty list <=> feasible at tol)."""
    costs = np.asarray(costs, dtype=float)
    a, b = cert.a, cert.b
    T = costs.shape[0]
    out = []
    prog = cert.program
    if T == 0:
        return out
    if prog == "OCO_PBALL":
        q = cert.q
        need = np.empty(T)
        need[0] = norm(b[0] - costs[0], q)
        for t in range(1, T):
            need[t] = norm(b[t] - b[t - 1] - costs[t], q)
        _collect(out, "dual_norm", need - a, np.arange(T), tol)
        _collect(out, "a_nonneg", -a, np.arange(T), tol)
        if cert.a_terminal is not None:
            _collect(out, "terminal", [norm(b[-1], q) - cert.a_terminal], [T], tol)
    elif prog == "DRIFT_EXPERT":
        need = np.empty_like(b)
        need[0] = b[0] - costs[0]
        need[1:] = b[1:] - b[:-1] - costs[1:]
        _collect(out, "a_ge_increment", need - a[:, None], np.arange(T), tol)
        _collect(out, "b_lower", -b, np.arange(1, T + 1), tol)
        _collect(out, "b_upper", b - cert.alpha, np.arange(1, T + 1), tol)
        _collect(out, "alpha_nonneg", [-cert.alpha], [0], tol)
    elif prog == "ONELA_2BALL":
        _collect(out, "b_norm", np.linalg.norm(b, axis=1) - 1.0, np.arange(1, T + 2), tol)
        _collect(out, "a0", [norm(b[0], 2) - a[0]], [0], tol)
        need = np.linalg.norm(b[1:] - b[:-1] - costs, axis=1)
        _collect(out, "dual_norm", need - a[1:], np.arange(1, T + 1), tol)
        _collect(out, "a_nonneg", -a, np.arange(T + 1), tol)
        if cert.a_terminal is not None:
            _collect(out, "terminal", [norm(b[-1], 2) - cert.a_terminal], [T + 1], tol)
    elif prog == "ONELA_MTS":
        _collect(out, "a0", (a[0] + b[0])[None, :], [0], tol)
        excess = b[1:] - b[:-1] - costs + a[1:, None]
        _collect(out, "b_step", excess, np.arange(1, T + 1), tol)
        _collect(out, "b_lower", -b, np.arange(1, T + 2), tol)
        _collect(out, "b_upper", b - cert.alpha, np.arange(1, T + 2), tol)
    else:
        raise InvalidInputError(f"unknown program {prog!r}")
    return out


def weak_duality_gap(cert, opt_value):
    """OPT - dual objective; nonnegative for a feasible certificate."""
    return float(opt_value) - cert.objective


def entropy_lemma_gap(a, b):
    """a (ln a - ln b) - (a - b) >= 0 for a, b > 0."""
    return a * (math.log(a) - math.log(b)) - (a - b)


@dataclass
class Check:
    name: str
    lhs: float
    rhs: float
    slack: float
    passed: bool
    tol: float
    note: str = ""

    def to_dict(self):
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack,
                "pass": self.passed, "tol": self.tol, "note": self.note}


def make_check(name, lhs, rhs, tol, note=""):
    """lhs <= rhs up to tol."""
    lhs, rhs = float(lhs), float(rhs)
    slack = rhs - lhs
    return Check(name, lhs, rhs, slack, bool(slack >= -tol), float(tol), note)


def per_step_check(name, lhs, rhs, tol=1e-9):
    """Worst step of a vector inequality lhs_t <= rhs_t."""
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.size == 0:
        return make_check(name, 0.0, 0.0, tol, note="no steps")
    s = rhs - lhs
    w = int(np.argmin(s))
    return make_check(name, lhs[w], rhs[w], tol, note=f"worst step t={w + 1} of {lhs.size}")


def _scaled(tol, *vals):
    return tol * max([1.0] + [abs(float(v)) for v in vals])


def path_drift(U, p):
    U = np.asarray(U, dtype=float)
    if U.shape[0] < 2:
        return 0.0
    return float(sum(norm(d, p) for d in np.diff(U, axis=0)))


@dataclass
class BoundReport:
    checks: list = field(default_factory=list)
    skipped: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def by_name(self):
        return {c.name: c for c in self.checks}


def _decomposition_checks(rep, trace, U, tol):
    lt = lemma2_decomposition(trace, U)
    rep.checks.append(make_check("decomposition_residual", lt.residual, 0.0, 1e-7 * max(1.0, abs(lt.lhs))))
    rep.checks.append(make_check("decomposition_bound", lt.part2_lhs, lt.part2_rhs,
                                 _scaled(tol, lt.part2_lhs, lt.part2_rhs)))
    return lt


def _drift_decomposition_check(rep, trace, U, lt, tol):
    """eta S0 <= sum ||u_t - u_{t-1}||_p ||grad R(u_t)||_q + A + sum ||eta c||_q^2/sigma - mult."""
    R, eta = trace.regularizer, trace.eta
    p = R.reference_p
    drift = sum(norm(U[t] - U[t - 1], p) * dual_norm(R.gradient(U[t]), p) for t in range(1, len(U)))
    sq = sum(dual_norm(eta * c, p) ** 2 for c in trace.costs) / R.sigma(trace.n)
    rhs = drift + lt.A + sq - lt.multiplier_term
    rep.checks.append(make_check("drift_decomposition", lt.lhs, rhs, _scaled(tol, lt.lhs, rhs)))


def theorem_bound_report(trace, cert, opt_value=None, comparator=None, epsilon=None, tol=1e-9):
    """Evaluate every bound inequality that applies to this run.

    opt_value is the offline optimum of the certificate's primal program;
    comparator is a sequence u_0..u_{T-1} (drift is measured from it).
    Missing inputs turn the dependent checks into ``skipped`` entries.
    """
    rep = BoundReport()
    T, n, eta = trace.T, trace.n, trace.eta
    R = trace.regularizer
    costs = trace.costs
    U = None if comparator is None else np.asarray(comparator, dtype=float).reshape(-1, n)
    prog = cert.program
    opt_tol = None if opt_value is None else 1e-6 * max(1.0, abs(opt_value))

    if opt_value is not None:
        rep.checks.append(make_check("weak_duality", cert.objective, opt_value, opt_tol))
    else:
        rep.skipped.append("weak_duality")

    if prog in ("OCO_PBALL", "DRIFT_EXPERT"):
        p = R.reference_p
        sigma = R.sigma(n)
        sq = sum(dual_norm(c, p) ** 2 for c in costs)
        S0 = trace.S
        U_l2 = U if U is not None else np.tile(trace.xs[0], (T, 1))
        lt = _decomposition_checks(rep, trace, U_l2, tol)
        if U is not None:
            _drift_decomposition_check(rep, trace, U, lt, tol)
        else:
            rep.skipped.append("drift_decomposition")

    if prog == "OCO_PBALL":
        D = cert.radius
        phi0 = mirror_potential(R, trace.xs[0])
        phiT = mirror_potential(R, trace.xs[-1])
        rhs = (phi0 - phiT) / eta + eta * sq / sigma - D * float(trace.lam.sum()) / eta
        rep.checks.append(make_check("service_bound", S0, rhs, _scaled(tol, S0, rhs)))
        if T:
            need = np.empty(T)
            need[0] = norm(cert.b[0] - costs[0], cert.q)
            for t in range(1, T):
                need[t] = norm(cert.b[t] - cert.b[t - 1] - costs[t], cert.q)
            rep.checks.append(make_check("oco_tightness", float(np.max(np.abs(cert.a - need))), 0.0, tol))
        if opt_value is not None:
            g0 = dual_norm(R.gradient(trace.xs[0]), p)
            gT = dual_norm(R.gradient(trace.xs[-1]), p)
            rr = (phi0 - phiT + D * (g0 + gT)) / eta + eta * sq / sigma
            rep.checks.append(make_check("fixed_regret", S0 - opt_value, rr, _scaled(tol, S0, rr)))
        else:
            rep.skipped.append("fixed_regret")

    elif prog == "DRIFT_EXPERT":
        L = cert.drift_budget if U is None else path_drift(U, 1) / 2
        dual_obj = -float(cert.a.sum()) - cert.alpha * L
        bound = 3 * (L + 2) * math.log(n) / eta + eta * sq
        rep.checks.append(make_check("drift_service_bound", S0, bound + dual_obj, _scaled(tol, S0, bound),
                                     note=f"L={L!r}"))
        if U is not None:
            cost_u = float(np.sum(costs * U))
            rep.checks.append(make_check("drift_regret", S0 - cost_u, bound, _scaled(tol, S0, bound),
                                         note=f"L={L!r}"))
        else:
            rep.skipped.append("drift_regret")

    elif prog == "ONELA_2BALL":
        D = cert.radius
        k = np.asarray(cert.center)
        S1, M = trace.S, trace.M
        a = cert.a
        cn2 = np.linalg.norm(costs, axis=1)
        cn1 = np.abs(costs).sum(axis=1)
        dD = costs @ k - D * a[1:]
        rep.checks.append(make_check("competitive_service_dual", S1, cert.objective + D / eta,
                                     _scaled(tol, S1, cert.objective)))
        rep.checks.append(per_step_check("multiplier_le_cost", a[1:], cn2))
        rep.checks.append(per_step_check("movement_step", trace.movement, eta * cn2))
        if epsilon is not None and epsilon > 0:
            rep.checks.append(per_step_check("dual_increment", epsilon * cn1, dD))
            rep.checks.append(make_check("movement_chain", M, (eta / epsilon) * float(dD.sum()),
                                         _scaled(tol, M)))
        else:
            rep.skipped += ["dual_increment", "movement_chain"]
        shifted = trace.xs[1:] - k
        resid = trace.grads - shifted
        C = -float(np.sum(resid * shifted))
        rep.checks.append(make_check("multiplier_sum_identity", abs(C + D * eta * float(a[1:].sum())), 0.0,
                                     _scaled(tol, C)))
        worst = 0.0
        for t in np.nonzero(a[1:] > ACTIVE_EPS)[0]:
            r = norm(shifted[t], 2)
            worst = max(worst, float(np.max(np.abs(eta * a[t + 1] * shifted[t] / r - resid[t]))))
        rep.checks.append(make_check("ball_identity", worst, 0.0, tol))
        if opt_value is not None and epsilon:
            rep.checks.append(make_check("competitive_service", S1, opt_value + D / eta, opt_tol))
            rep.checks.append(make_check("competitive_movement", M, (eta / epsilon) * opt_value, opt_tol))
            rep.checks.append(make_check("competitive_total", S1 + M,
                                         (1 + eta / epsilon) * opt_value + D / eta, opt_tol))
        else:
            rep.skipped += ["competitive_service", "competitive_movement", "competitive_total"]

    elif prog == "ONELA_MTS":
        theta = cert.theta
        up = np.maximum(np.diff(trace.xs, axis=0), 0.0).sum(axis=1)
        rep.checks.append(per_step_check("mts_movement", up, eta * (1 + n * theta) * cert.a[1:]))
        active = trace.xs[1:] > ACTIVE_EPS
        b = cert.b
        gap = np.abs(b[1:] - b[:-1] - costs + cert.a[1:, None])
        rep.checks.append(make_check("mts_tightness", float(np.max(gap[active], initial=0.0)), 0.0, tol))
    return rep
