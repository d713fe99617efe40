"""Cost generators, comparator paths and offline optima.

The offline solvers are the independent side of every weak-duality check:
closed forms for a fixed comparator, HiGHS linear programs for the simplex
programs and conic programs (cvxpy + Clarabel) for the ball programs.
"""
from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, vstack

from .errors import InvalidInputError, NumericError
from .norms import dual_exponent, norm
from .projections import Simplex

COST_KINDS = ("uniform", "switcher", "spike", "radial", "file")


@dataclass(frozen=True)
class CostModel:
    kind: str = "uniform"
    low: float = 0.0
    high: float = 1.0
    period: int = 10
    spike_t: int = 1
    magnitude: float = 1.0
    path: str = None
    nonneg: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise InvalidInputError(f"unknown cost model {self.kind!r}; expected one of {COST_KINDS}")
        if self.kind == "uniform" and not self.low <= self.high:
            raise InvalidInputError(f"uniform range needs low <= high, got [{self.low}, {self.high}]")
        if self.kind == "switcher" and self.period < 1:
            raise InvalidInputError("switcher period must be >= 1")


def read_cost_file(path, n=None):
    """One round per line, whitespace separated decimals, '#' starts a comment."""
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError as e:
            raise InvalidInputError(f"{path}:{lineno}: {e}") from None
        if not all(math.isfinite(v) for v in row):
            raise InvalidInputError(f"{path}:{lineno}: non-finite entry")
        if rows and len(row) != len(rows[0]):
            raise InvalidInputError(f"{path}:{lineno}: expected {len(rows[0])} entries, got {len(row)}")
        rows.append(row)
    if n is not None and rows and len(rows[0]) != n:
        raise InvalidInputError(f"{path}:1: expected dimension {n}, got {len(rows[0])}")
    width = len(rows[0]) if rows else (n or 0)
    return np.array(rows, dtype=float).reshape(-1, width)


def write_cost_file(path, costs):
    with open(path, "w") as f:
        for row in np.asarray(costs, dtype=float):
            f.write(" ".join(repr(float(v)) for v in row) + "\n")


def gen_costs(model, T, n):
    """T x n cost matrix; row t-1 is c_t."""
    if T < 0 or n < 1:
        raise InvalidInputError(f"need T >= 0 and n >= 1, got T={T}, n={n}")
    rng = np.random.default_rng(model.seed)
    kind = model.kind
    if kind == "uniform":
        low = max(model.low, 0.0) if model.nonneg else model.low
        high = max(model.high, low)
        return rng.uniform(low, high, size=(T, n))
    if kind == "switcher":
        c = np.ones((T, n))
        cheap = (np.arange(T) // model.period) % n
        c[np.arange(T), cheap] = 0.0
        return c
    if kind == "spike":
        c = np.zeros((T, n))
        if 1 <= model.spike_t <= T:
            c[model.spike_t - 1] = model.magnitude
        return c
    if kind == "radial":
        d = rng.standard_normal((T, n))
        d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
        if model.nonneg:
            return model.magnitude * np.abs(d)
        # odd rounds reverse the previous direction so the iterate keeps chasing
        d[1::2] = -d[0::2][: T // 2]
        return model.magnitude * d
    c = read_cost_file(model.path, n)[:T]
    if c.shape[0] < T:
        raise InvalidInputError(f"{model.path}: has {c.shape[0]} rounds, need {T}")
    if model.nonneg and np.any(c < 0):
        raise InvalidInputError(f"{model.path}: negative cost with nonneg set")
    return c


@dataclass
class ComparatorPath:
    u: np.ndarray
    drift_l1: float
    drift_lp: float
    p: float = 2.0

    @property
    def drift_half_l1(self):
        return self.drift_l1 / 2

    @classmethod
    def from_points(cls, u, p=2.0):
        u = np.asarray(u, dtype=float)
        if u.ndim != 2:
            raise InvalidInputError("comparator points must be a 2-D array")
        d = np.diff(u, axis=0)
        l1 = float(np.abs(d).sum())
        lp = float(sum(norm(z, p) for z in d))
        return cls(u, l1, lp, p)

    def cost(self, costs):
        """sum_t c_t . u_{t-1}"""
        return float(np.sum(np.asarray(costs) * self.u[: len(costs)]))


def _body_dim(body, n):
    if isinstance(body, Simplex):
        return body.n
    if body.center is not None:
        return len(body.center)
    if n is None:
        raise InvalidInputError("dimension needed for an origin-centred ball")
    return n


def gen_comparator_path(kind, body, L, T, seed=0, n=None, switches=None):
    """kind: 'constant', 'switch' (simplex vertices) or 'geodesic' (balls)."""
    if not L >= 0:
        raise InvalidInputError(f"drift budget must be >= 0, got {L}")
    n = _body_dim(body, n)
    rng = np.random.default_rng(seed)
    is_simplex = isinstance(body, Simplex)
    p = 1.0 if is_simplex else float(body.p)
    if T == 0:
        return ComparatorPath(np.zeros((0, n)), 0.0, 0.0, p)
    if kind == "constant":
        if is_simplex:
            u = np.zeros(n)
            u[rng.integers(n)] = 1.0
        else:
            d = rng.standard_normal(n)
            u = body.k(n) + body.radius * d / norm(d, body.p)
        return ComparatorPath.from_points(np.tile(u, (T, 1)), p)
    if kind == "switch":
        if not is_simplex:
            raise InvalidInputError("switching paths live on the simplex")
        s = int(math.floor(L + 1e-12)) if switches is None else int(switches)
        if s > L + 1e-12:
            raise InvalidInputError(f"{s} switches need half-l1 drift {s} > L={L}")
        if s > T - 1 or (s > 0 and n < 2):
            raise InvalidInputError(f"cannot fit {s} switches into {T} rounds with n={n}")
        cuts = np.linspace(0, T, s + 2)[1:-1].astype(int) if s else []
        idx = np.zeros(T, dtype=int)
        for j, cut in enumerate(cuts, 1):
            idx[cut:] = j % n
        u = np.zeros((T, n))
        u[np.arange(T), idx] = 1.0
        return ComparatorPath.from_points(u, p)
    if kind == "geodesic":
        if is_simplex:
            raise InvalidInputError("geodesic paths live on balls")
        k, D = body.k(n), body.radius
        step = L / (T - 1) if T > 1 else 0.0
        u = np.tile(k, (T, 1))
        if p == 2 and n >= 2:
            if step > 2 * D:
                raise InvalidInputError(f"per-step drift {step} exceeds the diameter {2 * D}")
            dphi = 2 * math.asin(step / (2 * D))
            phi = rng.uniform(0, 2 * math.pi) + dphi * np.arange(T)
            u[:, 0] += D * np.cos(phi)
            u[:, 1] += D * np.sin(phi)
        else:
            # bounce along the first axis; ||s e_1||_p = |s| for every p
            pos = np.zeros(T)
            x, direction = -D, 1.0
            for t in range(T):
                pos[t] = x
                nxt = x + direction * step
                if abs(nxt) > D:
                    if step > 2 * D:
                        raise InvalidInputError(f"per-step drift {step} exceeds the diameter {2 * D}")
                    direction = -direction
                    nxt = x + direction * step
                x = nxt
            u[:, 0] += pos
        return ComparatorPath.from_points(u, p)
    raise InvalidInputError(f"unknown comparator kind {kind!r}")


@dataclass
class OracleResult:
    u: np.ndarray
    value: float
    method: str
    converged: bool = True
    residual: float = 0.0

    def __iter__(self):
        return iter((self.u, self.value))


def _costs(costs, n=None):
    c = np.asarray(costs, dtype=float)
    if c.ndim != 2 or (n is not None and c.shape[1] != n and c.shape[0]):
        raise InvalidInputError(f"costs must be T x {n}, got {c.shape}")
    if not np.all(np.isfinite(c)):
        raise InvalidInputError("costs contain non-finite entries")
    return c


def offline_fixed_opt(costs, body):
    """min over fixed u in the body of sum_t c_t . u."""
    c = _costs(costs)
    n = _body_dim(body, c.shape[1] if c.size else None)
    C = c.sum(axis=0) if c.size else np.zeros(n)
    if isinstance(body, Simplex):
        # correctly rounded column sums, so ties and values match enumeration exactly
        C = np.array([math.fsum(c[:, i]) for i in range(n)]) if c.size else C
        i = int(np.argmin(C))
        u = np.zeros(n)
        u[i] = 1.0
        return OracleResult(u, float(C[i]), "enumerate")
    k, D = body.k(n), body.radius
    q = dual_exponent(body.p)
    cq = norm(C, q)
    if cq == 0:
        return OracleResult(k.copy(), float(C @ k), "closed-form")
    if math.isinf(q):
        w = np.zeros(n)
        j = int(np.argmax(np.abs(C)))
        w[j] = np.sign(C[j])
    elif q == 1:
        w = np.sign(C)
    else:
        w = np.sign(C) * (np.abs(C) / cq) ** (q - 1)
    return OracleResult(k - D * w, float(C @ k - D * cq), "closed-form")


def _solve_lp(cvec, A_ub, b_ub, A_eq, b_eq, bounds):
    res = linprog(cvec, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise NumericError(f"linear program failed: {res.message}", residual=math.inf)
    return res


def _sparse(rows, cols, vals, shape):
    return coo_matrix((vals, (rows, cols)), shape=shape).tocsr()


def _simplex_drift_lp(c, L):
    """LP over u_0..u_{T-1} (row-major, T*n) then z_1..z_{T-1} ((T-1)*n)."""
    T, n = c.shape
    nu, nz = T * n, (T - 1) * n
    obj = np.concatenate([c.ravel(), np.zeros(nz)])
    # z_{i,t} >= u_{i,t} - u_{i,t-1}  ->  u_t - u_{t-1} - z_t <= 0
    r = np.arange(nz)
    rows = np.concatenate([r, r, r])
    cols = np.concatenate([n + r, r, nu + r])
    vals = np.concatenate([np.ones(nz), -np.ones(nz), -np.ones(nz)])
    A = _sparse(rows, cols, vals, (nz, nu + nz))
    budget = _sparse(np.zeros(nz, dtype=int), nu + r, np.ones(nz), (1, nu + nz))
    A_ub = vstack([A, budget]).tocsr()
    b_ub = np.concatenate([np.zeros(nz), [L]])
    A_eq = _sparse(np.repeat(np.arange(T), n), np.arange(nu), np.ones(nu), (T, nu + nz))
    res = _solve_lp(obj, A_ub, b_ub, A_eq, np.ones(T), [(0, None)] * (nu + nz))
    return res.x[:nu].reshape(T, n), float(res.fun)


def _cvx_solve(prob):
    import cvxpy as cp
    try:
        prob.solve(solver=cp.CLARABEL)
    except cp.error.SolverError as e:
        raise NumericError(f"conic solve failed: {e}", residual=math.inf) from None
    if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
        raise NumericError(f"conic solve ended with status {prob.status}", residual=math.inf)
    return prob.status == cp.OPTIMAL


def _pnorm_atom(expr, p):
    import cvxpy as cp
    if math.isinf(p):
        return cp.norm(expr, "inf")
    return cp.norm(expr, p)


def offline_drifting_opt(costs, body, L):
    """min sum_t c_t . u_{t-1} over paths with drift <= L.

    On the simplex the drift is the half-l1 length (sum of coordinate
    increases); on a ball it is sum_t ||u_t - u_{t-1}||_p.
    """
    c = _costs(costs)
    if not L >= 0:
        raise InvalidInputError(f"drift budget must be >= 0, got {L}")
    T = c.shape[0]
    n = _body_dim(body, c.shape[1] if T else None)
    is_simplex = isinstance(body, Simplex)
    p = 1.0 if is_simplex else float(body.p)
    if T <= 1 or L == 0:
        fixed = offline_fixed_opt(c.reshape(T, n), body)
        return OracleResult(ComparatorPath.from_points(np.tile(fixed.u, (T, 1)), p), fixed.value,
                            fixed.method)
    if is_simplex:
        u, val = _simplex_drift_lp(c, float(L))
        return OracleResult(ComparatorPath.from_points(u, p), val, "highs-lp")
    import cvxpy as cp
    U = cp.Variable((T, n))
    k = body.k(n)
    cons = [_pnorm_atom(U[t] - k, body.p) <= body.radius for t in range(T)]
    cons.append(sum(_pnorm_atom(U[t] - U[t - 1], body.p) for t in range(1, T)) <= L)
    prob = cp.Problem(cp.Minimize(cp.sum(cp.multiply(c, U))), cons)
    ok = _cvx_solve(prob)
    return OracleResult(ComparatorPath.from_points(U.value, p), float(prob.value), "clarabel", ok)


def offline_onela_opt(costs, body, alpha=1.0, x0=None, movement_p=None):
    """min sum_{t=1..T} c_t . x_t + alpha * movement, over x_0..x_T in the body.

    Simplex movement is the sum of coordinate increases (alpha-unfair MTS);
    ball movement is ||x_t - x_{t-1}||_m with m = movement_p (default the
    ball's p).  x_0 is free unless pinned.
    """
    c = _costs(costs)
    if np.any(c < 0):
        raise InvalidInputError("1-lookahead costs must be nonnegative")
    if not alpha >= 0:
        raise InvalidInputError(f"alpha must be >= 0, got {alpha}")
    T = c.shape[0]
    n = _body_dim(body, c.shape[1] if T else None)
    c = c.reshape(T, n)
    is_simplex = isinstance(body, Simplex)
    p = 1.0 if is_simplex else float(body.p)
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if not body.contains(x0):
            raise InvalidInputError("pinned x0 is infeasible")
    if is_simplex:
        if movement_p not in (None, 1, 1.0):
            raise InvalidInputError("simplex movement is the half-l1 (coordinate increase) cost")
        nx, nz = (T + 1) * n, T * n
        obj = np.concatenate([np.zeros(n), c.ravel(), alpha * np.ones(nz)])
        r = np.arange(nz)
        A_ub = _sparse(np.concatenate([r, r, r]), np.concatenate([n + r, r, nx + r]),
                       np.concatenate([np.ones(nz), -np.ones(nz), -np.ones(nz)]), (nz, nx + nz))
        A_eq = _sparse(np.repeat(np.arange(T + 1), n), np.arange(nx), np.ones(nx), (T + 1, nx + nz))
        bounds = [(0, None)] * (nx + nz)
        if x0 is not None:
            bounds[:n] = [(float(v), float(v)) for v in x0]
        res = _solve_lp(obj, A_ub, np.zeros(nz), A_eq, np.ones(T + 1), bounds)
        path = ComparatorPath.from_points(res.x[:nx].reshape(T + 1, n), p)
        return OracleResult(path, float(res.fun), "highs-lp")
    import cvxpy as cp
    X = cp.Variable((T + 1, n))
    k = body.k(n)
    cons = [_pnorm_atom(X[t] - k, body.p) <= body.radius for t in range(T + 1)]
    if x0 is not None:
        cons.append(X[0] == x0)
    m = body.p if movement_p is None else movement_p
    obj = alpha * sum(_pnorm_atom(X[t] - X[t - 1], m) for t in range(1, T + 1))
    if T:
        obj = obj + cp.sum(cp.multiply(c, X[1:]))
    prob = cp.Problem(cp.Minimize(obj), cons)
    ok = _cvx_solve(prob)
    return OracleResult(ComparatorPath.from_points(X.value, p), float(prob.value), "clarabel", ok)


def best_switching_path(costs, max_switches):
    """Exact DP: cheapest vertex path u_0..u_{T-1} with at most max_switches changes."""
    c = _costs(costs)
    T, n = c.shape
    if T == 0:
        return OracleResult(ComparatorPath.from_points(np.zeros((0, n)), 1.0), 0.0, "dp")
    S = int(max_switches)
    best = np.full((S + 1, n), np.inf)
    best[0] = c[0]
    back = np.zeros((T, S + 1, n), dtype=int)
    back[0] = -1
    for t in range(1, T):
        new = np.full_like(best, np.inf)
        for s in range(S + 1):
            stay = best[s]
            new[s] = stay + c[t]
            back[t, s] = np.arange(n)
            if s:
                order = np.argsort(best[s - 1], kind="stable")
                j = np.where(np.arange(n) == order[0], order[1] if n > 1 else order[0], order[0])
                move = best[s - 1, j] + c[t]
                better = (move < new[s]) & (j != np.arange(n))
                new[s] = np.where(better, move, new[s])
                back[t, s] = np.where(better, j, back[t, s])
        best = new
    s, i = np.unravel_index(int(np.argmin(best)), best.shape)
    value = float(best[s, i])
    idx = np.zeros(T, dtype=int)
    for t in range(T - 1, -1, -1):
        idx[t] = i
        if t:
            j = back[t, s, i]
            if j != i:
                s -= 1
            i = j
    u = np.zeros((T, n))
    u[np.arange(T), idx] = 1.0
    return OracleResult(ComparatorPath.from_points(u, 1.0), value, "dp")
