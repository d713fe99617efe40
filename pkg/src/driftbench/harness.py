"""End-to-end runs: config -> OMD trace -> certificate -> oracle -> report,
plus JSON/CSV serialization."""
from dataclasses import asdict, dataclass, field, fields, replace
import io
import json
import math
import platform
import time

import numpy as np

from . import certificates as cert_mod
from . import oracles
from .errors import ConfigError, DriftbenchError, InvalidInputError
from .omd import Scenario, Trace, run
from .projections import PBall, Simplex, body_from_dict
from .regularizers import CenteredSquaredL2, PNormSquared, ShiftedNegEntropy, from_dict as reg_from_dict

SCHEMA = "driftbench-trace/1"
SETTINGS = ("oco-pball", "drift-expert", "onela-2ball", "onela-mts")
PROGRAM = {
    "oco-pball": "OCO_PBALL",
    "drift-expert": "DRIFT_EXPERT",
    "onela-2ball": "ONELA_2BALL",
    "onela-mts": "ONELA_MTS",
}
REPLAY_TOL = 1e-9


@dataclass
class RunConfig:
    setting: str = "drift-expert"
    n: int = 5
    T: int = 100
    eta: float = None
    alpha: float = None
    L: float = 0.0
    D: float = 1.0
    epsilon: float = 1.0
    center: tuple = None
    p: float = 2.0
    cost_model: str = "uniform"
    cost_low: float = None
    cost_high: float = 1.0
    cost_period: int = 10
    spike_t: int = 1
    spike_magnitude: float = 1.0
    cost_file: str = None
    seed: int = 0
    tol: float = 1e-9
    feas_tol: float = cert_mod.FEAS_TOL
    comparator: str = None
    preset: str = None

    def resolved(self):
        """Fill setting-dependent defaults and validate; returns a new config."""
        c = replace(self)
        if c.setting not in SETTINGS:
            raise ConfigError("setting", f"must be one of {SETTINGS}, got {c.setting!r}")
        if c.n < 1:
            raise ConfigError("n", "must be >= 1")
        if c.T < 0:
            raise ConfigError("T", "must be >= 0")
        if c.eta is None:
            c.eta = c.D if c.setting == "onela-2ball" else 0.1
        if not c.eta > 0:
            raise ConfigError("eta", f"must be positive, got {c.eta}")
        if not c.D > 0:
            raise ConfigError("D", f"must be positive, got {c.D}")
        if not c.L >= 0:
            raise ConfigError("L", f"must be >= 0, got {c.L}")
        if c.setting == "drift-expert" and c.alpha is None:
            c.alpha = math.log(c.n) / c.eta if c.n > 1 else 1.0
        if c.setting == "onela-mts" and c.alpha is None:
            c.alpha = 1.0
        if c.setting in ("drift-expert", "onela-mts") and not (c.alpha and c.alpha > 0):
            raise ConfigError("alpha", f"must be positive, got {c.alpha}")
        if c.cost_low is None:
            c.cost_low = -1.0 if c.setting == "oco-pball" else 0.0
        if c.setting == "oco-pball" and not 1 < c.p <= 2:
            raise ConfigError("p", f"must lie in (1, 2], got {c.p}")
        if c.setting == "onela-2ball":
            if not c.epsilon > 0:
                raise ConfigError("epsilon", f"must be positive, got {c.epsilon}")
            if c.center is None:
                c.center = (c.D + c.epsilon,) * c.n
            c.center = tuple(float(v) for v in c.center)
            if len(c.center) != c.n:
                raise ConfigError("center", f"has {len(c.center)} entries, n = {c.n}")
            if min(c.center) < c.D + c.epsilon - 1e-12:
                raise ConfigError("center", f"min entry {min(c.center)} < D + epsilon = {c.D + c.epsilon}")
        if c.comparator is None:
            c.comparator = {"oco-pball": "opt", "drift-expert": "best"}.get(c.setting, "none")
        if c.comparator not in ("opt", "best", "constant", "switch", "geodesic", "none"):
            raise ConfigError("comparator", f"unknown kind {c.comparator!r}")
        return c

    def to_dict(self):
        d = asdict(self)
        if d["center"] is not None:
            d["center"] = list(d["center"])
        return d

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        bad = set(d) - names
        if bad:
            raise ConfigError(sorted(bad)[0], "unknown config key")
        d = dict(d)
        if d.get("center") is not None:
            d["center"] = tuple(d["center"])
        return cls(**d)


PRESETS = {
    "thm3": dict(setting="onela-2ball", n=2, center=(2.0, 2.0), D=1.0, epsilon=1.0, eta=1.0, T=500,
                 cost_model="uniform", cost_low=0.0, cost_high=1.0),
    "thm2": dict(setting="drift-expert", n=5, T=2000, eta=0.1, L=3.0, comparator="best"),
}
PRESETS["thm3-demo"] = PRESETS["thm3"]


def apply_preset(config):
    """Preset values fill every field the caller left at its default."""
    if config.preset is None:
        return config
    if config.preset not in PRESETS:
        raise ConfigError("preset", f"unknown preset {config.preset!r}; choose from {sorted(PRESETS)}")
    base = RunConfig()
    d = dict(PRESETS[config.preset])
    for f in fields(RunConfig):
        mine = getattr(config, f.name)
        if mine != getattr(base, f.name):
            d[f.name] = mine
    d["preset"] = config.preset
    cfg = RunConfig(**d)
    if config.preset == "thm2" and config.alpha is None:
        cfg.alpha = math.log(cfg.n) / cfg.eta
    return cfg


def _coerce(f, raw):
    name = f.name
    default = f.default
    if raw.lower() in ("none", "null", ""):
        return None
    try:
        if name == "center":
            return tuple(float(v) for v in raw.replace(",", " ").split())
        if name in ("n", "T", "seed", "cost_period", "spike_t"):
            return int(raw)
        if isinstance(default, float) or name in ("eta", "alpha", "cost_low"):
            return float(raw)
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r}") from None
    return raw


def parse_config_text(text, source="<config>"):
    """Flat ``key = value`` lines; '#' comments."""
    by_name = {f.name: f for f in fields(RunConfig)}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}", "expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in by_name:
            raise ConfigError(f"{source}:{lineno}", f"unknown key {key!r}")
        out[key] = _coerce(by_name[key], raw)
    return out


def build_scenario(cfg):
    """Scenario, body, regularizer and cost matrix for a resolved config."""
    model = oracles.CostModel(
        kind=cfg.cost_model, low=cfg.cost_low, high=cfg.cost_high, period=cfg.cost_period,
        spike_t=cfg.spike_t, magnitude=cfg.spike_magnitude, path=cfg.cost_file,
        nonneg=cfg.setting != "oco-pball" or cfg.cost_low >= 0, seed=cfg.seed,
    )
    costs = oracles.gen_costs(model, cfg.T, cfg.n)
    if cfg.setting == "oco-pball":
        body = PBall(cfg.p, cfg.D)
        R = CenteredSquaredL2() if cfg.p == 2 else PNormSquared(cfg.p)
        return Scenario(body, R, cfg.eta, costs, "0LA", x0=np.zeros(cfg.n))
    if cfg.setting == "onela-2ball":
        body = PBall(2.0, cfg.D, cfg.center)
        return Scenario(body, CenteredSquaredL2(cfg.center), cfg.eta, costs, "1LA", epsilon=cfg.epsilon)
    R = ShiftedNegEntropy.for_dual_bound(cfg.eta, cfg.alpha)
    la = "0LA" if cfg.setting == "drift-expert" else "1LA"
    return Scenario(Simplex(cfg.n), R, cfg.eta, costs, la, alpha=cfg.alpha)


def build_certificate(trace, cfg):
    if cfg.setting == "oco-pball":
        return cert_mod.build_oco_pball(trace)
    if cfg.setting == "drift-expert":
        return cert_mod.build_drift_expert(trace, cfg.eta, cfg.alpha, cfg.L)
    if cfg.setting == "onela-2ball":
        return cert_mod.build_onela_2ball(trace)
    return cert_mod.build_onela_mts(trace, cfg.eta, cfg.alpha)


def oracle_value(costs, cfg):
    if cfg.setting == "oco-pball":
        return oracles.offline_fixed_opt(costs, PBall(cfg.p, cfg.D))
    if cfg.setting == "drift-expert":
        return oracles.offline_drifting_opt(costs, Simplex(cfg.n), cfg.L)
    if cfg.setting == "onela-2ball":
        return oracles.offline_onela_opt(costs, PBall(2.0, cfg.D, cfg.center))
    return oracles.offline_onela_opt(costs, Simplex(cfg.n), alpha=cfg.alpha)


def comparator_path(trace, cfg, opt):
    """Comparator sequence u_0..u_{T-1} for the drift checks, or None."""
    kind = cfg.comparator
    T = trace.T
    if kind == "none" or T == 0:
        return None
    if kind == "opt":
        if cfg.setting != "oco-pball":
            raise ConfigError("comparator", "'opt' is only defined for oco-pball")
        return np.tile(opt.u, (T, 1))
    if kind == "best":
        if cfg.setting != "drift-expert":
            raise ConfigError("comparator", "'best' is only defined for drift-expert")
        return oracles.best_switching_path(trace.costs, math.floor(cfg.L + 1e-12)).u.u
    return oracles.gen_comparator_path(kind, trace.body, cfg.L, T, seed=cfg.seed, n=cfg.n).u


@dataclass
class Report:
    setting: str
    checks: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    skipped: list = field(default_factory=list)
    oracle: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def by_name(self):
        return {c.name: c for c in self.checks}

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def to_dict(self):
        return {
            "setting": self.setting,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "violations": [asdict(v) for v in self.violations],
            "skipped": list(self.skipped),
            "oracle": dict(self.oracle),
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, d):
        checks = [cert_mod.Check(c["name"], c["lhs"], c["rhs"], c["slack"], c["pass"], c["tol"], c["note"])
                  for c in d["checks"]]
        viol = [cert_mod.Violation(**v) for v in d["violations"]]
        return cls(d["setting"], checks, viol, list(d["skipped"]), dict(d["oracle"]), dict(d["metadata"]))

    def summary_lines(self):
        lines = []
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"{mark} {c.name}: lhs={c.lhs:.6g} rhs={c.rhs:.6g} slack={c.slack:.3g}")
        for v in self.violations[:20]:
            i = "" if v.i is None else f" i={v.i}"
            lines.append(f"  violation {v.constraint} t={v.t}{i} by {v.magnitude:.3g}")
        return lines


def _replay_check(trace, cfg):
    """Re-run OMD on the stored costs and compare iterates."""
    sc = build_scenario(cfg)
    if trace.T != cfg.T or trace.n != cfg.n:
        return cert_mod.make_check("trace_replay", math.inf, 0.0, REPLAY_TOL, note="shape mismatch")
    sc = replace(sc, costs=trace.costs)
    fresh = run(sc)
    diff = float(np.max(np.abs(fresh.xs - trace.xs), initial=0.0))
    worst = ""
    if diff > REPLAY_TOL:
        t = int(np.argmax(np.max(np.abs(fresh.xs - trace.xs), axis=1)))
        worst = f"first mismatch at x_{t}"
    return cert_mod.make_check("trace_replay", diff, 0.0, REPLAY_TOL, note=worst)


def verify(trace, cfg, opt=None):
    """Certificate, feasibility, oracle and bound checks for a stored trace."""
    cfg = cfg.resolved()
    t0 = time.perf_counter()
    stage = "certificate"
    try:
        cert = build_certificate(trace, cfg)
        stage = "oracle"
        if opt is None:
            opt = oracle_value(trace.costs, cfg)
        stage = "comparator"
        U = comparator_path(trace, cfg, opt)
        stage = "bounds"
        viol = cert_mod.check_feasibility(cert, trace.costs, cfg.feas_tol)
        rep = cert_mod.theorem_bound_report(trace, cert, opt_value=opt.value, comparator=U,
                                            epsilon=cfg.epsilon if cfg.setting == "onela-2ball" else None,
                                            tol=cfg.tol)
    except InvalidInputError as exc:
        raise InvalidInputError(f"{stage}: {exc}") from exc
    except DriftbenchError as exc:
        raise DriftbenchError(f"{stage}: {exc}") from exc
    checks = [_replay_check(trace, cfg),
              cert_mod.make_check("dual_feasibility", float(len(viol)), 0.0, 0.0,
                                  note=f"{len(viol)} violations")]
    checks += rep.checks
    report = Report(
        setting=cfg.setting, checks=checks, violations=viol, skipped=rep.skipped,
        oracle={"value": opt.value, "method": opt.method, "converged": opt.converged,
                "dual_objective": cert.objective, "gap": cert_mod.weak_duality_gap(cert, opt.value)},
        metadata={"seed": cfg.seed, "python": platform.python_version(), "numpy": np.__version__,
                  "verify_seconds": time.perf_counter() - t0},
    )
    return cert, report


def run_scenario(config):
    cfg = apply_preset(config).resolved()
    t0 = time.perf_counter()
    trace = run(build_scenario(cfg))
    elapsed = time.perf_counter() - t0
    cert, report = verify(trace, cfg)
    report.metadata["run_seconds"] = elapsed
    return trace, cert, report


# ---- serialization ----

def _arr(a):
    return None if a is None else np.asarray(a).tolist()


def trace_to_dict(tr):
    its = []
    for r in tr.records():
        its.append({
            "t": r["t"], "c": _arr(r["c"]), "x": _arr(r["x"]), "y_grad": _arr(r["y_grad"]),
            "lam": r["lam"], "kappa": _arr(r["kappa"]), "service": r["service"], "movement": r["movement"],
        })
    return {
        "lookahead": tr.lookahead, "eta": tr.eta, "n": tr.n, "body": tr.body.to_dict(),
        "regularizer": tr.regularizer.to_dict(), "movement_p": tr.movement_p,
        "x0": _arr(tr.xs[0]), "iterations": its,
    }


def trace_from_dict(d):
    n = d["n"]
    its = d["iterations"]
    T = len(its)

    def col(key, width=None):
        if width is None:
            return np.array([it[key] for it in its], dtype=float).reshape(T)
        return np.array([it[key] for it in its], dtype=float).reshape(T, width)

    body = body_from_dict(d["body"])
    kappa = col("kappa", n) if its and its[0]["kappa"] is not None else (
        np.zeros((0, n)) if isinstance(body, Simplex) else None)
    xs = np.vstack([np.asarray(d["x0"], dtype=float).reshape(1, n), col("x", n)])
    return Trace(
        lookahead=d["lookahead"], eta=d["eta"], body=body, regularizer=reg_from_dict(d["regularizer"]),
        movement_p=d["movement_p"], costs=col("c", n), xs=xs, grads=col("y_grad", n), lam=col("lam"),
        kappa=kappa, service=col("service"), movement=col("movement"),
    )


def traces_equal(a, b):
    def same(u, v):
        if u is None or v is None:
            return u is None and v is None
        return u.shape == v.shape and np.array_equal(u, v)
    return (a.lookahead == b.lookahead and a.eta == b.eta and a.body == b.body
            and a.regularizer == b.regularizer and a.movement_p == b.movement_p
            and all(same(getattr(a, k), getattr(b, k))
                    for k in ("costs", "xs", "grads", "lam", "kappa", "service", "movement")))


def _wrap(kind, payload):
    return {"schema": SCHEMA, "kind": kind, **payload}


def to_json_dict(obj):
    if isinstance(obj, Trace):
        return _wrap("trace", trace_to_dict(obj))
    if isinstance(obj, cert_mod.DualCertificate):
        return _wrap("certificate", obj.to_dict())
    if isinstance(obj, Report):
        return _wrap("report", obj.to_dict())
    if isinstance(obj, RunBundle):
        return _wrap("run", {
            "config": obj.config.to_dict(), "trace": trace_to_dict(obj.trace),
            "certificate": obj.certificate.to_dict(), "report": obj.report.to_dict(),
        })
    raise InvalidInputError(f"cannot serialize {type(obj).__name__}")


@dataclass
class RunBundle:
    config: RunConfig
    trace: Trace
    certificate: object
    report: Report


def emit(obj, fmt="json"):
    """Serialize to bytes; 'csv' is defined for traces only."""
    if fmt == "json":
        return (json.dumps(to_json_dict(obj), indent=1, allow_nan=False) + "\n").encode()
    if fmt == "csv":
        if not isinstance(obj, Trace):
            raise InvalidInputError("csv output is only defined for traces")
        return trace_csv(obj).encode()
    raise InvalidInputError(f"unknown format {fmt!r}")


def trace_csv(tr):
    n = tr.n
    buf = io.StringIO()
    head = ["t"] + [f"c_{i}" for i in range(1, n + 1)] + [f"x_{i}" for i in range(1, n + 1)]
    buf.write(",".join(head + ["lambda", "service", "movement"]) + "\n")
    for r in tr.records():
        vals = [str(r["t"])] + [repr(float(v)) for v in r["c"]] + [repr(float(v)) for v in r["x"]]
        vals += [repr(r["lam"]), repr(r["service"]), repr(r["movement"])]
        buf.write(",".join(vals) + "\n")
    return buf.getvalue()


def parse(data):
    """Inverse of emit(obj, 'json')."""
    d = json.loads(data)
    if d.get("schema") != SCHEMA:
        raise InvalidInputError(f"unsupported schema {d.get('schema')!r}; expected {SCHEMA}")
    kind = d.get("kind")
    if kind == "trace":
        return trace_from_dict(d)
    if kind == "certificate":
        return cert_mod.DualCertificate.from_dict(d)
    if kind == "report":
        return Report.from_dict(d)
    if kind == "run":
        return RunBundle(RunConfig.from_dict(d["config"]), trace_from_dict(d["trace"]),
                         cert_mod.DualCertificate.from_dict(d["certificate"]), Report.from_dict(d["report"]))
    raise InvalidInputError(f"unknown kind {kind!r}")
