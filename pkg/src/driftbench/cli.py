"""driftbench command line: run, check-duals, opt, sweep.

Exit codes: 0 all checks pass, 2 a check failed, 1 usage or runtime error.
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
import io
import math
import sys

import numpy as np

from . import harness
from .errors import DriftbenchError

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2

FLAG_FIELDS = {
    "setting": "setting", "n": "n", "T": "T", "eta": "eta", "alpha": "alpha", "drift": "L",
    "radius": "D", "center": "center", "epsilon": "epsilon", "p": "p", "cost_model": "cost_model",
    "cost_low": "cost_low", "cost_high": "cost_high", "cost_period": "cost_period",
    "cost_file": "cost_file", "seed": "seed", "tol": "tol", "comparator": "comparator",
    "preset": "preset",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _center(s):
    try:
        return tuple(float(v) for v in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma list of numbers, got {s!r}") from None


def _add_config_flags(p):
    p.add_argument("--config", help="flat 'key = value' config file; flags override it")
    p.add_argument("--preset", choices=sorted(harness.PRESETS))
    p.add_argument("--setting", choices=harness.SETTINGS)
    p.add_argument("--n", type=int)
    p.add_argument("--T", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--drift", type=float, help="drift budget L")
    p.add_argument("--radius", type=float, help="ball radius D")
    p.add_argument("--center", type=_center, help="ball centre k as a comma list")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--p", type=float, help="p-norm exponent for oco-pball")
    p.add_argument("--cost-model", choices=harness.oracles.COST_KINDS)
    p.add_argument("--cost-low", type=float)
    p.add_argument("--cost-high", type=float)
    p.add_argument("--cost-period", type=int)
    p.add_argument("--cost-file")
    p.add_argument("--comparator")
    p.add_argument("--seed", type=int)
    p.add_argument("--tol", type=float)


def build_parser():
    ap = _Parser(prog="driftbench", description="OMD runs with dual certificates and offline oracles")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    r = sub.add_parser("run", help="simulate, certify and check one scenario")
    _add_config_flags(r)
    r.add_argument("--out", help="write the run bundle (json) or trace (csv) here")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    c = sub.add_parser("check-duals", help="re-verify a stored run bundle")
    c.add_argument("--trace", required=True)
    c.add_argument("--tol", type=float)
    c.add_argument("--out")
    o = sub.add_parser("opt", help="offline optimum only")
    _add_config_flags(o)
    o.add_argument("--out")
    s = sub.add_parser("sweep", help="grid over eta or L, CSV summary")
    _add_config_flags(s)
    s.add_argument("--param", choices=("eta", "L"), default="eta")
    s.add_argument("--values", required=True, help="comma list of values")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--out")
    return ap


def config_from_args(args):
    d = {}
    if getattr(args, "config", None):
        with open(args.config) as f:
            d.update(harness.parse_config_text(f.read(), args.config))
    for flag, name in FLAG_FIELDS.items():
        v = getattr(args, flag, None)
        if v is not None:
            d[name] = v
    cfg = harness.RunConfig.from_dict(d)
    return harness.apply_preset(cfg).resolved()


def _write(path, data, stdout):
    if path is None or path == "-":
        stdout.write(data.decode() if isinstance(data, bytes) else data)
    else:
        with open(path, "wb") as f:
            f.write(data if isinstance(data, bytes) else data.encode())


def cmd_run(args, out, err):
    cfg = config_from_args(args)
    trace, cert, report = harness.run_scenario(cfg)
    if args.out:
        if args.format == "csv":
            _write(args.out, harness.emit(trace, "csv"), out)
        else:
            _write(args.out, harness.emit(harness.RunBundle(cfg, trace, cert, report)), out)
    for line in report.summary_lines():
        print(line, file=out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_check(args, out, err):
    with open(args.trace, "rb") as f:
        obj = harness.parse(f.read())
    if not isinstance(obj, harness.RunBundle):
        raise harness.InvalidInputError(f"{args.trace}: expected a run bundle written by 'run --out'")
    cfg = obj.config
    if args.tol is not None:
        cfg = replace(cfg, tol=args.tol)
    _, report = harness.verify(obj.trace, cfg)
    if args.out:
        _write(args.out, harness.emit(report), out)
    for line in report.summary_lines():
        print(line, file=out)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_opt(args, out, err):
    cfg = config_from_args(args)
    costs = harness.build_scenario(cfg).costs
    res = harness.oracle_value(costs, cfg)
    print(f"OPT = {res.value!r} ({res.method}{'' if res.converged else ', inaccurate'})", file=out)
    if args.out:
        u = res.u.u if hasattr(res.u, "u") else np.atleast_2d(res.u)
        buf = io.StringIO()
        np.savetxt(buf, u, delimiter=",", fmt="%r")
        _write(args.out, buf.getvalue(), out)
    return EXIT_OK


def _sweep_one(cfg):
    trace, cert, report = harness.run_scenario(cfg)
    opt = report.oracle["value"]
    return {
        "S": trace.S, "M": trace.M, "opt": opt, "dual": cert.objective,
        "m_ratio": trace.M / opt if opt > 0 else math.nan,
        "s_gap": trace.S - opt, "pass": report.passed,
    }


def sweep_rows(base, param, values, jobs=1):
    cfgs = [replace(base, **{param: v}).resolved() for v in values]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            rows = list(ex.map(_sweep_one, cfgs))
    else:
        rows = [_sweep_one(c) for c in cfgs]
    for v, r in zip(values, rows):
        r[param] = v
    return rows


def monotonicity_checks(rows, param, tol=1e-9):
    """Directional sanity for eta sweeps: M/OPT nondecreasing, S - OPT nonincreasing."""
    if param != "eta" or len(rows) < 2:
        return []
    rows = sorted(rows, key=lambda r: r[param])
    m = [r["m_ratio"] for r in rows]
    s = [r["s_gap"] for r in rows]
    up = all(b >= a - tol * max(1, abs(a)) for a, b in zip(m, m[1:]))
    down = all(b <= a + tol * max(1, abs(a)) for a, b in zip(s, s[1:]))
    return [("movement_ratio_nondecreasing", up), ("service_gap_nonincreasing", down)]


def cmd_sweep(args, out, err):
    base = config_from_args(args)
    values = [float(v) for v in args.values.split(",") if v.strip()]
    param = args.param
    rows = sweep_rows(base, param, values, args.jobs)
    cols = [param, "S", "M", "opt", "dual", "m_ratio", "s_gap", "pass"]
    lines = [",".join(cols)] + [",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in cols)
                                for r in rows]
    _write(args.out, "\n".join(lines) + "\n", out)
    ok = all(r["pass"] for r in rows)
    if base.setting == "onela-2ball":
        for name, good in monotonicity_checks(rows, param):
            print(f"{'PASS' if good else 'FAIL'} {name}", file=err)
            ok = ok and good
    return EXIT_OK if ok else EXIT_FAIL


COMMANDS = {"run": cmd_run, "check-duals": cmd_check, "opt": cmd_opt, "sweep": cmd_sweep}


def main(argv=None, out=None, err=None):
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, out, err)
    except UsageError as e:
        print(e, file=err)
        return EXIT_ERROR
    except (DriftbenchError, OSError, ValueError) as e:
        print(f"driftbench: error: {e}", file=err)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
