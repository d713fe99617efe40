"""Sweep eta on the 2-ball competitive setting and print the trade-off:
M/OPT grows with eta while S1 - OPT shrinks."""
import argparse

from driftbench.cli import monotonicity_checks, sweep_rows
from driftbench.harness import RunConfig, apply_preset


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=300)
    ap.add_argument("--values", default="1,1.5,2,3,5,8")
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    base = apply_preset(RunConfig(preset="thm3", T=args.T))
    etas = [float(v) for v in args.values.split(",")]
    rows = sweep_rows(base, "eta", etas, args.jobs)
    print("eta,S1,M,OPT,M/OPT,S1-OPT,pass")
    for r in rows:
        print(f"{r['eta']},{r['S']:.4f},{r['M']:.4f},{r['opt']:.4f},{r['m_ratio']:.4f},{r['s_gap']:.4f},{r['pass']}")
    checks = monotonicity_checks(rows, "eta")
    for name, good in checks:
        print(f"{'PASS' if good else 'FAIL'} {name}")
    return 0 if all(g for _, g in checks) and all(r["pass"] for r in rows) else 2


if __name__ == "__main__":
    raise SystemExit(main())
