"""Competitive 1-lookahead run on the 2-ball: service and movement against OPT.

usage: python scripts/competitive_demo.py [--T 1000] [--seed 0]
"""
import argparse

from driftbench.harness import RunConfig, run_scenario


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    trace, cert, report = run_scenario(RunConfig(preset="thm3", T=args.T, seed=args.seed))
    opt = report.oracle["value"]
    print(f"T={trace.T} S1={trace.S:.4f} M={trace.M:.4f} OPT={opt:.4f} dual={cert.objective:.4f}")
    print(f"S1 - OPT = {trace.S - opt:.4f} (bound D/eta = 1)")
    print(f"M / OPT  = {trace.M / opt:.4f} (bound eta/eps = 1)")
    for line in report.summary_lines():
        print(line)
    return 0 if report.passed else 2


if __name__ == "__main__":
    raise SystemExit(main())
