"""Sweep lambda2 across the degenerate line and tabulate regime, winning decay law and rate.

    python3 scripts/regime_sweep.py [--points 9] [--workers 4]
"""
import argparse

import numpy as np

from taxislab.config import resolve_config
from taxislab.harness import run_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--t-end", type=float, default=200.0,
                    help="long horizons are needed before algebraic decay separates from exponential")
    ap.add_argument("--out", default="out/regime_sweep")
    args = ap.parse_args()
    cfg = resolve_config("campaign", [f"stepping.t_end={args.t_end}", "stepping.sample_interval=0.5"])
    p = cfg.parameters
    critical = p.lambda1 * p.a2 / p.mu1
    values = np.linspace(0.6 * critical, 1.4 * critical, args.points)
    rows = run_sweep(cfg, "lambda2", values, args.out, args.workers)
    print(f"critical lambda2 = {critical:g}")
    print(f"{'lambda2':>10} {'regime':<24} {'winner':<12} {'K2':>10}  status")
    for r in rows:
        print(f"{r['value']:>10.4g} {r['regime']:<24} {r['winner']:<12} {r['K2']:>10.4g}  {r['exit_status']}")


if __name__ == "__main__":
    main()
