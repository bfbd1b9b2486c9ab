"""Estimate the discrete inequality constants at several resolutions.

    python3 scripts/inequality_campaign.py [--sizes 32,64,128,256]
"""
import argparse

from taxislab.config import resolve_config
from taxislab.harness import run_inequalities


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="32,64,128,256")
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--out", default="out/inequalities")
    args = ap.parse_args()
    for n in map(int, args.sizes.split(",")):
        cfg = resolve_config("coexistence", [f"inequalities.points={n}", f"inequalities.count={args.count}"])
        reports = run_inequalities(cfg, f"{args.out}/N{n}")
        for name, rep in reports.items():
            print(f"N={n:<5} {name:<14} " + " ".join(f"{x:.5g}" for x in rep.max_ratio))


if __name__ == "__main__":
    main()
