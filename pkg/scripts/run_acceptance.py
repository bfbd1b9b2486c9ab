"""Run the acceptance suite and write out/acceptance/acceptance.csv.

    python3 scripts/run_acceptance.py [--workers 4] [--only 1,2,8]
"""
import argparse
import sys
from pathlib import Path

from taxislab.acceptance import run_all, write_report


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--only", type=lambda s: [int(x) for x in s.split(",")])
    ap.add_argument("--out", default="out/acceptance")
    args = ap.parse_args()
    results = run_all(args.workers, args.only)
    for r in results:
        print(r.line())
    print("wrote", write_report(results, Path(args.out)))
    return 0 if all(r.passed for r in results) else 3


if __name__ == "__main__":
    sys.exit(main())
