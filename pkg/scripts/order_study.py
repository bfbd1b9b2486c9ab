"""Temporal and spatial convergence tables for both time steppers."""
import argparse

import numpy as np

from taxislab.acceptance import spatial_errors, temporal_errors


def table(label, steps, errors):
    print(label)
    for i, (h, e) in enumerate(zip(steps, errors)):
        rate = "" if i == 0 else f"{np.log(errors[i - 1] / e) / np.log(steps[i - 1] / h):.3f}"
        print(f"  {h:<12.4g} {e:<14.4e} {rate}")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()
    for scheme in ("imex_euler", "strang_imex"):
        dts, errs = temporal_errors(scheme, levels=args.levels)
        table(f"time step refinement, {scheme}", dts, errs)
    hs, errs = spatial_errors()
    table("grid refinement, strang_imex with dt = h/32", hs, errs)


if __name__ == "__main__":
    main()
