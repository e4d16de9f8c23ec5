#!/usr/bin/env python3
"""Fit the clotting benchmark with every estimation method.

Prints one row per method with the coefficient estimates, standard errors
and the dispersion estimate, matching the package's reference numbers.
"""

import argparse

import numpy as np

from glmbr.datasets import clotting_spec
from glmbr.engine import FitControl, fit

LABELS = ["intercept", "lot2", "log_conc", "lot2:log_conc"]
METHODS = ["ml", "corrected_ml", "mean_br", "median_br", "mixed_br"]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--tolerance", type=float, default=1e-12)
    args = parser.parse_args()

    spec = clotting_spec()
    print(f"{'method':14s} " + " ".join(f"{lab:>15s}" for lab in LABELS)
          + f" {'phi':>10s}")
    for method in METHODS:
        res = fit(spec, method, FitControl(tolerance=args.tolerance))
        est = " ".join(f"{b:15.4f}" for b in res.beta)
        print(f"{method:14s} {est} {res.phi:10.4f}")
        ses = " ".join(f"({s:13.4f})" for s in res.se_beta)
        se_phi = "" if res.se_phi is None else f"({res.se_phi:8.4f})"
        print(f"{'':14s} {ses} {se_phi:>10s}")


if __name__ == "__main__":
    main()
