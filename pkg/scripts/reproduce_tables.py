#!/usr/bin/env python3
"""Regenerate the calibrated-threshold tables for both benchmark designs.

Writes table{1,2}_{r05,r10}.csv into --out.  Full scale (50,000 replications
per calibration, four calibrations) takes around a minute on one core; pass
--n-reps 10000 for a quick look.
"""

import argparse
import sys

from propcal.cli import main as propcal_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="propcal-out")
    parser.add_argument("--n-reps", type=int, default=50_000)
    parser.add_argument("--seed", type=int, default=20240101)
    args = parser.parse_args()
    for table in ("table1", "table2"):
        code = propcal_main(
            [
                "reproduce",
                table,
                "--out",
                args.out,
                "--n-reps",
                str(args.n_reps),
                "--seed",
                str(args.seed),
            ]
        )
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
