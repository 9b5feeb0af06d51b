#!/usr/bin/env python3
"""Regenerate the benchmark figure data: per-model risk ratios and selected-
index distributions for both designs at the three noise scales.

Writes models.csv, khat_samples.csv, thresholds.csv and the SVG panels into
--out/<figure>.  Full scale takes a few minutes; shrink --num-runs and
--n-reps for a quick look.
"""

import argparse
import os
import sys

from propcal.cli import main as propcal_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="propcal-out")
    parser.add_argument("--n-reps", type=int, default=50_000)
    parser.add_argument("--num-runs", type=int, default=500)
    parser.add_argument("--num-models", type=int, default=10)
    parser.add_argument("--seed", type=int, default=20240101)
    args = parser.parse_args()
    for figure in ("figure1", "figure2"):
        code = propcal_main(
            [
                "reproduce",
                figure,
                "--out",
                os.path.join(args.out, figure),
                "--n-reps",
                str(args.n_reps),
                "--num-runs",
                str(args.num_runs),
                "--num-models",
                str(args.num_models),
                "--seed",
                str(args.seed),
            ]
        )
        if code:
            return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
