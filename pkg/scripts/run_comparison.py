#!/usr/bin/env python3
"""Paired balanced/skewed robustness comparison on a synthetic dataset.

Thin wrapper over `hetdp compare-heterogeneity` with the canonical profile
pairs at 2, 5 and 10 label buckets. Prints the percentage-change tables and
writes the comparison CSV plus the resolved plan log.
"""

import argparse
import sys

from hetdp.cli import main as cli_main


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=40000, help="synthetic dataset size")
    parser.add_argument("--d", type=int, default=8, help="vector dimension")
    parser.add_argument("--heterogeneity", type=float, default=0.7, help="generator knob in [0,1]")
    parser.add_argument("--fraction", type=float, default=0.1, help="sample fraction per profile")
    parser.add_argument("--epsilons", default="0.25,1.0,5.0")
    parser.add_argument("--delta", type=float, default=0.1)
    parser.add_argument("--trials", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="comparison.csv")
    args = parser.parse_args()

    return cli_main(
        [
            "compare-heterogeneity",
            "--synthetic", f"{args.n},{args.d},{args.heterogeneity}",
            "--profiles", "uniform-2,skewed-2,uniform-5,skewed-5,uniform-10,skewed-10",
            "--fraction", str(args.fraction),
            "--epsilons", args.epsilons,
            "--delta", str(args.delta),
            "--trials", str(args.trials),
            "--seed", str(args.seed),
            "--out", args.out,
        ]
    )


if __name__ == "__main__":
    sys.exit(main())
