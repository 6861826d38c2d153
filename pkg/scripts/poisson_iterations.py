"""Histogram of J for k = 1 against the Poisson law with mean -n log P.

Prints the chi-square verdict to stderr and the observed and expected counts
as CSV to stdout.
"""

import argparse
import csv
import math
import sys

from scipy import stats as sps

from amsplit import stats
from amsplit.core import AmsConfig
from amsplit.provenance import build_id


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n", type=int, default=20)
    parser.add_argument("--a", type=float, default=1.0)
    parser.add_argument("--m-reps", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=303)
    args = parser.parse_args(argv)
    plan = stats.ReplicationPlan(AmsConfig(args.n, 1, 0.0, args.a), m_reps=args.m_reps, base_seed=args.seed)
    summary = stats.run_replications(plan)
    report = stats.test_poisson_iterations(summary.j_histogram, args.n, math.exp(-args.a), 1, args.seed)
    print(report.line(), file=sys.stderr)
    mean = args.n * args.a
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["j", "observed", "expected", "seed", "config_digest", "build_id"])
    for j, count in enumerate(summary.j_histogram):
        expected = args.m_reps * sps.poisson.pmf(j, mean)
        writer.writerow([j, int(count), format(float(expected), ".17g"), args.seed, summary.config_digest, build_id()])
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
