"""Replication harness and the statistical tests run against it.

Replication ``r`` of a plan uses the uniform substream ``(base_seed, r)``;
the compiled batch writes each replication into its own slot and all
reductions happen afterwards in index order, so summaries do not depend on
the number of threads.
"""

import csv
import math
import os
import time
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import stats as sps

from . import core
from .core import AmsConfig
from .errors import ConfigError, RunawayError
from .models import COMMITTOR, ExponentialModel, make_model
from .oracle import spectral_T, spectral_v
from .provenance import build_id, config_digest, fmt

UNBIASED_Z = 4.0
CHI2_LEVEL = 1e-3
KS_LEVEL = 1e-3


def configure_threads():
    """Apply ``AMS_THREADS`` (default: all cores) to the numba pool."""
    requested = os.environ.get("AMS_THREADS")
    limit = numba.config.NUMBA_NUM_THREADS
    if requested:
        try:
            count = int(requested)
        except ValueError:
            raise ConfigError(f"AMS_THREADS must be an integer, got {requested!r}") from None
        if count < 1:
            raise ConfigError(f"AMS_THREADS must be >= 1, got {count}")
        numba.set_num_threads(min(count, limit))
    else:
        numba.set_num_threads(limit)
    return numba.get_num_threads()


@dataclass(frozen=True)
class ReplicationPlan:
    config: AmsConfig
    model_key: str = "exponential"
    model_params: tuple = ()
    m_reps: int = 1000
    base_seed: int = 0
    keep_runs: bool = False
    force_identical: bool = False

    def __post_init__(self):
        if self.m_reps < 2:
            raise ConfigError(f"m_reps must be >= 2, got {self.m_reps}")

    @property
    def model(self):
        return make_model(self.model_key, self.model_params)


@dataclass(frozen=True)
class ReplicationSummary:
    """Aggregates over ``m`` runs.

    ``variance_estimate`` is the unbiased sample variance of the estimates
    and ``se_variance`` its normal-approximation standard error.
    """

    n: int
    k: int
    x: float
    a: float
    m: int
    seed: int
    model_key: str
    mean_estimate: float
    variance_estimate: float
    se_mean: float
    se_variance: float
    mean_J: float
    var_J: float
    se_J: float
    mean_samples: float
    j_histogram: np.ndarray = field(repr=False)
    config_digest: str = ""
    wallclock: float = 0.0
    runs_J: np.ndarray | None = field(default=None, repr=False)
    runs_count: np.ndarray | None = field(default=None, repr=False)

    CSV_COLUMNS = (
        "n", "k", "x", "a", "M", "mean", "var", "mean_J", "wallclock", "seed", "config_digest", "build_id",
    )

    def csv_row(self, include_wallclock=True):
        values = [
            self.n, self.k, float(self.x), float(self.a), self.m, self.mean_estimate, self.variance_estimate,
            self.mean_J, float(self.wallclock) if include_wallclock else "", self.seed, self.config_digest,
            build_id(),
        ]
        return [fmt(v) for v in values]


def _sample_stats(values):
    m = values.size
    mean = float(np.mean(values))
    dev = values - mean
    var = float(np.sum(dev * dev) / (m - 1))
    m4 = float(np.mean(dev**4))
    m2 = float(np.mean(dev * dev))
    se_var = math.sqrt(max(m4 - m2 * m2, 0.0) / m)
    return mean, var, math.sqrt(var / m), se_var


def summarize(config, J, count_ge, seed=0, model_key="exponential", digest="", wallclock=0.0, keep_runs=False):
    """Aggregate per-run ``(J, count_ge_a)`` arrays in index order."""
    J = np.asarray(J, dtype=np.int64)
    count_ge = np.asarray(count_ge, dtype=np.int64)
    n, k = config.n, config.k
    est = count_ge / n * np.exp(J * math.log1p(-k / n))
    mean, var, se_mean, se_var = _sample_stats(est)
    mean_J, var_J, se_J, _ = _sample_stats(J.astype(float))
    return ReplicationSummary(
        n=n, k=k, x=config.x, a=config.a, m=int(J.size), seed=int(seed), model_key=model_key,
        mean_estimate=mean, variance_estimate=var, se_mean=se_mean, se_variance=se_var,
        mean_J=mean_J, var_J=var_J, se_J=se_J, mean_samples=n + k * mean_J,
        j_histogram=np.bincount(J), config_digest=digest, wallclock=wallclock,
        runs_J=J if keep_runs else None, runs_count=count_ge if keep_runs else None,
    )


def run_replications(plan: ReplicationPlan) -> ReplicationSummary:
    """Run ``plan.m_reps`` independent AMS runs and aggregate them.

    Raises
    ------
    RunawayError
        If any run exceeded its iteration cap; the message names the runs.
    """
    configure_threads()
    start = time.perf_counter()
    model = plan.model
    if plan.force_identical:
        # every replication on substream 0
        J, C, _, S = core.run_ams_batch(model, plan.config, plan.base_seed, 0, 1)
        J, C, S = (np.repeat(arr, plan.m_reps) for arr in (J, C, S))
    else:
        J, C, _, S = core.run_ams_batch(model, plan.config, plan.base_seed, 0, plan.m_reps)
    runaway = np.flatnonzero(S != 0)
    if runaway.size:
        raise RunawayError(
            f"{runaway.size} of {plan.m_reps} runs hit max_iterations (first rep {int(runaway[0])})"
        )
    digest = config_digest(
        {"config": plan.config, "model": plan.model_key, "params": list(plan.model_params),
         "m_reps": plan.m_reps, "seed": plan.base_seed}
    )
    return summarize(
        plan.config, J, C, plan.base_seed, plan.model_key, digest, time.perf_counter() - start, plan.keep_runs
    )


# tests


@dataclass(frozen=True)
class TestReport:
    """One statistical check; ``passed`` depends only on ``statistic`` vs ``threshold``.

    ``direction`` is ``"le"`` when the statistic must not exceed the
    threshold and ``"ge"`` when it must reach it (p-values).
    """

    __test__ = False

    name: str
    statistic: float
    threshold: float
    direction: str = "le"
    inputs: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        if self.direction == "le":
            return bool(self.statistic <= self.threshold)
        return bool(self.statistic >= self.threshold)

    @property
    def verdict(self):
        return "pass" if self.passed else "fail"

    def line(self):
        op = "<=" if self.direction == "le" else ">="
        return f"{self.verdict.upper()} {self.name}: {self.statistic:.6g} {op} {self.threshold:.6g}"

    CSV_COLUMNS = ("name", "statistic", "threshold", "verdict", "seed", "inputs", "build_id")

    def csv_row(self):
        inputs = ";".join(f"{key}={fmt(val)}" for key, val in sorted(self.inputs.items()))
        return [self.name, fmt(float(self.statistic)), fmt(float(self.threshold)), self.verdict,
                fmt(self.inputs.get("seed", "")), inputs, build_id()]


def test_unbiasedness(summary, truth, name="unbiasedness"):
    """``|mean - truth| / se_mean <= 4``."""
    if not 0.0 < truth <= 1.0:
        raise ConfigError(f"truth must lie in (0, 1], got {truth}")
    if summary.se_mean <= 0:
        raise ConfigError("se_mean is zero; the test needs a non-degenerate sample")
    z = (summary.mean_estimate - truth) / summary.se_mean
    return TestReport(
        name, abs(z), UNBIASED_Z,
        inputs={"seed": summary.seed, "n": summary.n, "k": summary.k, "M": summary.m},
        details={"z": z, "mean": summary.mean_estimate, "truth": truth, "se": summary.se_mean},
    )


def poisson_chi2(counts, mean, min_expected=5.0):
    """Chi-square statistic, degrees of freedom and p-value against Poisson(``mean``).

    Adjacent values are merged into bins of expected count ``>= min_expected``;
    the outer bins absorb both tails.
    """
    counts = np.asarray(counts, dtype=np.int64)
    total = int(counts.sum())
    top = max(counts.size, int(sps.poisson.isf(1e-15, mean)) + 1)
    observed = np.zeros(top, dtype=np.int64)
    observed[: counts.size] = counts
    pmf = sps.poisson.pmf(np.arange(top), mean)
    # upper tail beyond the last index lives in the final bin
    pmf[-1] += sps.poisson.sf(top - 1, mean)
    expected = total * pmf
    bins_o, bins_e = [], []
    acc_o, acc_e = 0, 0.0
    for o, e in zip(observed, expected):
        acc_o += o
        acc_e += e
        if acc_e >= min_expected:
            bins_o.append(acc_o)
            bins_e.append(acc_e)
            acc_o, acc_e = 0, 0.0
    if bins_o:
        bins_o[-1] += acc_o
        bins_e[-1] += acc_e
    o = np.array(bins_o, dtype=float)
    e = np.array(bins_e)
    chi2 = float(np.sum((o - e) ** 2 / e))
    dof = len(bins_o) - 1
    return chi2, dof, float(sps.chi2.sf(chi2, dof))


def test_poisson_iterations(j_histogram, n, P, k=1, seed=None, name="poisson_iterations"):
    """Chi-square goodness of fit of ``J`` against Poisson(``-n log P``); k = 1 only."""
    if k != 1:
        raise ConfigError(f"the Poisson law of J holds for k = 1 only, got k={k}")
    if not 0.0 < P < 1.0:
        raise ConfigError(f"P must lie in (0, 1), got {P}")
    lam = -n * math.log(P)
    chi2, dof, pval = poisson_chi2(j_histogram, lam)
    return TestReport(
        name, pval, CHI2_LEVEL, "ge",
        inputs={"seed": seed if seed is not None else "", "n": n, "k": k, "M": int(np.sum(j_histogram))},
        details={"chi2": chi2, "dof": dof, "poisson_mean": lam},
    )


def test_lambda_equivalence(model, x, a, n, k, n_runs, seed, name="lambda_equivalence"):
    """Run AMS on ``model`` at ``(x, a)`` and on Exp(1) at ``(lam(x), lam(a))``.

    Both runs read the same uniforms; the statistic is the number of runs
    whose ``J``, count above target or kill-order digest differ.
    """
    if model.kernel_code < 0 or model.kernel_code == COMMITTOR:
        raise ConfigError(f"model {model.key!r} is not a continuous inverse-CDF model")
    cfg = AmsConfig(n, k, x, a)
    expo_cfg = AmsConfig(n, k, float(model.lam(x)), float(model.lam(a)))
    J1, C1, D1, S1 = core.run_ams_batch(model, cfg, seed, 0, n_runs)
    J2, C2, D2, S2 = core.run_ams_batch(ExponentialModel(), expo_cfg, seed, 0, n_runs)
    mismatch = (J1 != J2) | (C1 != C2) | (D1 != D2) | (S1 != S2)
    return TestReport(
        name, int(mismatch.sum()), 0,
        inputs={"seed": seed, "n": n, "k": k, "M": n_runs, "model": model.key},
        details={"mismatched_runs": np.flatnonzero(mismatch)[:10].tolist()},
    )


def oracle_moments(n, k, a, x=0.0):
    """Exact ``(Var(p_hat), E[J] + 1)`` in the exponential case."""
    P = math.exp(x - a)
    return spectral_v(n, k, a)(x) - P * P, spectral_T(n, k, a)(x)


def test_moments_vs_oracle(summary, n, k, a, name="moments_vs_oracle"):
    """Empirical variance and ``E[J] + 1`` against the spectral oracle, 4 SE each."""
    var_oracle, T_oracle = oracle_moments(n, k, a, summary.x)
    z_var = (summary.variance_estimate - var_oracle) / summary.se_variance
    z_T = (summary.mean_J + 1.0 - T_oracle) / summary.se_J
    return TestReport(
        name, max(abs(z_var), abs(z_T)), UNBIASED_Z,
        inputs={"seed": summary.seed, "n": n, "k": k, "M": summary.m},
        details={"z_var": z_var, "z_T": z_T, "var_oracle": var_oracle, "T_oracle": T_oracle,
                 "var_empirical": summary.variance_estimate, "T_empirical": summary.mean_J + 1.0},
    )


def ks_report(name, sample, cdf="expon", inputs=None):
    res = sps.kstest(sample, cdf)
    return TestReport(name, float(res.pvalue), KS_LEVEL, "ge", inputs or {}, {"D": float(res.statistic)})


def ks2_report(name, first, second, inputs=None):
    res = sps.ks_2samp(first, second)
    return TestReport(name, float(res.pvalue), KS_LEVEL, "ge", inputs or {}, {"D": float(res.statistic)})


# CSV output


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def write_reports_csv(reports, path):
    _write_csv(path, TestReport.CSV_COLUMNS, [r.csv_row() for r in reports])


def write_summaries_csv(summaries, path, include_wallclock=True):
    _write_csv(path, ReplicationSummary.CSV_COLUMNS, [s.csv_row(include_wallclock) for s in summaries])


def write_runs_csv(summary, path):
    if summary.runs_J is None:
        raise ConfigError("per-run records were not kept; set keep_runs")
    rows = [[str(i), str(j), str(c)] for i, (j, c) in enumerate(zip(summary.runs_J, summary.runs_count))]
    _write_csv(path, ("rep", "J", "count_ge_a"), rows)


# keep pytest from collecting these when imported into test modules
for _fn in (test_unbiasedness, test_poisson_iterations, test_lambda_equivalence, test_moments_vs_oracle):
    _fn.__test__ = False
