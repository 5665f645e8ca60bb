"""Deterministic parallel Monte-Carlo harness for the figure experiments.

Each experiment is a grid of cells (rate index, severity index, sample
size).  Within a cell, every replicate draws its own random stream from the
label path ``(figure, ell, r, block, replicate)``, so results are
bit-identical for any worker count and chunking.  All tests within a
replicate are evaluated on the same draw, which is how the experiments
compare tests and also reduces the variance of power differences.

CSV schema (one row per cell and test):
``figure,ell,r,test,n,M,alpha,reject_freq,stderr,asym_power,seed``.
The estimator study reuses the same schema with ``test`` naming a diagnostic
metric whose value is stored in the ``reject_freq`` column.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats as scipy_stats

from . import limits, model, sampling, specfn, stats
from .errors import ConfigError, DomainError
from .model import Regime

FIGURE_LABELS = {"fig1": 1, "fig2": 2, "fig3": 3, "thm21": 4}
_SHARED_BLOCK = 0      # block label for the draws shared by all tests
_AUX_BLOCK = 9         # block label for auxiliary draws (limit-law oracles)
_CHUNK = 500           # replicates per work unit, independent of worker count

THETA0 = np.array([0.0, 0.0, 1.0])

CSV_HEADER = "figure,ell,r,test,n,M,alpha,reject_freq,stderr,asym_power,seed"


@dataclass(frozen=True)
class ExperimentSpec:
    """Parameters of one figure-style experiment."""

    figure: str
    p: int = 3
    n: tuple = (200,)
    M: int = 10000
    alpha: float = 0.05
    seed: int = sampling.DEFAULT_MASTER_SEED
    xi: float = 1.0
    ell_values: tuple = ()
    r_values: tuple = (0,)
    radial: str = "fvml"
    workers: int = 1

    def __post_init__(self):
        if self.figure not in FIGURE_LABELS:
            raise ConfigError(f"unknown figure {self.figure!r}", key="figure")
        if self.M < 100:
            raise ConfigError("M must be at least 100", key="M")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie strictly inside (0, 1)", key="alpha")
        if self.p != 3 and self.figure != "thm21":
            raise ConfigError("figure experiments are defined for p = 3", key="p")


@dataclass(frozen=True)
class ResultRow:
    figure: str
    ell: int
    r: int
    test: str
    n: int
    M: int
    alpha: float
    reject_freq: float
    stderr: float
    asym_power: Optional[float]
    seed: int


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        def fmt(x):
            if x is None:
                return ""
            if isinstance(x, float):
                return f"{x:.6g}"
            return str(x)

        lines = [CSV_HEADER]
        for row in self.rows:
            lines.append(",".join(fmt(v) for v in (
                row.figure, row.ell, row.r, row.test, row.n, row.M, row.alpha,
                row.reject_freq, row.stderr, row.asym_power, row.seed)))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())


def binomial_stderr(freq: float, m: int) -> float:
    return math.sqrt(freq * (1.0 - freq) / m)


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def figure1_spec(seed=sampling.DEFAULT_MASTER_SEED, M=10000, workers=1) -> ExperimentSpec:
    return ExperimentSpec(figure="fig1", n=(100, 1000), M=M, seed=seed,
                          ell_values=tuple(range(6)), r_values=(0,),
                          workers=workers)


def figure2_spec(seed=sampling.DEFAULT_MASTER_SEED, M=10000, workers=1) -> ExperimentSpec:
    return ExperimentSpec(figure="fig2", n=(200,), M=M, seed=seed,
                          ell_values=tuple(range(4)), r_values=tuple(range(7)),
                          workers=workers)


def figure3_spec(seed=sampling.DEFAULT_MASTER_SEED, M=10000, workers=1) -> ExperimentSpec:
    return ExperimentSpec(figure="fig3", n=(200,), M=M, seed=seed,
                          ell_values=(2,), r_values=tuple(range(7)),
                          workers=workers)


def thm21_spec(seed=sampling.DEFAULT_MASTER_SEED, workers=1) -> ExperimentSpec:
    # M is per-regime below; the spec-level M is the largest study size.
    return ExperimentSpec(figure="thm21", n=(10000,), M=10000, seed=seed,
                          ell_values=(1, 2, 3, 4), r_values=(0,),
                          workers=workers)


def preset_spec(figure: str, **kwargs) -> ExperimentSpec:
    factories = {"fig1": figure1_spec, "fig2": figure2_spec,
                 "fig3": figure3_spec, "thm21": thm21_spec}
    if figure not in factories:
        raise ConfigError(f"unknown figure {figure!r}", key="figure")
    return factories[figure](**kwargs)


# ---------------------------------------------------------------------------
# Replicate kernels (module-level so they pickle for the process pool)
# ---------------------------------------------------------------------------

def _rejection_chunk(args):
    """Run replicates [start, start+count) of one cell; return reject counts."""
    (figure_label, ell, r, theta_alt, kappa, n, seed, start, count,
     tests) = args
    counts = np.zeros(len(tests), dtype=np.int64)
    kinds = {kind for _, kind, _, _ in tests}
    for rep in range(start, start + count):
        # n is part of the label path so cells sharing a rate index but not a
        # sample size never reuse a stream.
        stream = sampling.derive_stream(
            seed, [figure_label, ell, r, n, _SHARED_BLOCK, rep])
        draws = sampling.sample_fvml(theta_alt, kappa, n, stream)
        sample = stats.Sample(draws)
        values = {}
        if "watson" in kinds:
            values["watson"] = stats.watson_statistic(sample, THETA0)
        if "wald" in kinds:
            values["wald"] = stats.wald_statistic(sample, THETA0)
        if "oracle" in kinds:
            xi = next(x for _, kind, _, x in tests if kind == "oracle")
            values["oracle"] = stats.oracle_statistic(sample, THETA0, xi)
        for idx, (_, kind, crit, _) in enumerate(tests):
            if values[kind] > crit:
                counts[idx] += 1
    return counts


def _estimator_chunk(args):
    """Replicates of the estimator study; returns (cosines, error outer-product sum)."""
    (figure_label, regime_index, theta, kappa, n, scale, seed, start, count) = args
    cosines = np.empty(count)
    outer_sum = np.zeros((theta.size, theta.size))
    for offset, rep in enumerate(range(start, start + count)):
        stream = sampling.derive_stream(
            seed, [figure_label, regime_index, 0, n, _SHARED_BLOCK, rep])
        draws = sampling.sample_fvml(theta, kappa, n, stream)
        mean = draws.mean(axis=0)
        theta_hat = mean / np.linalg.norm(mean)
        cosines[offset] = float(theta_hat @ theta)
        err = scale * (theta_hat - theta)
        outer_sum += np.outer(err, err)
    return cosines, outer_sum


def _run_chunks(worker, tasks, workers: int):
    """Map a kernel over tasks, preserving task order in the results."""
    if workers <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(worker, tasks, chunksize=1))


def _chunk_ranges(total: int):
    starts = range(0, total, _CHUNK)
    return [(s, min(_CHUNK, total - s)) for s in starts]


# ---------------------------------------------------------------------------
# Figure runners
# ---------------------------------------------------------------------------

def _calibrated_kappa(spec: ExperimentSpec, e1_target: float) -> float:
    return model.calibrate_kappa(spec.p, model.radial_function(spec.radial), e1_target)


def _run_rejection_experiment(spec: ExperimentSpec, cells) -> ExperimentResult:
    """Shared driver: cells = list of dicts with the per-cell configuration."""
    figure_label = FIGURE_LABELS[spec.figure]
    tasks = []
    task_cells = []
    for cell_index, cell in enumerate(cells):
        for start, count in _chunk_ranges(spec.M):
            tasks.append((figure_label, cell["ell"], cell["r"], cell["theta_alt"],
                          cell["kappa"], cell["n"], spec.seed, start, count,
                          cell["tests"]))
            task_cells.append(cell_index)
    outputs = _run_chunks(_rejection_chunk, tasks, spec.workers)
    totals = [np.zeros(len(cell["tests"]), dtype=np.int64) for cell in cells]
    for cell_index, counts in zip(task_cells, outputs):
        totals[cell_index] += counts
    result = ExperimentResult(spec=spec)
    for cell, counts in zip(cells, totals):
        for (name, _, _, _), count in zip(cell["tests"], counts):
            freq = count / spec.M
            result.rows.append(ResultRow(
                figure=spec.figure, ell=cell["ell"], r=cell["r"], test=name,
                n=cell["n"], M=spec.M, alpha=spec.alpha, reject_freq=freq,
                stderr=binomial_stderr(freq, spec.M),
                asym_power=cell["asym_power"].get(name), seed=spec.seed))
    return result


def run_figure1(spec: ExperimentSpec) -> ExperimentResult:
    """Null rejection frequencies of the score and spherical-mean tests.

    For each rate index ell the concentration is calibrated so that the mean
    cosine equals n^(-ell/6)/sqrt(p); both tests use the chi-square critical
    value with p-1 degrees of freedom.
    """
    crit = specfn.chi2_quantile(1.0 - spec.alpha, spec.p - 1)
    tests = (("watson", "watson", crit, None), ("wald", "wald", crit, None))
    cells = []
    for ell in spec.ell_values:
        for n in spec.n:
            e1 = n ** (-ell / 6.0) / math.sqrt(spec.p)
            cells.append(dict(ell=ell, r=0, n=n, theta_alt=THETA0,
                              kappa=_calibrated_kappa(spec, e1), tests=tests,
                              asym_power={}))
    return _run_rejection_experiment(spec, cells)


def _fig2_regime(ell: int) -> Regime:
    return {0: Regime.AWAY_FROM_UNIFORMITY, 1: Regime.BEYOND_CONTIGUITY,
            2: Regime.UNDER_CONTIGUITY, 3: Regime.STRICT_CONTIGUITY}[ell]


def _realized_tau_norm(ell: int, theta_alt, n: int) -> float:
    # tau_n = (theta_r - theta0) / nu_n with nu_n = n^(ell/4 - 1/2) for the
    # normalized perturbations and nu_n = 1 for the theta-fixed alternatives.
    nu = n ** (ell / 4.0 - 0.5) if ell <= 1 else 1.0
    return float(np.linalg.norm(theta_alt - THETA0)) / nu


def run_figure2(spec: ExperimentSpec) -> ExperimentResult:
    """Power study across all four regimes at the alternatives theta_r.

    Tests: score, spherical-mean against the chi-square critical value, and
    the spherical-mean statistic against Monte-Carlo critical values from its
    contiguous (lam = xi) and strictly contiguous (lam = 0) null laws.
    Score rows carry the regime's analytic asymptotic power.
    """
    crit = specfn.chi2_quantile(1.0 - spec.alpha, spec.p - 1)
    rng_c = sampling.derive_stream(spec.seed, [FIGURE_LABELS["fig2"], 900])
    rng_s = sampling.derive_stream(spec.seed, [FIGURE_LABELS["fig2"], 901])
    crit_contig = limits.mc_critical_value(
        limits.WaldMixture(spec.p - 1, spec.xi), spec.alpha, rng=rng_c)
    crit_strict = limits.mc_critical_value(
        limits.WaldMixture(spec.p - 1, 0.0), spec.alpha, rng=rng_s)
    tests = (("watson", "watson", crit, None),
             ("wald", "wald", crit, None),
             ("wald_contiguity", "wald", crit_contig, None),
             ("wald_strict", "wald", crit_strict, None))
    n = spec.n[0]
    cells = []
    for ell in spec.ell_values:
        e1 = n ** (-ell / 4.0) / math.sqrt(spec.p)
        kappa = _calibrated_kappa(spec, e1)
        regime = _fig2_regime(ell)
        e2_tilde = (model.moments(model.RotSymModel(THETA0, kappa,
                                                    model.radial_function(spec.radial))).e2_tilde
                    if regime is Regime.AWAY_FROM_UNIFORMITY else 1.0 / spec.p)
        for r in spec.r_values:
            theta_alt = model.local_alternative(ell, r, n, THETA0)
            tau_norm = _realized_tau_norm(ell, theta_alt, n)
            power = limits.asymptotic_power("watson", regime, spec.xi, tau_norm,
                                            spec.p, e2_tilde, spec.alpha)
            cells.append(dict(ell=ell, r=r, n=n, theta_alt=theta_alt,
                              kappa=kappa, tests=tests,
                              asym_power={"watson": power}))
    return _run_rejection_experiment(spec, cells)


def run_figure3(spec: ExperimentSpec) -> ExperimentResult:
    """Score test against the oracle test in the contiguous regime."""
    n = spec.n[0]
    crit_watson = specfn.chi2_quantile(1.0 - spec.alpha, spec.p - 1)
    crit_oracle = specfn.chi2_quantile(1.0 - spec.alpha, spec.p)
    tests = (("watson", "watson", crit_watson, None),
             ("oracle", "oracle", crit_oracle, spec.xi))
    e1 = spec.xi / math.sqrt(n * spec.p)
    kappa = _calibrated_kappa(spec, e1)
    cells = []
    for r in spec.r_values:
        theta_alt = model.local_alternative(2, r, n, THETA0)
        tau_norm = float(np.linalg.norm(theta_alt - THETA0))
        cells.append(dict(ell=2, r=r, n=n, theta_alt=theta_alt, kappa=kappa,
                          tests=tests, asym_power={
                              "watson": limits.asymptotic_power(
                                  "watson", Regime.UNDER_CONTIGUITY, spec.xi,
                                  tau_norm, spec.p, 1.0 / spec.p, spec.alpha),
                              "oracle": limits.asymptotic_power(
                                  "oracle", Regime.UNDER_CONTIGUITY, spec.xi,
                                  tau_norm, spec.p, 1.0 / spec.p, spec.alpha)}))
    return _run_rejection_experiment(spec, cells)


# ---------------------------------------------------------------------------
# Estimator study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _RegimeStudy:
    index: int
    kind: Regime
    rate_exponent: float
    n: int
    M: int


_THM21_STUDIES = (
    _RegimeStudy(1, Regime.AWAY_FROM_UNIFORMITY, 0.0, n=1000, M=5000),
    _RegimeStudy(2, Regime.BEYOND_CONTIGUITY, 0.25, n=10000, M=5000),
    _RegimeStudy(3, Regime.UNDER_CONTIGUITY, 0.5, n=2000, M=10000),
    _RegimeStudy(4, Regime.STRICT_CONTIGUITY, 1.0, n=2000, M=10000),
)


def run_thm21_study(spec: ExperimentSpec) -> ExperimentResult:
    """Check the limit behaviour of the spherical mean in all four regimes.

    Gaussian regimes report the relative Frobenius error between the
    empirical covariance of the scaled estimation error and its tangent
    Gaussian limit; the contiguous regime reports the two-sample KS distance
    of the estimator cosines against draws from the projected-normal limit;
    the strictly contiguous regime reports the KS distance and p-value
    against the uniform-sphere cosine law.
    """
    figure_label = FIGURE_LABELS[spec.figure]
    result = ExperimentResult(spec=spec)
    p, xi = spec.p, spec.xi
    radial = model.radial_function(spec.radial)
    theta = np.zeros(p)
    theta[-1] = 1.0
    for study in _THM21_STUDIES:
        eta = study.n ** (-study.rate_exponent)
        e1 = eta * xi / math.sqrt(p)
        kappa = model.calibrate_kappa(p, radial, e1)
        scale = math.sqrt(study.n) * eta
        tasks = [(figure_label, study.index, theta, kappa, study.n, scale,
                  spec.seed, start, count)
                 for start, count in _chunk_ranges(study.M)]
        outputs = _run_chunks(_estimator_chunk, tasks, spec.workers)
        cosines = np.concatenate([out[0] for out in outputs])
        outer = sum((out[1] for out in outputs), np.zeros((p, p)))

        def add_row(metric, value):
            result.rows.append(ResultRow(
                figure=spec.figure, ell=study.index, r=0, test=metric,
                n=study.n, M=study.M, alpha=spec.alpha,
                reject_freq=float(value), stderr=0.0, asym_power=None,
                seed=spec.seed))

        if study.kind in (Regime.AWAY_FROM_UNIFORMITY, Regime.BEYOND_CONTIGUITY):
            if study.kind is Regime.AWAY_FROM_UNIFORMITY:
                mom = model.moments(model.RotSymModel(theta, kappa, radial))
                lim = limits.spherical_mean_limit(study.kind, math.sqrt(p) * mom.e1,
                                                  p, mom.e2_tilde)
            else:
                lim = limits.spherical_mean_limit(study.kind, xi, p)
            target = lim.law.variance_factor * (np.eye(p) - np.outer(theta, theta))
            empirical = outer / study.M
            rel_err = (np.linalg.norm(empirical - target)
                       / np.linalg.norm(target))
            add_row("cov_rel_err", rel_err)
        elif study.kind is Regime.UNDER_CONTIGUITY:
            law = limits.ProjectedNormal(p, xi)
            oracle_rng = sampling.derive_stream(
                spec.seed, [figure_label, study.index, _AUX_BLOCK])
            oracle = limits.sample_law(law, 10 ** 6, oracle_rng) @ theta
            ks = scipy_stats.ks_2samp(cosines, oracle)
            add_row("ks_dist", ks.statistic)
            add_row("ks_pval", ks.pvalue)
        else:
            # For p = 3 the cosine of a uniform direction is Uniform(-1, 1).
            if p == 3:
                ks = scipy_stats.kstest(cosines, scipy_stats.uniform(-1, 2).cdf)
            else:
                oracle_rng = sampling.derive_stream(
                    spec.seed, [figure_label, study.index, _AUX_BLOCK])
                oracle = limits.sample_law(limits.UniformSphere(p),
                                           10 ** 6, oracle_rng) @ theta
                ks = scipy_stats.ks_2samp(cosines, oracle)
            add_row("ks_dist", ks.statistic)
            add_row("ks_pval", ks.pvalue)
    return result


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    runners = {"fig1": run_figure1, "fig2": run_figure2,
               "fig3": run_figure3, "thm21": run_thm21_study}
    return runners[spec.figure](spec)
