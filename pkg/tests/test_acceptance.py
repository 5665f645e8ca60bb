"""Acceptance gate: one test per headline criterion, at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -s`` to see one [PASS]/[FAIL]
line per criterion.  The full-size studies (M = 10,000 replicates) are run
once per session and shared across criteria; on two cores the whole gate
takes a few minutes.

Criteria are asserted exactly as stated.  Two of them are knowingly
over-tight relative to what the theory itself predicts at these sample
sizes; they are implemented faithfully and their failure messages carry the
measured numbers (see the FAIL detail lines).
"""

import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats as scipy_stats

from spheremode import (dataio, geom, limits, mc, model, sampling, specfn,
                        stats, zones)
from spheremode.model import Regime

POLE = np.array([0.0, 0.0, 1.0])
SEED = sampling.DEFAULT_MASTER_SEED
WORKERS = min(os.cpu_count() or 1, 8)
DATA = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                    "data", "cosmic_ray_standin.csv")

FVML = model.radial_function("fvml")


def criterion(name, ok, detail=""):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f" | {detail}"
    print(line)
    return ok


def rows_by(result, **match):
    out = []
    for row in result.rows:
        if all(getattr(row, key) == value for key, value in match.items()):
            out.append(row)
    return out


@pytest.fixture(scope="module")
def fig1():
    start = time.perf_counter()
    result = mc.run_figure1(mc.figure1_spec(seed=SEED, M=10000, workers=WORKERS))
    result.elapsed = time.perf_counter() - start
    return result


@pytest.fixture(scope="module")
def fig2():
    return mc.run_figure2(mc.figure2_spec(seed=SEED, M=10000, workers=WORKERS))


@pytest.fixture(scope="module")
def fig3():
    return mc.run_figure3(mc.figure3_spec(seed=SEED, M=10000, workers=WORKERS))


@pytest.fixture(scope="module")
def thm21():
    return mc.run_thm21_study(mc.thm21_spec(seed=SEED, workers=WORKERS))


# ---------------------------------------------------------------------------
# Criterion 1: Figure 1 reproduction
# ---------------------------------------------------------------------------

def test_figure1_reproduction(fig1):
    failures = []
    for row in rows_by(fig1, test="watson"):
        if not 0.04 <= row.reject_freq <= 0.06:
            failures.append(f"watson ell={row.ell} n={row.n}: {row.reject_freq:.4f}")
    for row in rows_by(fig1, test="wald"):
        if row.ell in (0, 1, 2) and not 0.04 <= row.reject_freq <= 0.06:
            failures.append(f"wald ell={row.ell} n={row.n}: {row.reject_freq:.4f}")
        if row.ell == 5 and row.n == 1000 and not row.reject_freq < 0.01:
            failures.append(f"wald ell=5 n=1000: {row.reject_freq:.4f}")
    runtime_ok = fig1.elapsed < 600.0
    if not runtime_ok:
        failures.append(f"runtime {fig1.elapsed:.0f}s over 600s")
    detail = (f"runtime {fig1.elapsed:.0f}s on {WORKERS} workers"
              + ("; " + "; ".join(failures) if failures else ""))
    ok = criterion("figure-1: score level robust, spherical-mean level bands",
                   not failures, detail)
    assert ok, ("Figure 1 cells outside their stated bands: "
                + "; ".join(failures)
                + ". The spherical-mean test's effective noncentrality in these "
                  "cells is n^(1/2 - ell/6) (4.6, 2.2, 3.2 at the failing cells), "
                  "far from its chi-square regime, so its true rejection rate "
                  "there is 0.001-0.02 -- the very conservativeness the study "
                  "is designed to exhibit.")


# ---------------------------------------------------------------------------
# Criterion 2: Figure 2 reproduction (contiguous and strictly contiguous rows)
# ---------------------------------------------------------------------------

def test_figure2_reproduction(fig2):
    failures = []
    watson2 = {row.r: row for row in rows_by(fig2, test="watson", ell=2)}
    for r, row in watson2.items():
        bound = 0.02 + 2.0 * row.stderr
        if abs(row.reject_freq - row.asym_power) > bound:
            failures.append(f"watson ell=2 r={r}: |{row.reject_freq:.4f} - "
                            f"{row.asym_power:.4f}| > {bound:.4f}")
    peak = max(watson2.values(), key=lambda row: row.reject_freq).r
    if peak != 3:
        failures.append(f"watson ell=2 peak at r={peak}, expected 3")
    for row in rows_by(fig2, test="wald", ell=2):
        if row.r >= 1 and not row.reject_freq < 0.02:
            failures.append(f"wald ell=2 r={row.r}: {row.reject_freq:.4f}")
    for row in rows_by(fig2, test="wald_contiguity", ell=2):
        if not row.reject_freq <= 0.05 + 2.0 * max(row.stderr,
                                                   mc.binomial_stderr(0.05, row.M)):
            failures.append(f"wald_contiguity r={row.r}: {row.reject_freq:.4f}")
    for test_name in ("watson", "wald_strict"):
        for row in rows_by(fig2, test=test_name, ell=3):
            if not 0.04 <= row.reject_freq <= 0.06:
                failures.append(f"{test_name} ell=3 r={row.r}: {row.reject_freq:.4f}")
    for row in rows_by(fig2, test="wald", ell=3):
        if not row.reject_freq < 0.01:
            failures.append(f"wald ell=3 r={row.r}: {row.reject_freq:.4f}")
    ok = criterion("figure-2: contiguous power curve, blind tests, oracle bias",
                   not failures, "; ".join(failures))
    assert ok, "Figure 2 violations: " + "; ".join(failures)


# ---------------------------------------------------------------------------
# Criterion 3: Figure 3 reproduction
# ---------------------------------------------------------------------------

def test_figure3_reproduction(fig3):
    failures = []
    watson = {row.r: row for row in rows_by(fig3, test="watson")}
    oracle = {row.r: row for row in rows_by(fig3, test="oracle")}
    for r in (0,):
        for name, curve in (("watson", watson), ("oracle", oracle)):
            if not 0.04 <= curve[r].reject_freq <= 0.06:
                failures.append(f"{name} r=0 level {curve[r].reject_freq:.4f}")
    for name, curve in (("watson", watson), ("oracle", oracle)):
        for r, row in curve.items():
            bound = 0.02 + 2.0 * row.stderr
            if abs(row.reject_freq - row.asym_power) > bound:
                failures.append(f"{name} r={r}: |{row.reject_freq:.4f} - "
                                f"{row.asym_power:.4f}| > {bound:.4f}")

    def pooled_se(a, b):
        return math.sqrt(a.stderr ** 2 + b.stderr ** 2)

    gap1 = watson[1].reject_freq - oracle[1].reject_freq
    need1 = 2.0 * pooled_se(watson[1], oracle[1])
    if not gap1 > need1:
        failures.append(f"r=1 watson-oracle gap {gap1:+.4f} <= 2*pooled {need1:.4f}")
    for r in (3, 4):
        gap = oracle[r].reject_freq - watson[r].reject_freq
        need = 2.0 * pooled_se(watson[r], oracle[r])
        if not gap > need:
            failures.append(f"r={r} oracle-watson gap {gap:+.4f} <= {need:.4f}")
    ok = criterion("figure-3: score vs oracle crossing and curve accuracy",
                   not failures, "; ".join(failures))
    assert ok, ("Figure 3 violations: " + "; ".join(failures)
                + ". At r=1 the asymptotic gap between the score and oracle "
                  "powers is itself only 0.0031 (0.0693 vs 0.0662), so no "
                  "faithful simulation at M=10,000 can clear a 2*pooled-stderr "
                  "(~0.007) margin; the tests' small-tau ordering is a limit "
                  "statement as tau -> 0.")


# ---------------------------------------------------------------------------
# Criterion 4: null law of the spherical-mean statistic near uniformity
# ---------------------------------------------------------------------------

def _simulate_wald_null(n, e1, reps, block):
    kappa = model.calibrate_kappa(3, FVML, e1)
    values = np.empty(reps)
    for rep in range(reps):
        stream = sampling.derive_stream(SEED, [7, block, rep])
        sample = stats.Sample(sampling.sample_fvml(POLE, kappa, n, stream))
        values[rep] = stats.wald_statistic(sample, POLE)
    return values


def test_wald_mixture_null_law():
    n, reps, m_law = 1000, 10 ** 4, 10 ** 6
    failures = []
    # Contiguous regime: e1 = xi / sqrt(pn) with xi = 1.
    sims = _simulate_wald_null(n, 1.0 / math.sqrt(3 * n), reps, block=1)
    law_draws = limits.sample_law(limits.WaldMixture(2, 1.0), m_law,
                                  sampling.derive_stream(SEED, [7, 10]))
    ks_c = scipy_stats.ks_2samp(sims, law_draws).statistic
    if not ks_c < 0.03:
        failures.append(f"contiguous KS {ks_c:.4f}")
    # Strict contiguity, decay exponent 5/6 (any exponent above 1/2 qualifies).
    sims = _simulate_wald_null(n, n ** (-5.0 / 6.0) / math.sqrt(3), reps, block=2)
    law_draws = limits.sample_law(limits.WaldMixture(2, 0.0), m_law,
                                  sampling.derive_stream(SEED, [7, 11]))
    ks_s = scipy_stats.ks_2samp(sims, law_draws).statistic
    if not ks_s < 0.03:
        failures.append(f"strict KS {ks_s:.4f}")
    ok = criterion("mixture null law: KS(simulated, limit) < 0.03",
                   not failures, f"contiguous {ks_c:.4f}, strict {ks_s:.4f}")
    assert ok, "; ".join(failures)


# ---------------------------------------------------------------------------
# Criterion 5: estimator limit study
# ---------------------------------------------------------------------------

def test_estimator_limit_study(thm21):
    metrics = {(row.ell, row.test): row.reject_freq for row in thm21.rows}
    cov_err = metrics[(2, "cov_rel_err")]
    ks_pval = metrics[(4, "ks_pval")]
    detail = (f"beyond-contiguity cov rel err {cov_err:.4f}; "
              f"strict uniformity KS p {ks_pval:.4f}; "
              f"away cov rel err {metrics[(1, 'cov_rel_err')]:.4f}; "
              f"contiguous KS dist {metrics[(3, 'ks_dist')]:.4f}")
    ok = criterion("estimator limits: tangent covariance and uniformity",
                   cov_err <= 0.10 and ks_pval > 0.001, detail)
    assert ok, detail


# ---------------------------------------------------------------------------
# Criterion 6: local expansion of the FvML log-likelihood ratio
# ---------------------------------------------------------------------------

def _lan_mae(kind, n, reps, block):
    xi = 1.0
    if kind is Regime.UNDER_CONTIGUITY:
        rate = 0.5
        nu = 1.0
        angle = 2 * math.pi / 6  # on-sphere alternative with ||tau|| = 1
        theta1 = np.array([math.sin(angle), 0.0, math.cos(angle)])
    else:
        rate = 0.25
        nu = n ** -0.25
        theta1 = geom.normalize(POLE + nu * np.array([1.0, 0.0, 0.0]))
    tau = (theta1 - POLE) / nu
    assert model.check_spherical_constraint(POLE, tau, nu)
    spec = model.RegimeSpec(kind, rate, xi)
    kappa = model.calibrate_kappa(3, FVML, n ** (-rate) * xi / math.sqrt(3))
    errors = np.empty(reps)
    for rep in range(reps):
        stream = sampling.derive_stream(SEED, [8, block, rep])
        sample = stats.Sample(sampling.sample_fvml(POLE, kappa, n, stream))
        exact = stats.fvml_log_likelihood_ratio(sample, theta1, POLE, kappa)
        delta, gamma = stats.lan_central_sequence(sample, POLE, xi, spec)
        quadratic = float(tau @ delta) - 0.5 * float(tau @ gamma @ tau)
        errors[rep] = abs(exact - quadratic)
    return float(errors.mean())


def test_lan_expansion():
    reps = 1000
    failures = []
    details = []
    for kind, label in ((Regime.UNDER_CONTIGUITY, "contiguous"),
                        (Regime.BEYOND_CONTIGUITY, "beyond")):
        maes = [_lan_mae(kind, n, reps, block)
                for block, n in enumerate((10 ** 3, 10 ** 4, 10 ** 5))]
        details.append(f"{label}: " + " -> ".join(f"{m:.4f}" for m in maes))
        if not maes[-1] < 0.05:
            failures.append(f"{label} MAE at n=1e5 is {maes[-1]:.4f}")
        if not maes[0] > maes[1] > maes[2]:
            failures.append(f"{label} MAE not decreasing: {maes}")
    ok = criterion("local expansion: exact log-LR vs quadratic form",
                   not failures, "; ".join(details))
    assert ok, "; ".join(failures)


# ---------------------------------------------------------------------------
# Criterion 7: oracle suites
# ---------------------------------------------------------------------------

def test_oracle_suites():
    failures = []
    # Sampler moments against quadrature at n = 1e6 (5 MC stderr).
    m = model.RotSymModel(POLE, 1.0, FVML)
    mom = model.moments(m)
    draws = sampling.sample_rotsym(m, 10 ** 6, sampling.derive_stream(SEED, [9, 0]))
    u = draws @ POLE
    se1 = math.sqrt(u.var() / u.size)
    se2 = math.sqrt(((u - u.mean()) ** 2).var() / u.size)
    if abs(u.mean() - mom.e1) > 5 * se1:
        failures.append(f"sampler e1 off: {u.mean():.6f} vs {mom.e1:.6f}")
    if abs(u.var() - mom.e2_tilde) > 5 * se2:
        failures.append(f"sampler e2_tilde off: {u.var():.6f} vs {mom.e2_tilde:.6f}")
    # Quadrature moments against the Bessel-ratio formulas (1e-8).
    for p in (2, 3, 5):
        theta = np.zeros(p)
        theta[-1] = 1.0
        for kappa in (0.1, 1.0, 5.0):
            qm = model.moments(model.RotSymModel(theta, kappa, FVML))
            ratio = specfn.bessel_ratio(p / 2.0, kappa)
            tilde = 1.0 - (p - 1) * ratio / kappa - ratio ** 2
            if abs(qm.e1 - ratio) > 1e-8 or abs(qm.e2_tilde - tilde) > 1e-8:
                failures.append(f"moments vs bessel at p={p} kappa={kappa}")
    # Quantile round trip (1e-8).
    for df in (1, 2, 3, 7):
        for x in (0.2, 1.0, 4.0, 11.0):
            prob = specfn.chi2_cdf(x, df)
            if abs(specfn.chi2_quantile(prob, df) - x) > 1e-8 * max(1.0, x):
                failures.append(f"quantile roundtrip df={df} x={x}")
    # Hand-computed statistics, exact to 1e-12.
    fixture = stats.Sample(np.array([[1.0, 0.0], [0.0, 1.0]]))
    theta0 = np.array([1.0, 0.0])
    hand = (
        ("watson", stats.watson_statistic(fixture, theta0), 1.0),
        ("wald", stats.wald_statistic(fixture, theta0), 0.5),
        ("q_bc", stats.q_bc_statistic(fixture, theta0), 1.0),
        ("oracle", stats.oracle_statistic(fixture, theta0, 1.0), 1.0),
    )
    for name, got, want in hand:
        if abs(got - want) > 1e-12:
            failures.append(f"{name} fixture: {got!r}")
    ok = criterion("oracle suites: sampler moments, Bessel, quantiles, fixtures",
                   not failures, "; ".join(failures))
    assert ok, "; ".join(failures)


# ---------------------------------------------------------------------------
# Criterion 8: confidence-zone properties
# ---------------------------------------------------------------------------

def test_zone_properties():
    failures = []
    sample = dataio.load_sample(dataio.DatasetSpec(DATA))
    watson_zone = zones.invert_test(sample, "watson", 0.95, resolution=20000)
    wald_zone = zones.invert_test(sample, "wald", 0.95, resolution=20000)
    half = watson_zone.grid.shape[0] // 2
    for name, zone in (("watson", watson_zone), ("wald", wald_zone)):
        if not np.array_equal(zone.member[:half], zone.member[half:]):
            failures.append(f"{name} zone not antipodally symmetric")
    theta_hat = stats.spherical_mean(sample)
    if stats.watson_statistic(sample, theta_hat) > 1e-10:
        failures.append("score statistic not zero at the point estimate")
    if not watson_zone.member[int(np.argmax(watson_zone.grid @ theta_hat))]:
        failures.append("point estimate not inside the score zone")
    cosines = np.abs(wald_zone.grid @ theta_hat)
    near_circle = np.flatnonzero(cosines < 0.01)
    if near_circle.size == 0 or not wald_zone.member[near_circle].all():
        failures.append("great circle not inside the spherical-mean zone")
    wider = zones.invert_test(sample, "watson", 0.99, resolution=20000)
    if not np.all(wider.member[watson_zone.member]):
        failures.append("0.99 zone does not contain 0.95 zone")
    # Coverage over 2000 contiguous-regime replicates at n = 200.
    n, reps = 200, 2000
    kappa = model.calibrate_kappa(3, FVML, 1.0 / math.sqrt(3 * n))
    crit = specfn.chi2_quantile(0.95, 2)
    hits = 0
    for rep in range(reps):
        stream = sampling.derive_stream(SEED, [10, rep])
        rep_sample = stats.Sample(sampling.sample_fvml(POLE, kappa, n, stream))
        hits += stats.watson_statistic(rep_sample, POLE) <= crit
    coverage = hits / reps
    floor = 0.95 - 3.0 * math.sqrt(0.95 * 0.05 / reps)
    if not coverage >= floor:
        failures.append(f"coverage {coverage:.4f} below {floor:.4f}")
    ok = criterion("zones: symmetry, inclusions, nesting, coverage",
                   not failures,
                   f"coverage {coverage:.4f} (floor {floor:.4f}); "
                   f"area watson {zones.zone_area_fraction(watson_zone):.3f} "
                   f"vs wald {zones.zone_area_fraction(wald_zone):.3f}")
    assert ok, "; ".join(failures)
