"""Test statistics for the spherical location problem and their decision rule.

All statistics are plain functions of an immutable :class:`Sample`.  The
score statistic and the spherical-mean (Wald) statistic share the same
denominator ``1 - mean((X_i'theta0)^2)``, which vanishes only when all mass
sits at the poles; that degenerate case raises instead of returning NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from . import geom, limits
from .errors import (DegenerateDenominator, DegenerateMean, DomainError,
                     UnsupportedRegime)
from .model import Regime, RegimeSpec

_DEGENERACY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Sample:
    """n observations on the (p-1)-sphere, stored as an (n, p) array."""

    points: np.ndarray

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim != 2 or points.shape[0] < 1 or points.shape[1] < 2:
            raise DomainError("sample must be an (n, p) array with n >= 1, p >= 2")
        object.__setattr__(self, "points", points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def p(self) -> int:
        return self.points.shape[1]

    @cached_property
    def mean(self) -> np.ndarray:
        return self.points.mean(axis=0)


@dataclass(frozen=True)
class TestOutcome:
    """Result of one test: statistic, critical value, optional p-value, decision."""

    statistic: float
    critical_value: float
    p_value: Optional[float]
    reject: bool
    test_name: str
    alpha: float


def spherical_mean(sample: Sample) -> np.ndarray:
    """Normalized sample mean direction.

    Raises
    ------
    DegenerateMean
        If the sample mean has numerically zero norm.
    """
    mean = sample.mean
    norm = float(np.linalg.norm(mean))
    if norm <= _DEGENERACY_TOL:
        raise DegenerateMean("sample mean too close to zero to define a direction")
    return mean / norm


def _denominator(sample: Sample, theta0: np.ndarray) -> float:
    denom = 1.0 - float(np.mean((sample.points @ theta0) ** 2))
    if denom <= _DEGENERACY_TOL:
        raise DegenerateDenominator(
            "all sample mass lies at +-theta0; the statistic is undefined")
    return denom


def watson_statistic(sample: Sample, theta0: np.ndarray) -> float:
    """Score statistic: n (p-1) ||(I - theta0 theta0') Xbar||^2 / (1 - mean u_i^2)."""
    theta0 = geom.check_unit(theta0, "theta0")
    mean = sample.mean
    numerator = float(mean @ mean) - float(mean @ theta0) ** 2
    return sample.n * (sample.p - 1) * numerator / _denominator(sample, theta0)


def wald_statistic(sample: Sample, theta0: np.ndarray) -> float:
    """Spherical-mean statistic: n (p-1) (Xbar'theta0)^2 (1 - (thetahat'theta0)^2) / (1 - mean u_i^2)."""
    theta0 = geom.check_unit(theta0, "theta0")
    theta_hat = spherical_mean(sample)
    mean = sample.mean
    numerator = (float(mean @ theta0) ** 2
                 * (1.0 - float(theta_hat @ theta0) ** 2))
    return sample.n * (sample.p - 1) * numerator / _denominator(sample, theta0)


def q_bc_statistic(sample: Sample, theta0: np.ndarray) -> float:
    """Maximin statistic for weak signals: n p ||(I - theta0 theta0') Xbar||^2.

    The same expression is the locally maximin statistic in the contiguous
    regime, so no separate function is provided for that case.
    """
    theta0 = geom.check_unit(theta0, "theta0")
    mean = sample.mean
    numerator = float(mean @ mean) - float(mean @ theta0) ** 2
    return sample.n * sample.p * numerator


def oracle_statistic(sample: Sample, theta0: np.ndarray, xi: float) -> float:
    """Oracle statistic ||sqrt(np) Xbar - xi theta0||^2 (requires the true xi)."""
    theta0 = geom.check_unit(theta0, "theta0")
    shifted = math.sqrt(sample.n * sample.p) * sample.mean - xi * theta0
    return float(shifted @ shifted)


def decide(statistic: float, null_law, alpha: float, test_name: str = "",
           rng=None, m: int = 10 ** 6, cache=None) -> TestOutcome:
    """Compare a statistic against the alpha-upper quantile of its null law.

    Chi-square critical values are analytic; other laws are Monte-Carlo
    estimated through :func:`limits.critical_value`.  The p-value is reported
    only when the null law has a computable CDF (chi-square); rejection is on
    strict inequality.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")
    crit = limits.critical_value(null_law, alpha, rng=rng, m=m, cache=cache)
    p_value = limits.upper_tail_probability(null_law, statistic)
    return TestOutcome(statistic=float(statistic), critical_value=float(crit),
                       p_value=p_value, reject=bool(statistic > crit),
                       test_name=test_name, alpha=alpha)


def fvml_log_likelihood_ratio(sample: Sample, theta1: np.ndarray,
                              theta0: np.ndarray, kappa: float) -> float:
    """Exact FvML log-likelihood ratio of location theta1 against theta0.

    At equal concentration the normalizing constants cancel, leaving
    n * kappa * Xbar'(theta1 - theta0).
    """
    theta1 = geom.check_unit(theta1, "theta1")
    theta0 = geom.check_unit(theta0, "theta0")
    return sample.n * kappa * float(sample.mean @ (theta1 - theta0))


def lan_central_sequence(sample: Sample, theta: np.ndarray, xi: float,
                         regime: RegimeSpec):
    """Central sequence and information matrix of the local expansion.

    Beyond contiguity: Delta = xi sqrt(np) (I - theta theta') Xbar with
    Gamma = xi^2 (I - theta theta'); under contiguity: Delta =
    xi sqrt(np) Xbar - xi^2 theta with Gamma = xi^2 I; under strict
    contiguity both vanish.  The fixed-signal regime is out of scope.
    """
    theta = geom.check_unit(theta, "theta")
    p = sample.p
    kind = regime.kind
    if kind is Regime.AWAY_FROM_UNIFORMITY:
        raise UnsupportedRegime(
            "the local expansion away from uniformity is not provided here")
    if kind is Regime.STRICT_CONTIGUITY:
        return np.zeros(p), np.zeros((p, p))
    root = xi * math.sqrt(sample.n * p)
    if kind is Regime.BEYOND_CONTIGUITY:
        delta = root * geom.project_tangent(sample.mean, theta)
        gamma = xi ** 2 * (np.eye(p) - np.outer(theta, theta))
        return delta, gamma
    delta = root * sample.mean - xi ** 2 * theta
    gamma = xi ** 2 * np.eye(p)
    return delta, gamma
