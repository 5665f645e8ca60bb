"""Asymptotic laws of the statistics and their Monte-Carlo critical values.

The nonstandard null law of the spherical-mean statistic near uniformity is
the mixture ``(1 + Q/(Z + lam)^2)^-1 Q`` with independent ``Z ~ N(0,1)`` and
``Q ~ chi^2``; it has no closed-form CDF, so its quantiles are estimated from
large Monte-Carlo samples and optionally cached on disk.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import sampling, specfn
from .errors import DomainError
from .model import Regime

MC_QUANTILE_DRAWS = 10 ** 6


@dataclass(frozen=True)
class ChiSquare:
    df: int

    def describe(self) -> str:
        return f"chisq:{self.df}"


@dataclass(frozen=True)
class NoncentralChiSquare:
    df: int
    nc: float

    def describe(self) -> str:
        return f"ncchisq:{self.df}:{self.nc:.12g}"


@dataclass(frozen=True)
class WaldMixture:
    """Null law of the spherical-mean statistic near uniformity; df = p - 1."""

    df: int
    lam: float

    def describe(self) -> str:
        return f"waldmix:{self.df}:{self.lam:.12g}"


@dataclass(frozen=True)
class ProjectedNormal:
    """Law of Z/||Z|| with Z ~ N(xi * e_p, I_p), stated in the pole frame."""

    p: int
    xi: float

    def describe(self) -> str:
        return f"projnormal:{self.p}:{self.xi:.12g}"


@dataclass(frozen=True)
class UniformSphere:
    p: int

    def describe(self) -> str:
        return f"uniform:{self.p}"


@dataclass(frozen=True)
class TangentGaussian:
    """Tangent-space Gaussian limit of the scaled estimation error (pole frame)."""

    p: int
    variance_factor: float

    def describe(self) -> str:
        return f"tangentgauss:{self.p}:{self.variance_factor:.12g}"


LimitLaw = Union[ChiSquare, NoncentralChiSquare, WaldMixture,
                 ProjectedNormal, UniformSphere, TangentGaussian]


def wald_mixture_value(z, q, lam: float):
    """The mixture transform (1 + q/(z+lam)^2)^-1 q, with 0 at z + lam = 0."""
    z = np.asarray(z, dtype=float)
    q = np.asarray(q, dtype=float)
    shifted_sq = (z + lam) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = q * shifted_sq / (shifted_sq + q)
    return np.where(shifted_sq + q == 0.0, 0.0, out)


def sample_law(law: LimitLaw, m: int, rng) -> np.ndarray:
    """m i.i.d. draws from a limit law (vectors for the sphere-valued laws)."""
    if m < 1:
        raise DomainError("need m >= 1")
    gen = sampling._as_generator(rng)
    if isinstance(law, ChiSquare):
        return gen.chisquare(law.df, size=m)
    if isinstance(law, NoncentralChiSquare):
        if law.nc == 0.0:
            return gen.chisquare(law.df, size=m)
        return gen.noncentral_chisquare(law.df, law.nc, size=m)
    if isinstance(law, WaldMixture):
        z = gen.standard_normal(m)
        q = gen.chisquare(law.df, size=m)
        return wald_mixture_value(z, q, law.lam)
    if isinstance(law, ProjectedNormal):
        shift = np.zeros(law.p)
        shift[-1] = law.xi
        z = gen.standard_normal((m, law.p)) + shift
        return z / np.linalg.norm(z, axis=1, keepdims=True)
    if isinstance(law, UniformSphere):
        return sampling.sample_uniform(law.p, m, gen)
    if isinstance(law, TangentGaussian):
        out = np.zeros((m, law.p))
        out[:, : law.p - 1] = (math.sqrt(law.variance_factor)
                               * gen.standard_normal((m, law.p - 1)))
        return out
    raise DomainError(f"cannot sample from {law!r}")


# ---------------------------------------------------------------------------
# Critical values
# ---------------------------------------------------------------------------

class QuantileCache:
    """Reproducible store of Monte-Carlo quantiles.

    On disk, one line per entry: ``law-descriptor,alpha,m,seed,value``.
    """

    def __init__(self, path: Optional[str] = None):
        self.path = Path(path) if path is not None else None
        self._entries = {}
        if self.path is not None and self.path.exists():
            self.load(self.path)

    @staticmethod
    def _key(descriptor, alpha, m, seed):
        return (descriptor, f"{alpha:.12g}", int(m), str(seed))

    def get(self, descriptor, alpha, m, seed):
        return self._entries.get(self._key(descriptor, alpha, m, seed))

    def put(self, descriptor, alpha, m, seed, value):
        self._entries[self._key(descriptor, alpha, m, seed)] = float(value)
        if self.path is not None:
            self.save(self.path)

    def load(self, path):
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            descriptor, alpha, m, seed, value = line.split(",")
            self._entries[(descriptor, alpha, int(m), seed)] = float(value)

    def save(self, path):
        lines = ["# law-descriptor,alpha,m,seed,value"]
        for (descriptor, alpha, m, seed), value in sorted(self._entries.items()):
            lines.append(f"{descriptor},{alpha},{m},{seed},{value!r}")
        Path(path).write_text("\n".join(lines) + "\n")


def _default_stream(law: LimitLaw) -> sampling.RngStream:
    digest = hashlib.blake2s(law.describe().encode()).digest()
    label = int.from_bytes(digest[:8], "little")
    return sampling.derive_stream(sampling.DEFAULT_MASTER_SEED, [label])


def mc_critical_value(law: LimitLaw, alpha: float, m: int = MC_QUANTILE_DRAWS,
                      rng=None, cache: Optional[QuantileCache] = None) -> float:
    """Empirical (1 - alpha)-quantile of m draws from the law.

    The stream defaults to one derived from the law's descriptor, so repeated
    calls (and cache entries) are reproducible without extra bookkeeping.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")
    stream = _default_stream(law) if rng is None else rng
    if isinstance(stream, sampling.RngStream):
        seed_tag = f"{stream.master_seed}:{stream.stream_id}"
    else:
        seed_tag = "adhoc"
    if cache is not None:
        hit = cache.get(law.describe(), alpha, m, seed_tag)
        if hit is not None:
            return hit
    draws = sample_law(law, m, stream)
    value = float(np.quantile(draws, 1.0 - alpha))
    if cache is not None and seed_tag != "adhoc":
        cache.put(law.describe(), alpha, m, seed_tag, value)
    return value


def critical_value(law: LimitLaw, alpha: float, rng=None,
                   m: int = MC_QUANTILE_DRAWS,
                   cache: Optional[QuantileCache] = None) -> float:
    """alpha-upper quantile of a null law: analytic when possible, else MC."""
    if isinstance(law, ChiSquare):
        return specfn.chi2_quantile(1.0 - alpha, law.df)
    return mc_critical_value(law, alpha, m=m, rng=rng, cache=cache)


def upper_tail_probability(law: LimitLaw, x: float) -> Optional[float]:
    """P(law > x) when the law has a computable CDF, else None."""
    if isinstance(law, ChiSquare):
        return 1.0 - specfn.chi2_cdf(x, law.df)
    if isinstance(law, NoncentralChiSquare):
        return 1.0 - specfn.noncentral_chi2_cdf(x, law.df, law.nc)
    return None


# ---------------------------------------------------------------------------
# Non-null behaviour of the tests
# ---------------------------------------------------------------------------

def watson_noncentrality(kind: Regime, xi: float, tau_norm: float, p: int,
                         e2_tilde: Optional[float] = None) -> float:
    """Noncentrality of the score statistic under a local alternative.

    Fixed signal: (1 - 1/p) / (1 - xi^2/p - e2_tilde) * xi^2 ||tau||^2;
    beyond contiguity: xi^2 ||tau||^2; under contiguity:
    xi^2 ||tau||^2 (4 - ||tau||^2) / 4 with ||tau|| <= 2; under strict
    contiguity the statistic is blind to the alternative and the
    noncentrality is zero.
    """
    if tau_norm < 0:
        raise DomainError("tau_norm must be nonnegative")
    if kind is Regime.AWAY_FROM_UNIFORMITY:
        if e2_tilde is None:
            raise DomainError("the fixed-signal regime requires e2_tilde")
        slack = 1.0 - xi ** 2 / p - e2_tilde
        if slack <= 0:
            raise DomainError(
                "invalid locality parameters: 1 - xi^2/p - e2_tilde must be positive")
        return (1.0 - 1.0 / p) / slack * xi ** 2 * tau_norm ** 2
    if kind is Regime.BEYOND_CONTIGUITY:
        return xi ** 2 * tau_norm ** 2
    if kind is Regime.UNDER_CONTIGUITY:
        if tau_norm > 2.0:
            raise DomainError("under contiguity the perturbation norm is at most 2")
        return 0.25 * xi ** 2 * tau_norm ** 2 * (4.0 - tau_norm ** 2)
    return 0.0


def asymptotic_power(test: str, kind: Regime, xi: float, tau_norm: float,
                     p: int, e2_tilde: Optional[float] = None,
                     alpha: float = 0.05) -> float:
    """Limiting rejection probability of a test against a local alternative.

    ``test`` is ``"watson"`` (noncentral chi-square with p-1 degrees of
    freedom, noncentrality from :func:`watson_noncentrality`) or ``"oracle"``
    (contiguous regime only; noncentral chi-square with p degrees of freedom
    and noncentrality xi^2 ||tau||^2).
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie strictly inside (0, 1)")
    if test == "watson":
        if kind is Regime.STRICT_CONTIGUITY:
            return alpha
        nc = watson_noncentrality(kind, xi, tau_norm, p, e2_tilde)
        crit = specfn.chi2_quantile(1.0 - alpha, p - 1)
        return 1.0 - specfn.noncentral_chi2_cdf(crit, p - 1, nc)
    if test == "oracle":
        if kind is not Regime.UNDER_CONTIGUITY:
            raise DomainError("the oracle test is defined in the contiguous regime")
        crit = specfn.chi2_quantile(1.0 - alpha, p)
        return 1.0 - specfn.noncentral_chi2_cdf(crit, p, xi ** 2 * tau_norm ** 2)
    raise DomainError(f"unknown test {test!r}")


@dataclass(frozen=True)
class SphericalMeanLimit:
    """Limit law of the spherical mean and the rate at which it is approached."""

    law: LimitLaw
    rate: str  # "sqrt_n", "sqrt_n_eta", or "one"


def spherical_mean_limit(kind: Regime, xi: float, p: int,
                         e2_tilde: Optional[float] = None) -> SphericalMeanLimit:
    """Limiting behaviour of the normalized sample mean direction per regime."""
    if kind is Regime.AWAY_FROM_UNIFORMITY:
        if e2_tilde is None:
            raise DomainError("the fixed-signal regime requires e2_tilde")
        slack = 1.0 - xi ** 2 / p - e2_tilde
        if slack <= 0:
            raise DomainError(
                "invalid locality parameters: 1 - xi^2/p - e2_tilde must be positive")
        factor = slack / (xi ** 2 * (1.0 - 1.0 / p))
        return SphericalMeanLimit(TangentGaussian(p, factor), "sqrt_n")
    if kind is Regime.BEYOND_CONTIGUITY:
        return SphericalMeanLimit(TangentGaussian(p, 1.0 / xi ** 2), "sqrt_n_eta")
    if kind is Regime.UNDER_CONTIGUITY:
        return SphericalMeanLimit(ProjectedNormal(p, xi), "one")
    return SphericalMeanLimit(UniformSphere(p), "one")
