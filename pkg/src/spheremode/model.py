"""Rotationally symmetric location-concentration models on the sphere.

A model is the triple (theta, kappa, f): modal location, concentration and
radial function.  The density on the sphere is proportional to
``f(kappa * x'theta)``, so the cosine ``u = X'theta`` has marginal density
``c * (1 - t^2)^((p-3)/2) * f(kappa t)`` on [-1, 1].  All quadratures are
carried out in the colatitude variable (``t = cos(psi)``), where the
integrands are smooth for every ``p >= 2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import geom, specfn
from .errors import DomainError, TargetUnreachable

_VALIDATION_GRID = np.linspace(-1.0, 1.0, 101)
_FD_STEP = 1e-5
_CALIBRATION_TOL = 1e-10
_KAPPA_BRACKET_MAX = 500.0


@dataclass(frozen=True)
class RadialFunction:
    """A monotone radial function with f(0) = f'(0) = 1.

    ``fn`` must accept numpy arrays.  ``max_kappa`` bounds the concentration
    for functions (like the linear one) that lose positivity beyond it.
    Validity is spot-checked on a 101-point grid at construction.
    """

    name: str
    fn: Callable[[np.ndarray], np.ndarray]
    max_kappa: Optional[float] = None

    def __post_init__(self):
        values = np.asarray(self.fn(_VALIDATION_GRID), dtype=float)
        if not np.all(np.isfinite(values)):
            raise DomainError(f"radial function {self.name!r} is not finite on [-1, 1]")
        if np.any(values < -1e-12):
            raise DomainError(f"radial function {self.name!r} takes negative values")
        if np.any(np.diff(values) < -1e-12):
            raise DomainError(f"radial function {self.name!r} is not monotone increasing")
        f0 = float(self.fn(np.array(0.0)))
        if abs(f0 - 1.0) > 1e-12:
            raise DomainError(f"radial function {self.name!r} has f(0) = {f0}, expected 1")
        deriv = float(self.fn(np.array(_FD_STEP)) - self.fn(np.array(-_FD_STEP))) / (2 * _FD_STEP)
        if abs(deriv - 1.0) > 1e-6:
            raise DomainError(f"radial function {self.name!r} has f'(0) = {deriv}, expected 1")

    def __call__(self, t):
        return self.fn(t)


def _logistic(t):
    # 2 e^{2t} / (1 + e^{2t}), written to avoid overflow for large t.
    return 2.0 / (1.0 + np.exp(-2.0 * np.asarray(t, dtype=float)))


_BUILTINS = {
    "fvml": lambda: RadialFunction("fvml", np.exp),
    "linear": lambda: RadialFunction("linear", lambda t: 1.0 + np.asarray(t, dtype=float),
                                     max_kappa=1.0),
    "logistic": lambda: RadialFunction("logistic", _logistic),
}


def radial_function(name: str) -> RadialFunction:
    """Look up a built-in radial function by name (fvml, linear, logistic)."""
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise DomainError(f"unknown radial function {name!r}; "
                          f"choose from {sorted(_BUILTINS)}") from None
    return factory()


@dataclass(frozen=True, eq=False)
class RotSymModel:
    """Distribution on the sphere with density proportional to f(kappa x'theta)."""

    theta: np.ndarray
    kappa: float
    f: RadialFunction

    def __post_init__(self):
        object.__setattr__(self, "theta", geom.check_unit(self.theta, "theta"))
        if self.kappa < 0:
            raise DomainError("concentration kappa must be nonnegative")
        if self.f.max_kappa is not None and self.kappa >= self.f.max_kappa:
            raise DomainError(
                f"kappa = {self.kappa} not allowed for radial function "
                f"{self.f.name!r} (requires kappa < {self.f.max_kappa})")

    @property
    def p(self) -> int:
        return self.theta.size


@dataclass(frozen=True)
class Moments:
    """First two moments of u = X'theta, plus the derived dispersion factor d."""

    e1: float
    e2_tilde: float
    e2: float
    d: float


class Regime(enum.Enum):
    """Asymptotic regime of a concentration sequence kappa_n = sqrt(p) n^-a xi."""

    AWAY_FROM_UNIFORMITY = "away"
    BEYOND_CONTIGUITY = "beyond"
    UNDER_CONTIGUITY = "contiguity"
    STRICT_CONTIGUITY = "strict"


@dataclass(frozen=True)
class RegimeSpec:
    """A regime together with its rate exponent and locality parameters."""

    kind: Regime
    rate_exponent: float
    xi: float
    e2_tilde: Optional[float] = None

    def __post_init__(self):
        if self.xi <= 0:
            raise DomainError("locality parameter xi must be positive")
        if self.rate_exponent < 0:
            raise DomainError("rate exponent must be nonnegative")
        if classify_rate(self.rate_exponent) is not self.kind:
            raise DomainError("regime kind inconsistent with rate exponent")


def classify_rate(rate_exponent: float) -> Regime:
    """Map the decay exponent of the concentration sequence to its regime."""
    if rate_exponent == 0:
        return Regime.AWAY_FROM_UNIFORMITY
    if rate_exponent < 0.5:
        return Regime.BEYOND_CONTIGUITY
    if rate_exponent == 0.5:
        return Regime.UNDER_CONTIGUITY
    return Regime.STRICT_CONTIGUITY


# ---------------------------------------------------------------------------
# Quadrature of the u-marginal
# ---------------------------------------------------------------------------

def _colatitude_integral(model: RotSymModel, moment: int,
                         spec: specfn.QuadratureSpec = specfn.DEFAULT_QUADRATURE) -> float:
    """Integral of cos(psi)^moment f(kappa cos psi) sin(psi)^(p-2) over [0, pi]."""
    p, kappa, f = model.p, model.kappa, model.f

    def integrand(s):
        psi = 0.5 * math.pi * (s + 1.0)
        c = math.cos(psi)
        return (c ** moment) * float(f(np.array(kappa * c))) * math.sin(psi) ** (p - 2)

    return 0.5 * math.pi * specfn.integrate(integrand, spec)


def normalizing_constant(model: RotSymModel) -> float:
    """Normalization constant of the u-marginal: 1 / integral of the raw density."""
    return 1.0 / _colatitude_integral(model, 0)


def marginal_u_density(model: RotSymModel):
    """Normalized density of u = X'theta on [-1, 1] (singular endpoints for p = 2)."""
    c = normalizing_constant(model)
    p, kappa, f = model.p, model.kappa, model.f

    def density(t):
        t = np.asarray(t, dtype=float)
        return c * (1.0 - t ** 2) ** ((p - 3) / 2.0) * f(kappa * t)

    return density


def moments(model: RotSymModel) -> Moments:
    """Moments of u = X'theta by quadrature: e1, variance, raw second moment, d."""
    mass = _colatitude_integral(model, 0)
    e1 = _colatitude_integral(model, 1) / mass
    e2 = _colatitude_integral(model, 2) / mass
    e2_tilde = e2 - e1 * e1
    d = (1.0 - e2) / (1.0 - 1.0 / model.p)
    return Moments(e1=e1, e2_tilde=e2_tilde, e2=e2, d=d)


def _pole_model(p: int, kappa: float, f: RadialFunction) -> RotSymModel:
    theta = np.zeros(p)
    theta[-1] = 1.0
    return RotSymModel(theta=theta, kappa=kappa, f=f)


def mean_cosine(p: int, f: RadialFunction, kappa: float) -> float:
    """e1 as a function of kappa, at the pole location (location-independent)."""
    if kappa == 0.0:
        return 0.0
    return moments(_pole_model(p, kappa, f)).e1


def calibrate_kappa(p: int, f: RadialFunction, target_e1: float) -> float:
    """Concentration kappa whose mean cosine e1 equals ``target_e1``.

    e1 is strictly increasing in kappa, so a bracketing bisection on
    [0, 500] (or up to the radial function's positivity bound) converges;
    iteration stops once |e1(kappa) - target| <= 1e-10.

    Raises
    ------
    TargetUnreachable
        If the target exceeds the supremum of e1 on the search bracket.
    """
    if target_e1 < 0:
        raise TargetUnreachable("target mean cosine must be nonnegative")
    if target_e1 == 0.0:
        return 0.0
    hi = _KAPPA_BRACKET_MAX
    if f.max_kappa is not None:
        hi = f.max_kappa * (1.0 - 1e-12)
    e1_hi = mean_cosine(p, f, hi)
    if target_e1 > e1_hi:
        raise TargetUnreachable(
            f"target e1 = {target_e1} exceeds achievable maximum "
            f"{e1_hi:.6f} on the bracket [0, {hi}]")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        value = mean_cosine(p, f, mid)
        if abs(value - target_e1) <= _CALIBRATION_TOL:
            return mid
        if value < target_e1:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            return 0.5 * (lo + hi)
    return 0.5 * (lo + hi)


def locality_from_kappa(rate_exponent: float, xi: Optional[float] = None, *,
                        p: Optional[int] = None,
                        f: Optional[RadialFunction] = None,
                        kappa: Optional[float] = None) -> RegimeSpec:
    """Regime specification for a concentration sequence kappa_n = sqrt(p) n^-a xi.

    For decaying sequences (``rate_exponent > 0``) pass the locality
    parameter ``xi`` directly.  For a constant sequence (``rate_exponent = 0``)
    pass ``kappa``, ``p`` and ``f`` instead: the locality parameters are then
    read off the model via xi = sqrt(p) e1(kappa) and the actual variance of
    the cosine.
    """
    kind = classify_rate(rate_exponent)
    if kind is Regime.AWAY_FROM_UNIFORMITY:
        if kappa is None or p is None or f is None:
            raise DomainError("the constant-kappa regime requires kappa, p and f")
        mom = moments(_pole_model(p, kappa, f))
        return RegimeSpec(kind=kind, rate_exponent=0.0,
                          xi=math.sqrt(p) * mom.e1, e2_tilde=mom.e2_tilde)
    if xi is None:
        raise DomainError("decaying regimes require the locality parameter xi")
    e2_tilde = 1.0 / p if p is not None else None
    return RegimeSpec(kind=kind, rate_exponent=rate_exponent, xi=xi,
                      e2_tilde=e2_tilde)


# ---------------------------------------------------------------------------
# Local alternatives and the spherical constraint
# ---------------------------------------------------------------------------

_TAU_MAX = np.array([2.0, 0.0, 0.0])


def local_alternative(ell: int, r: int, n: int, theta0: np.ndarray) -> np.ndarray:
    """Alternative location at severity ``r`` for the rate index ``ell`` (p = 3).

    In the frame where ``theta0`` is the north pole: for ``ell`` in {0, 1}
    the location is the normalized perturbation
    ``theta0 + n^(ell/4 - 1/2) (r/6) (2, 0, 0)``; for ``ell`` in {2, 3} it is
    ``(sin(r pi/6), 0, cos(r pi/6))``.  ``r = 0`` always returns ``theta0``.
    """
    theta0 = geom.check_unit(theta0, "theta0")
    if theta0.size != 3:
        raise DomainError("local alternatives are defined for p = 3")
    if not 0 <= ell <= 3:
        raise DomainError("ell must lie in 0..3")
    if not 0 <= r <= 6:
        raise DomainError("r must lie in 0..6")
    if ell <= 1:
        pole_target = np.array([0.0, 0.0, 1.0]) + n ** (ell / 4.0 - 0.5) * (r / 6.0) * _TAU_MAX
        pole_target = geom.normalize(pole_target)
    else:
        angle = r * math.pi / 6.0
        pole_target = np.array([math.sin(angle), 0.0, math.cos(angle)])
    if theta0[2] == 1.0 and theta0[0] == 0.0 and theta0[1] == 0.0:
        return pole_target
    return geom.frame_to(theta0) @ pole_target


def check_spherical_constraint(theta0: np.ndarray, tau: np.ndarray, nu: float,
                               tol: float = 1e-10) -> bool:
    """Whether theta0 + nu*tau stays on the sphere: theta0'tau = -nu ||tau||^2 / 2."""
    theta0 = np.asarray(theta0, dtype=float)
    tau = np.asarray(tau, dtype=float)
    return abs(float(theta0 @ tau) + 0.5 * nu * float(tau @ tau)) <= tol
