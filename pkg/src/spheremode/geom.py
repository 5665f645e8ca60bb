"""Unit-sphere geometry: normalization, tangent-normal splits, frames, grids.

Unit vectors are plain float ``numpy`` arrays of shape ``(p,)`` with
``p >= 2``; :func:`normalize` is the canonical constructor and
:func:`check_unit` the validator used at API boundaries.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .errors import UnsupportedDimension, ZeroVector

UnitVector = np.ndarray

_UNIT_TOL = 1e-12
_ZERO_NORM = 1e-300


class TangentNormalParts(NamedTuple):
    """Decomposition x = u*theta + v*s with s a unit tangent (or zero at the poles)."""

    u: float
    v: float
    s: np.ndarray


def normalize(x) -> UnitVector:
    """Return x / ||x|| as a float array.

    Raises
    ------
    ZeroVector
        If the norm of ``x`` is numerically zero.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise UnsupportedDimension("expected a vector of dimension >= 2")
    norm = float(np.linalg.norm(x))
    if norm <= _ZERO_NORM:
        raise ZeroVector("cannot normalize a vector of zero norm")
    return x / norm


def is_unit(x, tol: float = _UNIT_TOL) -> bool:
    return abs(float(np.linalg.norm(np.asarray(x, dtype=float))) - 1.0) <= tol


def check_unit(x, name: str = "vector") -> UnitVector:
    x = np.asarray(x, dtype=float)
    if not is_unit(x):
        raise ZeroVector(f"{name} is not of unit length")
    return x


def tangent_normal(x: UnitVector, theta: UnitVector) -> TangentNormalParts:
    """Split ``x`` into its component along ``theta`` and a unit tangent.

    Returns ``(u, v, s)`` with ``u = x'theta``, ``v = sqrt(1 - u^2)`` and
    ``s = (x - u*theta)/||x - u*theta||``.  At ``x = +-theta`` the tangent
    part vanishes and ``s`` is the zero vector by convention.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if x.shape != theta.shape:
        raise UnsupportedDimension("x and theta must share the same dimension")
    u = float(x @ theta)
    u = max(-1.0, min(1.0, u))
    residual = x - u * theta
    res_norm = float(np.linalg.norm(residual))
    if res_norm <= _UNIT_TOL:
        return TangentNormalParts(u=1.0 if u >= 0 else -1.0, v=0.0,
                                  s=np.zeros_like(x))
    v = math.sqrt(max(0.0, 1.0 - u * u))
    return TangentNormalParts(u=u, v=v, s=residual / res_norm)


def reconstruct(parts: TangentNormalParts, theta: UnitVector) -> np.ndarray:
    """Inverse of :func:`tangent_normal`."""
    return parts.u * np.asarray(theta, dtype=float) + parts.v * parts.s


def project_tangent(x, theta: UnitVector) -> np.ndarray:
    """Project ``x`` onto the tangent space of the sphere at ``theta``.

    Computes ``(I - theta theta') x``; the result is orthogonal to ``theta``.
    """
    x = np.asarray(x, dtype=float)
    theta = np.asarray(theta, dtype=float)
    return x - (x @ theta) * theta


def frame_to(theta: UnitVector) -> np.ndarray:
    """Orthogonal matrix O with O e_p = theta and det(O) = +1.

    Built from the Householder reflection swapping ``e_p`` and ``theta``,
    with the first column negated to restore a positive determinant; both
    steps are branch-free in floating point, so the frame is deterministic.
    """
    theta = np.asarray(theta, dtype=float)
    p = theta.size
    e_last = np.zeros(p)
    e_last[-1] = 1.0
    v = theta - e_last
    vnorm2 = float(v @ v)
    if vnorm2 <= _UNIT_TOL:
        return np.eye(p)
    frame = np.eye(p) - 2.0 * np.outer(v, v) / vnorm2
    frame[:, 0] = -frame[:, 0]
    return frame


def sphere_grid(p: int, resolution: int) -> np.ndarray:
    """Deterministic quasi-uniform grid on the sphere, as a (resolution, p) array.

    For ``p = 2`` the grid is ``resolution`` equally spaced angles.  For
    ``p = 3`` it is a Fibonacci lattice arranged in antipodal pairs: the
    first half of the rows are lattice points, the second half their
    antipodes (one extra pole point when ``resolution`` is odd), so that
    membership masks evaluated on the grid can be checked for exact
    antipodal symmetry.
    """
    if p > 3 or p < 2:
        raise UnsupportedDimension("grids are only generated for p in {2, 3}")
    if resolution < (4 if p == 2 else 8):
        raise UnsupportedDimension("grid resolution too small")
    if p == 2:
        angles = 2.0 * np.pi * np.arange(resolution) / resolution
        return np.column_stack([np.cos(angles), np.sin(angles)])
    half = resolution // 2
    i = np.arange(half)
    z = -1.0 + (2.0 * i + 1.0) / half
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    golden = np.pi * (3.0 - math.sqrt(5.0))
    phi = golden * i
    pts = np.column_stack([r * np.cos(phi), r * np.sin(phi), z])
    grid = np.vstack([pts, -pts])
    if resolution % 2 == 1:
        grid = np.vstack([grid, [[0.0, 0.0, 1.0]]])
    return grid
