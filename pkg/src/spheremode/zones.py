"""Confidence zones by test inversion on spherical grids.

A zone is the set of grid locations at which the chosen test does not
reject.  Membership uses the non-strict rule ``statistic <= critical value``
(the complement of strict rejection) and grid points where the statistic is
degenerate are kept in the zone, erring toward coverage.  Both statistics
are even functions of the location, so zones are antipodally symmetric by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
from scipy.spatial import cKDTree

from . import geom, specfn
from .errors import DegenerateMean, DomainError
from .stats import Sample, spherical_mean

_DEGENERACY_TOL = 1e-12
_KNN_P3 = 6


@dataclass
class ConfidenceZone:
    grid: np.ndarray
    member: np.ndarray
    level: float
    test_name: str
    components: List[np.ndarray]
    preferred: np.ndarray


def _grid_statistics(sample: Sample, grid: np.ndarray, test: str):
    """Vectorized statistic over grid locations, plus the degeneracy mask."""
    n, p = sample.n, sample.p
    mean = sample.mean
    second_moment = sample.points.T @ sample.points / n
    u = grid @ mean
    q = np.einsum("ij,jk,ik->i", grid, second_moment, grid)
    denom = 1.0 - q
    degenerate = denom <= _DEGENERACY_TOL
    safe = np.where(degenerate, 1.0, denom)
    if test == "watson":
        values = n * (p - 1) * (float(mean @ mean) - u ** 2) / safe
    elif test == "wald":
        theta_hat = spherical_mean(sample)
        w = grid @ theta_hat
        values = n * (p - 1) * u ** 2 * (1.0 - w ** 2) / safe
    else:
        raise DomainError(f"unknown test {test!r}; choose 'watson' or 'wald'")
    return values, degenerate


def invert_test(sample: Sample, test: str, level: float = 0.95,
                resolution: int = 20000) -> ConfidenceZone:
    """Confidence zone for the modal location at the given confidence level.

    Evaluates the location-parameterized statistic on a deterministic grid
    and keeps the locations where it does not exceed the chi-square critical
    value with p-1 degrees of freedom.

    Raises
    ------
    DegenerateMean
        For the spherical-mean (wald) inversion when the sample mean vanishes.
    """
    if not 0.0 < level < 1.0:
        raise DomainError("confidence level must lie strictly inside (0, 1)")
    grid = geom.sphere_grid(sample.p, resolution)
    values, degenerate = _grid_statistics(sample, grid, test)
    crit = specfn.chi2_quantile(level, sample.p - 1)
    member = (values <= crit) | degenerate
    zone = ConfidenceZone(grid=grid, member=member, level=level,
                          test_name=test, components=[], preferred=np.empty(0, dtype=int))
    zone.components = connected_components(zone)
    try:
        theta_hat = spherical_mean(sample)
    except DegenerateMean:
        if test == "wald":
            raise
        theta_hat = None
    if theta_hat is not None:
        zone.preferred = preferred_component(zone, theta_hat)
    return zone


class _UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, i):
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, i, j):
        ri, rj = self.find(i), self.find(j)
        if ri != rj:
            self.parent[max(ri, rj)] = min(ri, rj)


def connected_components(zone: ConfidenceZone) -> List[np.ndarray]:
    """Member components under k-nearest-neighbour adjacency on the grid.

    k = 6 for the spherical Fibonacci grids, ring adjacency for p = 2.
    Components are returned as sorted index arrays, ordered by their
    smallest grid index.
    """
    member_idx = np.flatnonzero(zone.member)
    if member_idx.size == 0:
        return []
    total = zone.grid.shape[0]
    position = -np.ones(total, dtype=int)
    position[member_idx] = np.arange(member_idx.size)
    uf = _UnionFind(member_idx.size)
    if zone.grid.shape[1] == 2:
        for pos, i in enumerate(member_idx):
            for j in ((i - 1) % total, (i + 1) % total):
                if position[j] >= 0:
                    uf.union(pos, position[j])
    else:
        tree = cKDTree(zone.grid)
        _, neighbors = tree.query(zone.grid[member_idx], k=_KNN_P3 + 1)
        for pos in range(member_idx.size):
            for j in neighbors[pos, 1:]:
                if position[j] >= 0:
                    uf.union(pos, position[j])
    roots = {}
    for pos, i in enumerate(member_idx):
        roots.setdefault(uf.find(pos), []).append(i)
    components = [np.asarray(sorted(v)) for v in roots.values()]
    components.sort(key=lambda c: int(c[0]))
    return components


def preferred_component(zone: ConfidenceZone, theta_hat: np.ndarray) -> np.ndarray:
    """Union of member components whose majority lies in the hemisphere of theta_hat.

    Components straddling the equator of theta_hat count as preferred when
    strictly more than half of their points satisfy theta'theta_hat > 0.
    """
    chosen = []
    for component in zone.components:
        inside = int(np.count_nonzero(zone.grid[component] @ theta_hat > 0.0))
        if 2 * inside > component.size:
            chosen.append(component)
    if not chosen:
        return np.empty(0, dtype=int)
    return np.concatenate(chosen)


def zone_area_fraction(zone: ConfidenceZone) -> float:
    """Fraction of grid points in the zone (the grids are close to equal-area)."""
    return float(np.count_nonzero(zone.member)) / zone.member.size


def write_zone_csv(zone: ConfidenceZone, path) -> None:
    """Export a p = 3 zone: theta_x,theta_y,theta_z,member,component_id,preferred."""
    if zone.grid.shape[1] != 3:
        raise DomainError("zone export is defined for p = 3 grids")
    component_id = -np.ones(zone.grid.shape[0], dtype=int)
    for cid, component in enumerate(zone.components):
        component_id[component] = cid
    preferred = np.zeros(zone.grid.shape[0], dtype=int)
    preferred[zone.preferred] = 1
    lines = ["theta_x,theta_y,theta_z,member,component_id,preferred"]
    for i, point in enumerate(zone.grid):
        lines.append(f"{point[0]:.10g},{point[1]:.10g},{point[2]:.10g},"
                     f"{int(zone.member[i])},{component_id[i]},{preferred[i]}")
    Path(path).write_text("\n".join(lines) + "\n")
