"""Confidence zones: symmetry, inclusion guarantees, components, coverage."""

import math
from pathlib import Path

import numpy as np
import pytest

from spheremode import geom, limits, model, sampling, specfn, stats, zones
from spheremode.errors import DegenerateMean, DomainError

POLE = np.array([0.0, 0.0, 1.0])
DATA = Path(__file__).resolve().parent.parent / "data" / "cosmic_ray_standin.csv"


def fvml_sample(kappa, n, labels, theta=POLE):
    return stats.Sample(sampling.sample_fvml(theta, kappa, n,
                                             sampling.derive_stream(777, labels)))


@pytest.fixture(scope="module")
def weak_sample():
    # Mirrors the shipped stand-in data: weak-signal regime, moderate n.
    kappa = model.calibrate_kappa(3, model.radial_function("fvml"), 0.2)
    return fvml_sample(kappa, 148, [1])


@pytest.fixture(scope="module")
def watson_zone(weak_sample):
    return zones.invert_test(weak_sample, "watson", level=0.95, resolution=4000)


@pytest.fixture(scope="module")
def wald_zone(weak_sample):
    return zones.invert_test(weak_sample, "wald", level=0.95, resolution=4000)


class TestMembership:
    def test_antipodal_symmetry_exact(self, watson_zone, wald_zone):
        half = watson_zone.grid.shape[0] // 2
        for zone in (watson_zone, wald_zone):
            np.testing.assert_array_equal(zone.member[:half], zone.member[half:])

    def test_point_estimate_in_watson_zone(self, weak_sample, watson_zone):
        theta_hat = stats.spherical_mean(weak_sample)
        assert stats.watson_statistic(weak_sample, theta_hat) == pytest.approx(
            0.0, abs=1e-10)
        nearest = int(np.argmax(watson_zone.grid @ theta_hat))
        assert watson_zone.member[nearest]

    def test_great_circle_in_wald_zone(self, weak_sample, wald_zone):
        theta_hat = stats.spherical_mean(weak_sample)
        tangent = geom.normalize(geom.project_tangent([1.0, 0.0, 0.0], theta_hat))
        # Exactly zero when the cosine is an exact float zero; otherwise the
        # squared rounding residual (~1e-33) is far inside the zone anyway.
        assert stats.wald_statistic(weak_sample, tangent) < 1e-25
        axis_sample = stats.Sample(np.array([[0.6, 0.0, 0.8], [-0.6, 0.0, 0.8]]))
        assert stats.wald_statistic(axis_sample, np.array([0.0, 1.0, 0.0])) == 0.0
        cosines = np.abs(wald_zone.grid @ theta_hat)
        near_circle = np.flatnonzero(cosines < 0.02)
        assert near_circle.size > 0
        assert wald_zone.member[near_circle].all()

    def test_wald_zone_larger(self, watson_zone, wald_zone):
        assert (zones.zone_area_fraction(wald_zone)
                > zones.zone_area_fraction(watson_zone))

    def test_nesting_across_levels(self, weak_sample):
        lo = zones.invert_test(weak_sample, "watson", level=0.95, resolution=2000)
        hi = zones.invert_test(weak_sample, "watson", level=0.99, resolution=2000)
        assert np.all(hi.member[lo.member])

    def test_level_validation(self, weak_sample):
        with pytest.raises(DomainError):
            zones.invert_test(weak_sample, "watson", level=1.2)

    def test_unknown_test(self, weak_sample):
        with pytest.raises(DomainError):
            zones.invert_test(weak_sample, "median")

    def test_wald_requires_mean(self):
        sample = stats.Sample(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]))
        with pytest.raises(DegenerateMean):
            zones.invert_test(sample, "wald", resolution=100)


def synthetic_zone(member_mask, grid):
    return zones.ConfidenceZone(grid=grid, member=member_mask, level=0.95,
                                test_name="watson", components=[],
                                preferred=np.empty(0, dtype=int))


class TestComponents:
    def test_full_sphere_single_component(self):
        grid = geom.sphere_grid(3, 500)
        zone = synthetic_zone(np.ones(grid.shape[0], dtype=bool), grid)
        comps = zones.connected_components(zone)
        assert len(comps) == 1
        assert comps[0].size == grid.shape[0]

    def test_two_antipodal_caps(self):
        grid = geom.sphere_grid(3, 2000)
        member = np.abs(grid @ POLE) > 0.9
        comps = zones.connected_components(synthetic_zone(member, grid))
        assert len(comps) == 2

    def test_empty(self):
        grid = geom.sphere_grid(3, 500)
        assert zones.connected_components(
            synthetic_zone(np.zeros(grid.shape[0], dtype=bool), grid)) == []

    def test_p2_ring_components(self):
        grid = geom.sphere_grid(2, 40)
        member = np.zeros(40, dtype=bool)
        member[(0, 1, 2, 20, 21, 22), ] = True
        comps = zones.connected_components(synthetic_zone(member, grid))
        assert len(comps) == 2

    def test_concentrated_wald_zone_has_caps_and_band(self):
        sample = fvml_sample(10.0, 100, [2])
        zone = zones.invert_test(sample, "wald", level=0.95, resolution=4000)
        assert len(zone.components) >= 3


class TestPreferredComponent:
    def test_cap_selection(self):
        grid = geom.sphere_grid(3, 2000)
        member = np.abs(grid @ POLE) > 0.9
        zone = synthetic_zone(member, grid)
        zone.components = zones.connected_components(zone)
        preferred = zones.preferred_component(zone, POLE)
        assert preferred.size > 0
        assert np.all(grid[preferred] @ POLE > 0.8)

    def test_empty_zone(self):
        grid = geom.sphere_grid(3, 500)
        zone = synthetic_zone(np.zeros(grid.shape[0], dtype=bool), grid)
        zone.components = []
        assert zones.preferred_component(zone, POLE).size == 0

    def test_majority_rule_on_straddling_band(self):
        grid = geom.sphere_grid(3, 4000)
        z = grid @ POLE
        # Band tilted into the positive hemisphere: majority above the equator.
        band_up = (z > -0.05) & (z < 0.25)
        zone = synthetic_zone(band_up, grid)
        zone.components = zones.connected_components(zone)
        assert zones.preferred_component(zone, POLE).size > 0
        band_down = (z > -0.25) & (z < 0.05)
        zone = synthetic_zone(band_down, grid)
        zone.components = zones.connected_components(zone)
        assert zones.preferred_component(zone, POLE).size == 0


class TestAreaFraction:
    def test_extremes(self):
        grid = geom.sphere_grid(3, 500)
        full = synthetic_zone(np.ones(grid.shape[0], dtype=bool), grid)
        empty = synthetic_zone(np.zeros(grid.shape[0], dtype=bool), grid)
        assert zones.zone_area_fraction(full) == 1.0
        assert zones.zone_area_fraction(empty) == 0.0


class TestCoverage:
    def test_watson_coverage_contiguous(self):
        # Zone coverage equals acceptance of the true location by the test.
        n, reps = 200, 2000
        kappa = model.calibrate_kappa(3, model.radial_function("fvml"),
                                      1.0 / math.sqrt(3 * n))
        crit = specfn.chi2_quantile(0.95, 2)
        hits = 0
        for rep in range(reps):
            sample = fvml_sample(kappa, n, [3, rep])
            hits += stats.watson_statistic(sample, POLE) <= crit
        coverage = hits / reps
        stderr = math.sqrt(0.95 * 0.05 / reps)
        assert coverage >= 0.95 - 3 * stderr

    def test_wald_conservative_in_strict_regime(self):
        n, reps = 200, 2000
        e1 = n ** (-0.75) / math.sqrt(3)
        kappa = model.calibrate_kappa(3, model.radial_function("fvml"), e1)
        crit = specfn.chi2_quantile(0.95, 2)
        hits = 0
        for rep in range(reps):
            sample = fvml_sample(kappa, n, [4, rep])
            hits += stats.wald_statistic(sample, POLE) <= crit
        assert hits / reps > 0.97


class TestZoneCsv:
    def test_export_schema(self, wald_zone, tmp_path):
        path = tmp_path / "zone.csv"
        zones.write_zone_csv(wald_zone, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "theta_x,theta_y,theta_z,member,component_id,preferred"
        assert len(lines) == 1 + wald_zone.grid.shape[0]
        fields = lines[1].split(",")
        assert len(fields) == 6
        assert fields[3] in ("0", "1") and fields[5] in ("0", "1")

    def test_standin_dataset_loads(self):
        from spheremode import dataio
        sample = dataio.load_sample(dataio.DatasetSpec(str(DATA)))
        assert sample.n == 148 and sample.p == 3
