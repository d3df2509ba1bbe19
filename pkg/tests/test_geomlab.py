import math

import numpy as np
import pytest

from netlab.errors import DomainError
from netlab.moduli import identity
from netlab.geomlab import (
    AffineMap,
    GridMap,
    RadialBump,
    boundary_neighborhood_measure,
    check_statement1,
    check_statement2,
    default_pi_d,
    identity_map,
    image_volume,
    injectivity_check,
    run_algorithm_b1,
    shear_map,
    symdiff_bound_check,
    two_region_stretch,
    volume_diff_check,
)

M_ID = identity()


class TestMaps:
    def test_affine_roundtrip(self):
        A = AffineMap([[1.2, 0.3], [-0.1, 0.9]], [0.5, -1.0])
        pts = np.random.default_rng(0).normal(size=(20, 2))
        assert np.allclose(A.invert(A(pts)), pts, atol=1e-12)
        assert A.volume_factor() == pytest.approx(abs(np.linalg.det(A.A)))

    def test_shear_is_measure_preserving(self):
        assert shear_map(0.7).volume_factor() == pytest.approx(1.0)

    def test_radial_bump_roundtrip(self):
        bump = RadialBump([0.3, 0.3], 0.2, 1.5)
        pts = np.random.default_rng(1).uniform(-1, 1, size=(50, 2))
        assert np.allclose(bump.invert(bump(pts)), pts, atol=1e-9)

    def test_piecewise_stretch_roundtrip_and_endpoints(self):
        h = two_region_stretch(1.0, 0.3, 0.2, 1.5)
        xs = np.linspace(0, 1, 101)[:, None]
        ys = h(xs)
        assert ys[0, 0] == pytest.approx(0.0)
        assert ys[-1, 0] == pytest.approx(1.0)
        assert np.all(np.diff(ys[:, 0]) > 0)
        assert np.allclose(h.invert(ys), xs, atol=1e-12)

    def test_stretch_window_validated(self):
        with pytest.raises(DomainError):
            two_region_stretch(1.0, 0.9, 0.3, 2.0)

    def test_grid_map_matches_sampled_affine(self):
        A = AffineMap([[1.1, 0.2], [0.0, 0.9]])
        axes = np.linspace(0, 1, 17)
        vals = np.stack(np.meshgrid(axes, axes, indexing="ij"), axis=-1)
        vals = A(vals.reshape(-1, 2)).reshape(17, 17, 2)
        gm = GridMap([(0, 1), (0, 1)], vals)
        pts = np.random.default_rng(2).uniform(0.1, 0.9, size=(10, 2))
        assert np.allclose(gm(pts), A(pts), atol=1e-12)
        inv, failures = gm.invert(A(pts))
        assert failures == 0
        assert np.allclose(inv, pts, atol=1e-6)

    def test_injectivity_check(self):
        assert injectivity_check(identity_map(2), [(0, 1), (0, 1)])

        class Fold:
            def __call__(self, x):
                x = np.atleast_2d(x)
                return np.abs(x - 0.5)

        assert not injectivity_check(Fold(), [(0, 1), (0, 1)])


class TestStatement1:
    def test_identity_full_omega_zero_residual(self):
        rep = check_statement1(identity_map(1), 0.5, 60, 0.1, M_ID, d=1)
        assert rep.omega == list(range(1, 60))
        assert max(rep.margins.values()) <= -rep.threshold + 1e-12
        assert rep.holds

    def test_affine_full_omega(self):
        A = AffineMap([[1.2, 0.3], [-0.1, 0.9]])
        rep = check_statement1(A, 0.5, 10, 0.1, M_ID, test_grid=5, d=2)
        assert len(rep.omega) == 9
        # residual is zero to round-off: margin = -threshold
        worst = max(rep.margins.values()) + rep.threshold
        assert worst <= 1e-12

    def test_slab_one_stretch_excluded(self):
        c, N = 0.5, 10
        h = two_region_stretch(c, 0.0, c / N, 2.0)
        rep = check_statement1(h, c, N, 0.3, M_ID, d=1)
        assert 1 not in rep.omega
        assert rep.margins[1] > 0

    def test_wide_stretch_defeats_statement1(self):
        c = 0.5
        h = two_region_stretch(c, 0.3 * c, 8 * c / 60, 1.15)
        rep = check_statement1(h, c, 60, 0.1, M_ID, d=1)
        assert not rep.holds
        assert len(rep.omega) < 0.9 * 59


class TestStatement2:
    def test_identity_finds_nothing(self):
        res = check_statement2(identity_map(1), 0.5, 10, 8, 0.01, d=1)
        assert res.z is None

    def test_uniform_doubling_finds_nothing(self):
        res = check_statement2(AffineMap([[2.0]]), 0.5, 10, 8, 0.01, d=1)
        assert res.z is None

    def test_localized_stretch_found(self):
        c, N, M = 0.5, 10, 8
        step = c / (N * M)
        h = two_region_stretch(c, 10 * step, step, 2.0)
        res = check_statement2(h, c, N, M, 0.1, d=1)
        assert res.z is not None
        assert res.z[0] == pytest.approx(10 * step, abs=1e-12)
        assert res.margin > 0

    def test_lexicographic_first(self):
        c, N, M = 0.5, 10, 8
        h = two_region_stretch(c, 0.3 * c, 8 * c / 60, 1.15)
        res = check_statement2(h, c, N, M, 1e-5, d=1)
        # 0.3c = 24 * step with step = c/80; first stretched window wins
        assert res.z[0] == pytest.approx(0.3 * c, abs=1e-12)


class TestAlgorithmB1:
    def test_affine_terminates_immediately(self):
        tr = run_algorithm_b1(identity_map(1), 1, M_ID, 0.1, 0.5, max_iters=3)
        assert tr.p == 1 and tr.branch == 1
        assert tr.modulus_bound_ok
        assert len(tr.steps) == 1 and tr.steps[0].statement1.holds

    def test_two_level_stretch_terminates_at_two(self):
        c = 0.5
        h = two_region_stretch(c, 0.3 * c, 8 * c / 60, 1.15)
        tr = run_algorithm_b1(h, 1, M_ID, 0.1, c, max_iters=4)
        assert tr.p == 2 and tr.branch == 1
        assert tr.offsets[1][0] == pytest.approx(0.3 * c, abs=1e-12)
        # the bound check is reported, not fatal: slope 1.15 > 1
        assert not tr.modulus_bound_ok

    def test_recenters_on_declared_lattice(self):
        c = 0.5
        h = two_region_stretch(c, 0.3 * c, 8 * c / 60, 1.15)
        tr = run_algorithm_b1(h, 1, M_ID, 0.1, c, max_iters=4)
        c2 = c / (60 * 40)
        z = tr.offsets[1][0]
        assert abs(z / c2 - round(z / c2)) < 1e-9

    def test_trace_within_r_when_bound_ok(self):
        from netlab.params import compute_r
        tr = run_algorithm_b1(identity_map(1), 1, M_ID, 0.1, 0.5)
        assert tr.modulus_bound_ok
        assert tr.p <= compute_r(1, M_ID, 0.1, 0.5)


class TestImageVolume:
    def test_affine_exact(self):
        A = AffineMap([[1.2, 0.3], [-0.1, 0.9]])
        v = image_volume(A, [(0, 2), (0, 1)], mode="auto")
        assert v.mode == "exact"
        assert v.value == pytest.approx(abs(np.linalg.det(A.A)) * 2.0)
        assert v.lower == v.upper == v.value

    def test_identity_grid_brackets_truth(self):
        v = image_volume(identity_map(2), [(0, 1), (0, 1)], mode="grid",
                         budget=40_000)
        assert v.lower <= 1.0 <= v.upper
        assert v.value == pytest.approx(1.0, rel=0.05)

    def test_shear_montecarlo_matches_determinant(self):
        v = image_volume(shear_map(0.3), [(0, 1), (0, 1)], mode="monte_carlo",
                         budget=100_000)
        assert v.lower <= 1.0 <= v.upper

    def test_grid_bracket_contains_mc(self):
        bump = RadialBump([1.5, 0.5], 0.1, 2.0)
        box = [(0.0, 0.25), (0.0, 0.25)]
        g = image_volume(bump, box, mode="grid", budget=40_000)
        mc = image_volume(bump, box, mode="monte_carlo", budget=200_000)
        assert g.lower <= mc.value <= g.upper

    def test_non_injective_rejected(self):
        class Fold:
            def __call__(self, x):
                return np.abs(np.atleast_2d(x) - 0.5)

            def invert(self, y):
                return np.atleast_2d(y) + 0.5

            def volume_factor(self):
                return None

        with pytest.raises(DomainError):
            image_volume(Fold(), [(0, 1), (0, 1)], mode="monte_carlo", budget=1000)


class TestVolumeDiff:
    def test_affine_zero_lhs(self):
        A = AffineMap([[1.2, 0.3], [-0.1, 0.9]])
        rep = volume_diff_check(A, 1.0, 4, 1, M_ID, 0.5, d=2)
        assert rep.hypothesis_ok
        assert rep.lhs == 0.0
        assert rep.passed

    def test_translation_zero_lhs(self):
        T = AffineMap(np.eye(2), [0.3, -0.7])
        rep = volume_diff_check(T, 1.0, 4, 2, M_ID, 0.5, d=2)
        assert rep.lhs == 0.0 and rep.passed

    def test_radial_bump_within_bound(self):
        bump = RadialBump([1.5, 0.5], 0.1, 2.0)
        rep = volume_diff_check(bump, 1.0, 4, 1, M_ID, 0.5, d=2,
                                mode="monte_carlo", budget=200_000)
        assert rep.hypothesis_ok
        assert rep.passed
        assert rep.lhs <= rep.rhs + rep.lhs_error

    def test_hypothesis_violation_is_not_failure(self):
        # a harsh stretch with a tiny eps: slab 1 fails the hypothesis
        h = two_region_stretch(1.0, 0.0, 0.25, 1.8, d=2)
        rep = volume_diff_check(h, 1.0, 4, 1, M_ID, 0.001, d=2,
                                mode="monte_carlo", budget=20_000)
        assert not rep.hypothesis_ok
        assert rep.passed is None

    def test_default_pi_d(self):
        assert default_pi_d(2) == pytest.approx(8.0)
        assert default_pi_d(3) == pytest.approx(8.0 * 3 ** 1.5)


class TestSymdiff:
    def test_equal_maps_empty_difference(self):
        f = identity_map(2)
        rep = symdiff_bound_check(f, f, grid_res=64)
        assert rep.cells_checked == 0 and rep.violations == 0

    def test_translation_within_norm(self):
        f = identity_map(2)
        g = AffineMap(np.eye(2), [0.05, -0.02])
        rep = symdiff_bound_check(f, g, grid_res=64)
        assert rep.violations == 0
        assert rep.sup_distance == pytest.approx(math.hypot(0.05, 0.02))

    @pytest.mark.parametrize("res", [64, 128])
    def test_sheared_map_no_violations(self, res):
        rep = symdiff_bound_check(identity_map(2), shear_map(0.05), grid_res=res)
        assert rep.violations == 0

    @pytest.mark.parametrize("res", [64, 128])
    def test_radial_bump_no_violations(self, res):
        bump = RadialBump([0.5, 0.5], 0.05, 1.0)
        rep = symdiff_bound_check(identity_map(2), bump, grid_res=res)
        assert rep.violations == 0


class TestBoundaryMeasure:
    def test_identity_matches_closed_form(self):
        # outer collar 4 eps + pi eps^2, inner band 4 eps - 4 eps^2
        rows = boundary_neighborhood_measure(identity_map(2), [0.1, 0.05, 0.02],
                                             grid_res=256)
        for row in rows:
            exact = 8 * row.eps + (math.pi - 4) * row.eps ** 2
            assert abs(row.measure - exact) <= row.raster_slack

    def test_monotone_in_eps(self):
        rows = boundary_neighborhood_measure(identity_map(2),
                                             [0.1, 0.05, 0.025, 0.0125],
                                             grid_res=128)
        for a, b in zip(rows, rows[1:]):
            assert b.measure <= a.measure

    def test_parallelogram_closed_form(self):
        s = 0.4
        f = shear_map(s)
        rows = boundary_neighborhood_measure(f, [0.08, 0.04], grid_res=256)
        sin_theta = 1.0 / math.sqrt(1 + s * s)
        perimeter = 2.0 * (1.0 + math.sqrt(1 + s * s))
        for row in rows:
            exact = (perimeter * row.eps + math.pi * row.eps ** 2
                     + perimeter * row.eps - (4.0 / sin_theta) * row.eps ** 2)
            assert abs(row.measure - exact) <= row.raster_slack
