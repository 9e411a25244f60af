import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from spatialcrt.gaussian import chol_factor
from spatialcrt.geometry import (
    KernelFamily,
    KernelSpec,
    corr_matrix,
    exponential_corr,
    grid_layout,
    matern_corr,
    pairwise_distances,
    sample_locations,
)

MAX_DIAG = 3 * math.sqrt(2.0)


class TestGridLayout:
    def test_4x4_unit_grid(self):
        regions = grid_layout(4, 4, 1.0)
        assert regions.n_clusters == 16
        expected = {(c + 0.5, r + 0.5) for r in range(4) for c in range(4)}
        assert {tuple(p) for p in regions.centers} == expected
        assert regions.max_center_distance() == pytest.approx(MAX_DIAG, abs=1e-12)

    def test_row_major_order(self):
        regions = grid_layout(2, 3, 1.0)
        assert tuple(regions.centers[0]) == (0.5, 0.5)
        assert tuple(regions.centers[1]) == (1.5, 0.5)
        assert tuple(regions.centers[3]) == (0.5, 1.5)

    def test_single_cell(self):
        regions = grid_layout(1, 1, 1.0)
        assert tuple(regions.centers[0]) == (0.5, 0.5)

    def test_2x2_diagonal(self):
        assert grid_layout(2, 2, 1.0).max_center_distance() == pytest.approx(math.sqrt(2))

    def test_centers_at_cell_midpoints_and_tiling(self):
        regions = grid_layout(3, 5, 0.7)
        mids = 0.5 * (regions.bounds[:, :2] + regions.bounds[:, 2:])
        assert np.allclose(mids, regions.centers)
        # cells tile the domain: total area matches and no two cells overlap
        areas = np.prod(regions.bounds[:, 2:] - regions.bounds[:, :2], axis=1)
        assert np.sum(areas) == pytest.approx(3 * 5 * 0.7 ** 2)
        assert regions.bounds[:, 2].max() == pytest.approx(5 * 0.7)
        assert regions.bounds[:, 3].max() == pytest.approx(3 * 0.7)

    @pytest.mark.parametrize("rows,cols,cell", [(0, 4, 1.0), (4, 0, 1.0), (4, 4, 0.0), (4, 4, -1.0)])
    def test_invalid_arguments(self, rows, cols, cell):
        with pytest.raises(ValueError):
            grid_layout(rows, cols, cell)


class TestSampleLocations:
    def test_single_point_containment(self, rng):
        pts = sample_locations(grid_layout(1, 1, 1.0), 1, rng)
        assert pts.shape == (1, 2)
        assert np.all((pts >= 0) & (pts <= 1))

    def test_every_point_in_own_cell(self, rng):
        regions = grid_layout(4, 4, 1.0)
        pts = sample_locations(regions, 40, rng)
        assert pts.shape == (640, 2)
        for c in range(16):
            cell = pts[c * 40:(c + 1) * 40]
            xmin, ymin, xmax, ymax = regions.bounds[c]
            assert np.all((cell[:, 0] >= xmin) & (cell[:, 0] <= xmax))
            assert np.all((cell[:, 1] >= ymin) & (cell[:, 1] <= ymax))

    def test_uniform_mean_over_many_draws(self, rng):
        # law of large numbers: cell (0,0) sample mean approaches its center
        regions = grid_layout(4, 4, 1.0)
        draws = np.vstack([sample_locations(regions, 40, rng)[:40] for _ in range(300)])
        assert draws.shape[0] == 12000
        assert np.allclose(draws.mean(axis=0), [0.5, 0.5], atol=0.01)

    def test_invalid_m(self, rng):
        with pytest.raises(ValueError):
            sample_locations(grid_layout(1, 1, 1.0), 0, rng)


class TestExponentialCorr:
    def test_zero_distance(self):
        assert exponential_corr(0.0, 1.5) == 1.0

    def test_paper_anchor_phi_short(self):
        assert exponential_corr(MAX_DIAG, 1.5) == pytest.approx(0.059, abs=5e-4)

    def test_paper_anchor_phi_long(self):
        # the printed 0.297 truncates exp(-3*sqrt(2)/3.5) = 0.29755
        assert exponential_corr(MAX_DIAG, 3.5) == pytest.approx(0.297, abs=1e-3)

    def test_invalid_phi(self):
        with pytest.raises(ValueError):
            exponential_corr(1.0, 0.0)

    def test_strictly_decreasing(self):
        d = np.linspace(0, 10, 101)
        vals = exponential_corr(d, 2.0)
        assert np.all(np.diff(vals) < 0)


class TestMaternCorr:
    def test_zero_distance_continuity(self):
        assert matern_corr(0.0, 1.0, 1.5) == 1.0

    def test_nu_half_reduces_to_exponential(self):
        d = np.linspace(0.0, 10.0, 201)
        for phi in (0.5, 1.5, 3.5):
            assert np.allclose(matern_corr(d, phi, 0.5), exponential_corr(d, phi),
                               atol=1e-12, rtol=0)

    @pytest.mark.parametrize("nu,d,phi", [(1.5, 1.0, 1.0), (1.5, 2.0, 2.0),
                                          (2.5, 0.7, 1.3), (0.8, 1.1, 0.9)])
    def test_against_bessel_quadrature_oracle(self, nu, d, phi):
        # K_nu(x) = integral_0^inf exp(-x cosh t) cosh(nu t) dt
        x = d / phi
        k_nu, err = quad(lambda t: math.exp(-x * math.cosh(t)) * math.cosh(nu * t),
                         0, 30, limit=400, epsabs=1e-13, epsrel=1e-13)
        assert err < 1e-10
        expected = (2.0 ** (1.0 - nu) / math.gamma(nu)) * x ** nu * k_nu
        assert matern_corr(d, phi, nu) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("phi,nu", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -0.5)])
    def test_invalid_parameters(self, phi, nu):
        with pytest.raises(ValueError):
            matern_corr(1.0, phi, nu)

    def test_monotone_nonincreasing(self):
        d = np.linspace(0, 8, 81)
        for nu in (0.5, 1.5, 2.5):
            vals = matern_corr(d, 1.7, nu)
            assert np.all(np.diff(vals) <= 1e-15)


class TestCorrMatrix:
    def test_single_location(self):
        H = corr_matrix(np.array([[0.3, 0.4]]), KernelSpec(phi=1.0))
        assert H.shape == (1, 1)
        assert H[0, 0] == 1.0

    def test_two_points_at_max_diagonal(self):
        pts = np.array([[0.5, 0.5], [3.5, 3.5]])
        H = corr_matrix(pts, KernelSpec(phi=3.5))
        assert H[0, 1] == pytest.approx(0.297, abs=1e-3)
        assert H[1, 0] == H[0, 1]

    @pytest.mark.parametrize("family,nu", [(KernelFamily.EXPONENTIAL, 0.5),
                                           (KernelFamily.MATERN, 1.5)])
    def test_elementwise_loop_oracle(self, rng, family, nu):
        pts = rng.uniform(0, 4, size=(10, 2))
        kernel = KernelSpec(family=family, phi=1.8, nu=nu)
        H = corr_matrix(pts, kernel)
        for p in range(10):
            for q in range(10):
                d = math.dist(pts[p], pts[q])
                assert H[p, q] == pytest.approx(float(kernel.corr(d)), abs=1e-12)

    def test_duplicate_locations_allowed(self):
        pts = np.array([[1.0, 1.0], [1.0, 1.0]])
        H = corr_matrix(pts, KernelSpec(phi=2.0))
        assert np.allclose(H, 1.0)

    @given(st.integers(min_value=2, max_value=25), st.sampled_from([0.5, 1.5, 3.5]),
           st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_symmetric_unit_diagonal_and_nugget_pd(self, n, phi, seed):
        pts = np.random.default_rng(seed).uniform(0, 4, size=(n, 2))
        H = corr_matrix(pts, KernelSpec(phi=phi))
        assert np.allclose(H, H.T)
        assert np.allclose(np.diag(H), 1.0)
        # a positive nugget restores positive definiteness
        chol_factor(H + 0.25 * np.eye(n))

    def test_empty_locations(self):
        with pytest.raises(ValueError):
            corr_matrix(np.empty((0, 2)), KernelSpec(phi=1.0))


def test_pairwise_distances_matches_math_dist(rng):
    pts = rng.normal(size=(7, 2))
    D = pairwise_distances(pts)
    for i in range(7):
        for j in range(7):
            assert D[i, j] == pytest.approx(math.dist(pts[i], pts[j]), abs=1e-12)
