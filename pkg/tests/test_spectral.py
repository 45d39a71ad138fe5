"""Core spectral operator checks: exactness, projections, dealiasing."""

import numpy as np
import pytest

from elwave.spectral import (
    Grid,
    SpectralError,
    dealias_truncate,
    divergence,
    gradient,
    inner,
    l2_norm,
    leray_project,
    max_relative_divergence,
    spectral_derivative,
    spectral_l2_norm,
    to_physical,
    to_spectral,
)


def random_band_limited(grid, rng, frac=0.5):
    """Random real field with modes only inside frac * Nyquist."""
    f = rng.standard_normal(grid.shape)
    fh = to_spectral(grid, f)
    cutoff = frac * grid.n / 2
    keep = np.ones(grid.spectral_shape, dtype=bool)
    for a in range(grid.dim):
        keep &= np.abs(grid._axis_modes(a)) <= cutoff
    return to_physical(grid, keep * fh)


@pytest.fixture
def grid3():
    return Grid(dim=3, n=16, length=2 * np.pi)


@pytest.fixture
def grid2():
    return Grid(dim=2, n=32, length=2 * np.pi)


class TestGrid:
    def test_validation(self):
        with pytest.raises(SpectralError):
            Grid(dim=4, n=16, length=1.0)
        with pytest.raises(SpectralError):
            Grid(dim=2, n=15, length=1.0)
        with pytest.raises(SpectralError):
            Grid(dim=2, n=16, length=-1.0)
        with pytest.raises(SpectralError):
            Grid(dim=2, n=16, length=1.0, dealias_fraction=0.0)

    def test_wavenumbers_integer_times_base(self):
        g = Grid(dim=1, n=8, length=4.0)
        k = np.ravel(g.k_full[0]) / (2 * np.pi / 4.0)
        assert np.allclose(sorted(k), [0, 1, 2, 3, 4])  # rfft half spectrum
        kd = np.ravel(g.k[0]) / (2 * np.pi / 4.0)
        assert np.allclose(sorted(kd), [0, 0, 1, 2, 3])  # Nyquist zeroed

    def test_coordinates_centered(self, grid3):
        assert np.isclose(grid3.x[0].min(), -np.pi)
        assert grid3.x[0].max() < np.pi
        assert np.isclose(grid3.r.min(), 0.0)

    def test_roundtrip(self, grid3):
        rng = np.random.default_rng(0)
        f = rng.standard_normal(grid3.shape)
        back = to_physical(grid3, to_spectral(grid3, f))
        assert np.max(np.abs(back - f)) <= 1e-12 * np.max(np.abs(f))


class TestDerivative:
    def test_eigenfunction(self):
        g = Grid(dim=2, n=32, length=5.0)
        f = np.sin(2 * np.pi * (g.x[0] + 2.5) / 5.0) * np.ones(g.shape)
        df = spectral_derivative(g, f, axis=0)
        expected = (2 * np.pi / 5.0) * np.cos(2 * np.pi * (g.x[0] + 2.5) / 5.0) * np.ones(g.shape)
        assert np.max(np.abs(df - expected)) < 1e-12

    def test_constant_field(self, grid3):
        f = np.full(grid3.shape, 3.7)
        for axis in range(3):
            assert np.max(np.abs(spectral_derivative(grid3, f, axis))) < 1e-12
        assert np.max(np.abs(spectral_derivative(grid3, f, 0, order=3))) < 1e-12

    def test_mixed_partials_commute(self, grid3):
        rng = np.random.default_rng(1)
        f = random_band_limited(grid3, rng)
        d12 = spectral_derivative(grid3, spectral_derivative(grid3, f, 0), 1)
        d21 = spectral_derivative(grid3, spectral_derivative(grid3, f, 1), 0)
        assert np.max(np.abs(d12 - d21)) < 1e-12 * max(1.0, np.max(np.abs(d12)))

    def test_axis_out_of_range(self, grid2):
        with pytest.raises(SpectralError):
            spectral_derivative(grid2, np.zeros(grid2.shape), axis=2)

    def test_linear_in_field(self, grid2):
        rng = np.random.default_rng(2)
        f = random_band_limited(grid2, rng)
        g = random_band_limited(grid2, rng)
        lhs = spectral_derivative(grid2, 2.0 * f + g, 0)
        rhs = 2.0 * spectral_derivative(grid2, f, 0) + spectral_derivative(grid2, g, 0)
        assert np.allclose(lhs, rhs, atol=1e-12)


class TestLeray:
    def test_gradient_killed(self, grid2):
        phi = np.sin(grid2.x[0]) * np.sin(grid2.x[1])
        grad = gradient(grid2, phi)
        assert np.max(np.abs(leray_project(grid2, grad))) < 1e-12

    def test_divergence_free_unchanged(self, grid2):
        psi = np.sin(grid2.x[0]) * np.cos(2 * grid2.x[1])
        v = np.stack(
            [-spectral_derivative(grid2, psi, 1), spectral_derivative(grid2, psi, 0)]
        )
        proj = leray_project(grid2, v)
        assert np.max(np.abs(proj - v)) < 1e-12

    def test_single_aligned_mode_annihilated(self):
        # mode k = (1, 0, 0) with velocity along x_1 is fully longitudinal
        g = Grid(dim=3, n=16, length=2 * np.pi)
        v = np.zeros((3,) + g.shape)
        v[0] = np.sin(g.x[0]) * np.ones(g.shape)
        assert np.max(np.abs(leray_project(g, v))) < 1e-12

    def test_orthogonal_projection(self, grid2):
        rng = np.random.default_rng(3)
        v = np.stack([random_band_limited(grid2, rng) for _ in range(2)])
        pv = leray_project(grid2, v)
        residual = v - pv
        assert abs(inner(grid2, pv, residual)) <= 1e-10 * l2_norm(grid2, v) ** 2
        assert max_relative_divergence(grid2, pv) <= 1e-10

    def test_idempotent(self, grid2):
        rng = np.random.default_rng(4)
        v = np.stack([random_band_limited(grid2, rng) for _ in range(2)])
        p1 = leray_project(grid2, v)
        p2 = leray_project(grid2, p1)
        assert np.max(np.abs(p2 - p1)) < 1e-12

    def test_rejects_dim1(self):
        g = Grid(dim=1, n=16, length=1.0)
        with pytest.raises(SpectralError):
            leray_project(g, np.zeros((1,) + g.shape))


class TestDealias:
    def test_band_limited_unchanged(self, grid2):
        f = np.sin(grid2.x[0]) * np.cos(grid2.x[1])
        assert np.max(np.abs(dealias_truncate(grid2, f) - f)) < 1e-12

    def test_nyquist_mode_zeroed(self):
        g = Grid(dim=1, n=16, length=2 * np.pi)
        f = np.cos(8 * (g.x[0] + np.pi)).reshape(g.shape)
        assert np.max(np.abs(dealias_truncate(g, f))) < 1e-12

    def test_idempotent(self, grid3):
        rng = np.random.default_rng(5)
        f = rng.standard_normal(grid3.shape)
        once = dealias_truncate(grid3, f)
        twice = dealias_truncate(grid3, once)
        assert np.max(np.abs(twice - once)) < 1e-13

    def test_commutes_with_derivative(self, grid2):
        rng = np.random.default_rng(6)
        f = rng.standard_normal(grid2.shape)
        a = spectral_derivative(grid2, dealias_truncate(grid2, f), 0)
        b = dealias_truncate(grid2, spectral_derivative(grid2, f, 0))
        assert np.max(np.abs(a - b)) < 1e-11


class TestNorms:
    def test_parseval(self, grid3):
        rng = np.random.default_rng(7)
        f = rng.standard_normal(grid3.shape)
        phys = l2_norm(grid3, f)
        spec = spectral_l2_norm(grid3, to_spectral(grid3, f))
        assert abs(phys - spec) <= 1e-12 * phys

    def test_divergence_of_gradient_curlfree(self, grid2):
        phi = np.sin(grid2.x[0]) * np.sin(grid2.x[1])
        v = gradient(grid2, phi)
        lap = divergence(grid2, v)
        expected = -2.0 * phi
        assert np.max(np.abs(lap - expected)) < 1e-11
