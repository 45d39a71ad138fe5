"""Right-hand-side assembly checks against hand-computed and FD oracles."""

import numpy as np
import pytest

from elwave.dynamics import (
    ParabolicRegimeError,
    Params,
    State,
    director_rhs,
    ericksen_stress_div,
    evaluate_rhs,
    lagrange_multiplier,
    momentum_rhs,
    pressure_gradient,
    solution_jets,
    total_energy,
)
from elwave.spectral import (
    Grid,
    SpectralError,
    dealias_truncate,
    gradient,
    l2_norm,
    leray_project,
    max_relative_divergence,
    spectral_derivative,
    to_physical,
    to_spectral,
)


def geodesic_profile(grid, eps, k=1.0, t=0.0):
    """Rotating-plane director solving the coupled system with v = 0.

    u(t, x) = eps cos(kt) sin(k x_1) solves the linear wave equation; the
    in-plane director (sin u, 0, cos u) then solves the sphere-constrained
    director equation, and its stress divergence is a pure gradient.
    """
    x1 = grid.x[0] * np.ones(grid.shape)
    u = eps * np.cos(k * t) * np.sin(k * x1)
    ut = -eps * k * np.sin(k * t) * np.sin(k * x1)
    d = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
    q = ut * np.stack([np.cos(u), np.zeros_like(u), -np.sin(u)])
    return State(grid=grid, v=np.zeros((grid.dim,) + grid.shape), d=d, q=q, t=t)


def taylor_green_state(grid, amplitude=1.0, t=0.0, mu=1.0):
    x, y = grid.x[0] * np.ones(grid.shape), grid.x[1] * np.ones(grid.shape)
    decay = amplitude * np.exp(-2.0 * mu * t)
    v = decay * np.stack([np.cos(x) * np.sin(y), -np.sin(x) * np.cos(y)])
    d = np.zeros((3,) + grid.shape)
    d[2] = 1.0
    return State(grid=grid, v=v, d=d, q=np.zeros((3,) + grid.shape), t=t)


def smooth_random_state(grid, rng, eps=0.05, band=None):
    """Band-limited small state satisfying the pointwise constraints.

    The band is chosen so that cubic products still fit inside the 2/3
    dealias mask; identities that rely on unmasked products then hold to
    spectral-tail accuracy.
    """
    if band is None:
        band = max(2, grid.n // 9)

    def bump():
        f = rng.standard_normal(grid.shape)
        fh = to_spectral(grid, f)
        keep = np.ones(grid.spectral_shape)
        for a in range(grid.dim):
            m = np.abs(grid._axis_modes(a))
            keep = keep * np.exp(-((m / (band / 1.5)) ** 2)) * (m <= band)
        out = to_physical(grid, keep * fh)
        return out / np.max(np.abs(out))

    theta = eps * bump()
    phi = eps * bump()
    d = np.stack([np.sin(theta), np.cos(theta) * np.sin(phi), np.cos(theta) * np.cos(phi)])
    raw_q = eps * np.stack([bump(), bump(), bump()])
    q = raw_q - np.sum(raw_q * d, axis=0) * d
    if grid.dim >= 2:
        v = eps * np.stack([bump() for _ in range(grid.dim)])
        v = leray_project(grid, v)
    else:
        v = np.zeros((1,) + grid.shape)
    return State(grid=grid, v=v, d=d, q=q, t=0.0)


@pytest.fixture
def grid3():
    return Grid(dim=3, n=16, length=2 * np.pi)


@pytest.fixture
def grid2():
    return Grid(dim=2, n=32, length=2 * np.pi)


class TestEricksenStress:
    def test_constant_director_zero(self, grid3):
        d = np.zeros((3,) + grid3.shape)
        d[2] = 1.0
        assert np.max(np.abs(ericksen_stress_div(grid3, d))) < 1e-13

    def test_geodesic_profile_closed_form(self, grid3):
        eps = 0.3
        state = geodesic_profile(grid3, eps, t=0.0)
        out = ericksen_stress_div(grid3, state.d)
        x1 = grid3.x[0] * np.ones(grid3.shape)
        expected = -(eps**2) * np.sin(2 * x1)
        assert np.max(np.abs(out[0] - expected)) < 1e-11
        assert np.max(np.abs(out[1])) < 1e-11
        assert np.max(np.abs(out[2])) < 1e-11

    def test_geodesic_profile_fd_crosscheck(self):
        # independent 1D finite-difference evaluation of d_1(|d_1 d|^2)
        eps = 0.3
        n_fine = 4096
        x = np.linspace(-np.pi, np.pi, n_fine, endpoint=False)
        h = x[1] - x[0]
        u = eps * np.sin(x)
        d = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
        dd = (np.roll(d, -1, axis=1) - np.roll(d, 1, axis=1)) / (2 * h)
        t11 = np.sum(dd * dd, axis=0)
        div1 = (np.roll(t11, -1) - np.roll(t11, 1)) / (2 * h)
        expected = -(eps**2) * np.sin(2 * x)
        assert np.max(np.abs(div1 - expected)) < 1e-5

    def test_x1_only_profile_supported_in_component_1(self, grid3):
        rng = np.random.default_rng(11)
        u = 0.2 * np.sin(grid3.x[0]) + 0.1 * np.cos(2 * grid3.x[0])
        u = u * np.ones(grid3.shape)
        d = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
        out = ericksen_stress_div(grid3, d)
        assert np.max(np.abs(out[1])) < 1e-12
        assert np.max(np.abs(out[2])) < 1e-12
        assert np.max(np.abs(out[0])) > 1e-3

    def test_transpose_assembly_matches(self, grid3):
        rng = np.random.default_rng(12)
        state = smooth_random_state(grid3, rng, eps=0.2)
        out = ericksen_stress_div(grid3, state.d)
        # independently assemble with the transposed tensor convention
        dh = to_spectral(grid3, state.d)
        grads = np.stack(
            [to_physical(grid3, 1j * grid3.k[a] * dh) for a in range(3)]
        )  # (deriv, comp, ...)
        alt = np.zeros_like(out)
        for i in range(3):
            acc = np.zeros(grid3.spectral_shape, dtype=complex)
            for j in range(3):
                tji = np.sum(grads[j] * grads[i], axis=0)
                acc += 1j * grid3.k[j] * (grid3.dealias_mask * to_spectral(grid3, tji))
            alt[i] = to_physical(grid3, acc)
        scale = max(np.max(np.abs(out)), 1e-30)
        assert np.max(np.abs(out - alt)) < 1e-12 * max(scale, 1.0)


class TestMomentum:
    def test_equilibrium_zero(self, grid2):
        state = State.equilibrium(grid2, Params())
        assert np.max(np.abs(momentum_rhs(state, Params()))) < 1e-13

    def test_taylor_green_pure_decay(self, grid2):
        mu = 0.7
        state = taylor_green_state(grid2)
        out = momentum_rhs(state, Params(mu=mu))
        assert np.max(np.abs(out - (-2.0 * mu * state.v))) < 1e-11

    def test_stress_composition(self, grid3):
        state = geodesic_profile(grid3, 0.3)
        out = momentum_rhs(state, Params())
        expected = -leray_project(grid3, ericksen_stress_div(grid3, state.d))
        assert np.max(np.abs(out - expected)) < 1e-12

    def test_output_divergence_free(self, grid3):
        rng = np.random.default_rng(13)
        state = smooth_random_state(grid3, rng, eps=0.1)
        out = momentum_rhs(state, Params())
        assert max_relative_divergence(grid3, out) <= 1e-10

    def test_rejects_dim1(self):
        g = Grid(dim=1, n=16, length=2 * np.pi)
        state = State.equilibrium(g, Params())
        with pytest.raises(SpectralError):
            momentum_rhs(state, Params())


class TestLagrangeMultiplier:
    def test_tangent_kick(self, grid3):
        eps = 0.25
        state = State.equilibrium(grid3, Params())
        state.q[0] = eps
        lam = lagrange_multiplier(state, Params())
        assert np.max(np.abs(lam - (-(eps**2)))) < 1e-13

    def test_geodesic_gradient_energy(self, grid3):
        eps = 0.2
        state = geodesic_profile(grid3, eps, t=0.0)
        lam = lagrange_multiplier(state, Params())
        expected = (eps * np.cos(grid3.x[0])) ** 2 * np.ones(grid3.shape)
        assert np.max(np.abs(lam - expected)) < 1e-12

    def test_equilibrium_zero(self, grid3):
        state = State.equilibrium(grid3, Params())
        assert np.max(np.abs(lagrange_multiplier(state, Params()))) < 1e-14

    def test_general_sigma0(self, grid3):
        eps = 0.25
        state = State.equilibrium(grid3, Params())
        state.q[0] = eps
        lam = lagrange_multiplier(state, Params(sigma0=2.0))
        assert np.max(np.abs(lam - (-2.0 * eps**2))) < 1e-13


class TestDirectorRhs:
    def test_equilibrium_fixed_point(self, grid3):
        state = State.equilibrium(grid3, Params())
        dv = np.zeros_like(state.v)
        assert np.max(np.abs(director_rhs(state, Params(), dv))) < 1e-13

    def test_geodesic_wave_residual(self):
        # resolved grid: the dealias cutoff truncation must sit below tolerance
        grid3 = Grid(dim=3, n=32, length=2 * np.pi)
        eps, k, t = 0.2, 1.0, 0.4
        state = geodesic_profile(grid3, eps, k=k, t=t)
        dv = momentum_rhs(state, Params())
        out = director_rhs(state, Params(), dv)
        x1 = grid3.x[0] * np.ones(grid3.shape)
        u = eps * np.cos(k * t) * np.sin(k * x1)
        ut = -eps * k * np.sin(k * t) * np.sin(k * x1)
        utt = -(k**2) * u
        gamma = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
        gamma_p = np.stack([np.cos(u), np.zeros_like(u), -np.sin(u)])
        expected = utt * gamma_p - ut**2 * gamma
        assert np.max(np.abs(out - expected)) < 1e-10

    def test_tangent_kick_restoring_force(self, grid3):
        eps = 0.25
        state = State.equilibrium(grid3, Params())
        state.q[0] = eps
        out = director_rhs(state, Params(), np.zeros_like(state.v))
        expected = np.zeros_like(out)
        expected[2] = -(eps**2)
        assert np.max(np.abs(out - expected)) < 1e-13

    def test_rejects_parabolic(self, grid3):
        state = State.equilibrium(grid3, Params())
        with pytest.raises((ParabolicRegimeError, ValueError)):
            director_rhs(state, Params(sigma0=0.0), np.zeros_like(state.v))

    def test_wave_map_reduction(self, grid3):
        # with v = 0 the full rhs equals the sphere wave-map right-hand side
        rng = np.random.default_rng(14)
        state = smooth_random_state(grid3, rng, eps=0.15)
        state.v[:] = 0.0
        params = Params()
        out = director_rhs(state, params, np.zeros_like(state.v))
        grad_d = np.stack([gradient(grid3, state.d[c]) for c in range(3)], axis=1)
        lam = np.sum(grad_d**2, axis=(0, 1)) - np.sum(state.q**2, axis=0)
        lap = np.stack(
            [
                sum(spectral_derivative(grid3, state.d[c], a, 2) for a in range(3))
                for c in range(3)
            ]
        )
        expected = lap + dealias_truncate(grid3, lam * state.d)
        assert np.max(np.abs(out - expected)) < 1e-11


class TestPressure:
    def test_equilibrium_zero(self, grid2):
        state = State.equilibrium(grid2, Params())
        assert np.max(np.abs(pressure_gradient(state, Params()))) < 1e-13

    def test_taylor_green_closed_form(self, grid2):
        state = taylor_green_state(grid2)
        out = pressure_gradient(state, Params())
        x, y = grid2.x[0] * np.ones(grid2.shape), grid2.x[1] * np.ones(grid2.shape)
        expected = np.stack([np.sin(2 * x) / 2.0, np.sin(2 * y) / 2.0])
        assert np.max(np.abs(out - expected)) < 1e-11

    def test_curl_free(self, grid2):
        rng = np.random.default_rng(15)
        state = smooth_random_state(grid2, rng, eps=0.1)
        out = pressure_gradient(state, Params())
        curl = spectral_derivative(grid2, out[1], 0) - spectral_derivative(grid2, out[0], 1)
        assert np.max(np.abs(curl)) <= 1e-10 * max(np.max(np.abs(out)), 1e-30)


class TestConstraintConsistency:
    def test_tangency_of_acceleration(self):
        # pointwise d . q_t + |q|^2 vanishes for admissible band-limited states
        grid = Grid(dim=3, n=32, length=2 * np.pi)
        rng = np.random.default_rng(16)
        state = smooth_random_state(grid, rng, eps=0.1)
        rhs = evaluate_rhs(state, Params())
        residual = np.sum(state.d * rhs.dq_dt, axis=0) + np.sum(state.q**2, axis=0)
        scale = max(float(np.max(np.abs(rhs.dq_dt))), 1e-30)
        assert np.max(np.abs(residual)) < 1e-5 * scale

    def test_general_coefficients(self):
        grid = Grid(dim=3, n=32, length=2 * np.pi)
        rng = np.random.default_rng(17)
        state = smooth_random_state(grid, rng, eps=0.1)
        rhs = evaluate_rhs(state, Params(sigma0=1.7, sigma1=0.3))
        residual = np.sum(state.d * rhs.dq_dt, axis=0) + np.sum(state.q**2, axis=0)
        scale = max(float(np.max(np.abs(rhs.dq_dt))), 1e-30)
        assert np.max(np.abs(residual)) < 1e-5 * scale


class TestSolutionJets:
    def test_geodesic_time_derivatives(self):
        grid = Grid(dim=1, n=64, length=2 * np.pi)
        eps, k, t = 0.2, 1.0, 0.4
        state = geodesic_profile(grid, eps, k=k, t=t)
        vj, dj = solution_jets(state, Params(), depth=3)

        x1 = grid.x[0] * np.ones(grid.shape)
        u = eps * np.cos(k * t) * np.sin(k * x1)
        ut = -eps * k * np.sin(k * t) * np.sin(k * x1)
        utt = -(k**2) * u
        uttt = -(k**2) * ut
        gamma = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
        gamma_p = np.stack([np.cos(u), np.zeros_like(u), -np.sin(u)])
        d2 = utt * gamma_p - ut**2 * gamma
        d3 = (uttt - ut**3) * gamma_p - 3 * ut * utt * gamma

        assert np.max(np.abs(dj[1] - state.q)) < 1e-14
        assert np.max(np.abs(dj[2] - d2)) < 1e-10
        assert np.max(np.abs(dj[3] - d3)) < 1e-9

    def test_fd_time_crosscheck(self):
        # oracle states at t +/- h give an independent second-derivative check
        grid = Grid(dim=1, n=64, length=2 * np.pi)
        eps, k, t, h = 0.2, 1.0, 0.4, 1e-4
        state = geodesic_profile(grid, eps, k=k, t=t)
        _, dj = solution_jets(state, Params(), depth=2)
        plus = geodesic_profile(grid, eps, k=k, t=t + h)
        minus = geodesic_profile(grid, eps, k=k, t=t - h)
        fd2 = (plus.d - 2 * state.d + minus.d) / h**2
        assert np.max(np.abs(dj[2] - fd2)) < 1e-6

    def test_coupled_jets_velocity(self, grid3):
        state = geodesic_profile(grid3, 0.2, t=0.3)
        vj, dj = solution_jets(state, Params(), depth=2)
        # stress divergence is a pure gradient here: velocity stays at rest
        assert np.max(np.abs(vj[1])) < 1e-11
        assert np.max(np.abs(vj[2])) < 1e-10


class TestEnergy:
    def test_equilibrium_energy_zero(self, grid3):
        state = State.equilibrium(grid3, Params())
        assert total_energy(state, Params()) == 0.0

    def test_taylor_green_energy(self, grid2):
        state = taylor_green_state(grid2)
        # |v|^2 integrates to (2 pi)^2 / ... : compare against direct quadrature
        expected = 0.5 * grid2.cell_volume * float(np.sum(state.v**2))
        assert np.isclose(total_energy(state, Params()), expected)
