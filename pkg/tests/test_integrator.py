"""Stepper checks against exact solutions: order, conservation, constraints."""

import numpy as np
import pytest

from elwave.dynamics import Params, State
from elwave.integrator import (
    BlowupError,
    CorruptedStateError,
    StepperConfig,
    detect_blowup,
    renormalize_constraints,
    stability_dt,
    step,
    step_with_info,
)
from elwave.spectral import Grid, l2_norm, max_relative_divergence
from elwave.verification import OracleSpec, geodesic_oracle, taylor_green_oracle


def run_to(state, params, dt, t_end):
    cfg = StepperConfig(dt=dt)
    drift = 0.0
    n = int(round((t_end - state.t) / dt))
    for _ in range(n):
        state, info = step_with_info(state, params, cfg)
        drift = max(drift, info.drift)
    return state, drift


class TestFixedPoint:
    def test_equilibrium_is_stationary(self):
        grid = Grid(dim=3, n=16, length=2 * np.pi)
        params = Params()
        state = State.equilibrium(grid, params)
        new = step(state, params, StepperConfig(dt=0.05))
        assert new.t == pytest.approx(0.05)
        assert np.max(np.abs(new.v)) < 1e-14
        assert np.max(np.abs(new.d - state.d)) < 1e-14
        assert np.max(np.abs(new.q)) < 1e-14


class TestGeodesicConvergence:
    def test_second_order_in_time(self):
        grid = Grid(dim=1, n=64, length=2 * np.pi)
        params = Params()
        spec = OracleSpec(kind="geodesic_wavemap", epsilon=0.2)
        errors = []
        for dt in (4e-3, 2e-3, 1e-3):
            state, _ = run_to(geodesic_oracle(grid, spec, 0.0), params, dt, 1.0)
            exact = geodesic_oracle(grid, spec, 1.0)
            errors.append(l2_norm(grid, state.d - exact.d))
        order1 = np.log2(errors[0] / errors[1])
        order2 = np.log2(errors[1] / errors[2])
        assert order1 > 1.9
        assert order2 > 1.9

    def test_drift_second_order(self):
        grid = Grid(dim=1, n=64, length=2 * np.pi)
        params = Params()
        spec = OracleSpec(kind="geodesic_wavemap", epsilon=0.2)
        drifts = []
        for dt in (4e-3, 2e-3):
            _, drift = run_to(geodesic_oracle(grid, spec, 0.0), params, dt, 0.5)
            drifts.append(drift)
        assert drifts[0] / drifts[1] > 3.5  # at least O(dt^2) reduction


class TestTaylorGreen:
    def test_viscous_decay_amplitude(self):
        grid = Grid(dim=2, n=32, length=2 * np.pi)
        mu = 1.0
        params = Params(mu=mu)
        spec = OracleSpec(kind="taylor_green", epsilon=1.0, mu=mu)
        state = taylor_green_oracle(grid, spec, 0.0)
        n0 = l2_norm(grid, state.v)
        state, _ = run_to(state, params, 1e-3, 1.0)
        ratio = l2_norm(grid, state.v) / n0
        assert abs(ratio - np.exp(-2.0 * mu)) < 1e-8

    def test_divergence_preserved(self):
        grid = Grid(dim=2, n=32, length=2 * np.pi)
        params = Params()
        state = taylor_green_oracle(grid, OracleSpec(kind="taylor_green"), 0.0)
        state, _ = run_to(state, params, 1e-2, 0.2)
        assert max_relative_divergence(grid, state.v) < 1e-12


class TestEnergyConservation:
    def test_wave_map_energy_drift(self):
        # velocity off: the director system conserves wave energy
        grid = Grid(dim=1, n=64, length=2 * np.pi)
        params = Params()
        spec = OracleSpec(kind="geodesic_wavemap", epsilon=0.3)
        state = geodesic_oracle(grid, spec, 0.0)

        def wave_energy(s):
            from elwave.spectral import gradient

            grads = np.stack([gradient(grid, s.d[c]) for c in range(3)])
            return grid.cell_volume * float(np.sum(s.q**2) + np.sum(grads**2))

        e0 = wave_energy(state)
        state, _ = run_to(state, params, 1e-3, 10.0)
        e1 = wave_energy(state)
        assert abs(e1 - e0) / e0 <= 1e-6


class TestRenormalize:
    def test_idempotent_on_constrained_state(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        state = geodesic_oracle(grid, OracleSpec(kind="geodesic_wavemap", epsilon=0.2), 0.3)
        new, drift = renormalize_constraints(state)
        assert drift < 1e-15
        assert np.max(np.abs(new.d - state.d)) < 1e-15

    def test_inflated_director(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        params = Params()
        state = State.equilibrium(grid, params)
        state.d *= 1.1
        new, drift = renormalize_constraints(state)
        assert drift == pytest.approx(0.1, rel=1e-12)
        assert np.max(np.abs(np.sqrt(np.sum(new.d**2, axis=0)) - 1.0)) == 0.0

    def test_normal_kick_removed(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        params = Params()
        state = State.equilibrium(grid, params)
        state.q[2] = 1.0  # parallel to the director
        new, _ = renormalize_constraints(state)
        assert np.max(np.abs(new.q)) < 1e-15

    def test_collapsed_director_rejected(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        state = State.equilibrium(grid, Params())
        state.d *= 0.1
        with pytest.raises(CorruptedStateError):
            renormalize_constraints(state)


class TestStabilityDt:
    def test_wave_bound_at_rest(self):
        grid = Grid(dim=3, n=64, length=2 * np.pi)
        state = State.equilibrium(grid, Params())
        assert stability_dt(grid, Params(), state) == pytest.approx(0.5 * 2 * np.pi / 64)

    def test_advective_bound_scales(self):
        grid = Grid(dim=2, n=32, length=2 * np.pi)
        state = State.equilibrium(grid, Params())
        state.v[0] += 2.0
        fast = stability_dt(grid, Params(), state)
        state.v[0] /= 2.0
        slow = stability_dt(grid, Params(), state)
        assert fast == pytest.approx(slow / 2.0)

    def test_doubling_n_halves_dt(self):
        p = Params()
        a = stability_dt(Grid(dim=1, n=64, length=2 * np.pi), p,
                         State.equilibrium(Grid(dim=1, n=64, length=2 * np.pi), p))
        b = stability_dt(Grid(dim=1, n=128, length=2 * np.pi), p,
                         State.equilibrium(Grid(dim=1, n=128, length=2 * np.pi), p))
        assert a == pytest.approx(2 * b)


class TestBlowupGuard:
    def test_equilibrium_not_flagged(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        state = State.equilibrium(grid, Params())
        assert not detect_blowup(state, 0.0, StepperConfig(dt=1e-2))

    def test_nan_flagged(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        state = State.equilibrium(grid, Params())
        state.q[0, 3] = np.nan
        assert detect_blowup(state, 1.0, StepperConfig(dt=1e-2))

    def test_energy_escape_flagged(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        state = geodesic_oracle(grid, OracleSpec(kind="geodesic_wavemap", epsilon=0.3), 0.0)
        baseline = 1e-9
        assert detect_blowup(state, baseline, StepperConfig(dt=1e-2))

    def test_step_raises_on_nonfinite(self):
        grid = Grid(dim=1, n=16, length=2 * np.pi)
        params = Params()
        state = State.equilibrium(grid, params)
        state.q[0] = np.inf
        with np.errstate(invalid="ignore", over="ignore"):
            with pytest.raises(BlowupError) as err:
                step(state, params, StepperConfig(dt=1e-2))
        assert err.value.last_valid_time == 0.0
