"""Time stepping for the coupled system.

One step applies the exact modewise propagator of the linear part (heat
semigroup on the velocity, wave rotation on the director pair) and a
two-stage explicit midpoint update of the dealiased nonlinear terms
(integrating-factor Heun).  The linear part is therefore unconditionally
stable and exact; the CFL rule governs the explicit nonlinear coupling.
After every step the director is renormalized to the sphere and the director
velocity re-projected to its tangent plane.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .dynamics import Params, State, _rhs_core, _lift, total_energy
from .spectral import Grid, to_physical, to_spectral


class BlowupError(RuntimeError):
    """Raised when the solution leaves the finite regime."""

    def __init__(self, message: str, last_valid_time: float):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class CorruptedStateError(RuntimeError):
    """Raised when the director collapses too far from the sphere."""


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    cfl_safety: float = 0.5
    constraint_tol: float = 1e-12
    blowup_energy_factor: float = 1e4

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")


@dataclass
class StepInfo:
    drift: float  # pre-projection max | |d| - 1 |


@lru_cache(maxsize=16)
def _propagator(grid: Grid, params: Params, dt: float):
    kk = np.sqrt(grid.k2)
    c = 1.0 / np.sqrt(params.sigma0)
    theta = c * kk * dt
    cosw = np.cos(theta)
    sinw_over = np.empty_like(theta)
    nz = theta != 0
    sinw_over[nz] = np.sin(theta[nz]) / (c * kk[nz])
    sinw_over[~nz] = dt
    dq_coef = -(c * c) * grid.k2 * sinw_over
    heat = np.exp(-params.mu * grid.k2 * dt)
    return heat, cosw, sinw_over, dq_coef


def step(state: State, params: Params, cfg: StepperConfig) -> State:
    """Advance one step of size cfg.dt."""
    new, _ = step_with_info(state, params, cfg)
    return new


def step_with_info(state: State, params: Params, cfg: StepperConfig) -> tuple[State, StepInfo]:
    grid = state.grid
    dt = cfg.dt
    heat, cosw, sinw, dqc = _propagator(grid, params, dt)

    res0 = _rhs_core(grid, params, _lift(state.v), _lift(state.d), _lift(state.q), want_full=False)
    vh0 = to_spectral(grid, state.v)
    dh0 = to_spectral(grid, state.d)
    qh0 = to_spectral(grid, state.q)
    nv0 = res0["nv_hat"][0]
    nq0 = res0["nq_hat"][0]

    # integrating-factor Euler predictor
    qh_forced = qh0 + dt * nq0
    vh_star = heat * (vh0 + dt * nv0)
    dh_star = cosw * dh0 + sinw * qh_forced
    qh_star = dqc * dh0 + cosw * qh_forced
    stage = State(
        grid=grid,
        v=to_physical(grid, vh_star),
        d=to_physical(grid, dh_star),
        q=to_physical(grid, qh_star),
        t=state.t + dt,
    )
    res1 = _rhs_core(grid, params, _lift(stage.v), _lift(stage.d), _lift(stage.q), want_full=False)
    nv1 = res1["nv_hat"][0]
    nq1 = res1["nq_hat"][0]

    # trapezoidal corrector
    vh1 = heat * vh0 + 0.5 * dt * (heat * nv0 + nv1)
    dh1 = cosw * dh0 + sinw * qh0 + 0.5 * dt * sinw * nq0
    qh1 = dqc * dh0 + cosw * qh0 + 0.5 * dt * (cosw * nq0 + nq1)

    raw = State(
        grid=grid,
        v=to_physical(grid, vh1),
        d=to_physical(grid, dh1),
        q=to_physical(grid, qh1),
        t=state.t + dt,
    )
    if not raw.is_finite():
        raise BlowupError("non-finite field values produced", last_valid_time=state.t)
    new, drift = renormalize_constraints(raw)
    return new, StepInfo(drift=drift)


def renormalize_constraints(state: State) -> tuple[State, float]:
    """Project the director back to the sphere and its velocity to the tangent.

    Returns the renormalized state and the pre-projection drift
    max | |d| - 1 |.  The velocity field is untouched.
    """
    norm = np.sqrt(np.sum(state.d**2, axis=0))
    if float(norm.min()) < 0.5:
        raise CorruptedStateError("director magnitude fell below 0.5")
    drift = float(np.max(np.abs(norm - 1.0)))
    d = state.d / norm
    q = state.q - np.sum(state.q * d, axis=0) * d
    return State(grid=state.grid, v=state.v, d=d, q=q, t=state.t), drift


def stability_dt(grid: Grid, params: Params, state: State, cfl_safety: float = 0.5) -> float:
    """CFL bound: wave speed 1 plus advective restriction; viscosity exempt."""
    wave = grid.dx
    vmax = float(np.max(np.abs(state.v))) if state.v.size else 0.0
    advective = grid.dx / vmax if vmax > 0 else np.inf
    return cfl_safety * min(wave, advective)


def detect_blowup(
    state: State, baseline_energy: float, cfg: StepperConfig, params: Params | None = None
) -> bool:
    """True when fields are non-finite or energy left the small-data regime."""
    if not state.is_finite():
        return True
    energy = total_energy(state, params if params is not None else Params())
    return energy > cfg.blowup_energy_factor * max(baseline_energy, 0.0)
