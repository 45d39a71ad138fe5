"""Right-hand sides of the coupled flow/director system.

The momentum equation drives a divergence-free velocity with the divergence
of the director gradient tensor as forcing; the director obeys an inertial
(wave-type) equation on the unit sphere, closed to first order in time in the
variables (v, d, q = d_t).

Everything here is assembled in "time-jet" form: a field argument carries a
leading axis of time-derivative orders [u, u_t, u_tt, ...], and products use
the Leibniz rule along that axis.  Order 0 recovers the plain right-hand
side; higher orders supply exact time derivatives of the solution to the
diagnostics without any finite differencing in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    Grid,
    SpectralError,
    leray_hat,
    to_physical,
    to_spectral,
)

DEFAULT_REST_DIRECTOR = (0.0, 0.0, 1.0)


class ParabolicRegimeError(ValueError):
    """Raised when the inertial coefficient vanishes (parabolic regime)."""


@dataclass(frozen=True)
class Params:
    """Coefficients of the flow/director system.

    sigma0 scales the inertial term, sigma1 the damping, mu the viscosity.
    The rest director e must be a unit 3-vector.
    """

    sigma0: float = 1.0
    sigma1: float = 0.0
    mu: float = 1.0
    rest_director: tuple[float, float, float] = DEFAULT_REST_DIRECTOR

    def __post_init__(self):
        if self.sigma0 < 0 or self.sigma1 < 0:
            raise ValueError("sigma0 and sigma1 must be nonnegative")
        if self.mu < 0:
            raise ValueError("mu must be nonnegative")
        norm = math.sqrt(sum(c * c for c in self.rest_director))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError("rest director must be a unit vector")

    @property
    def e(self) -> np.ndarray:
        return np.asarray(self.rest_director)


@dataclass
class State:
    """Solution snapshot: velocity, director, director velocity, time."""

    grid: Grid
    v: np.ndarray  # (dim, *shape)
    d: np.ndarray  # (3, *shape)
    q: np.ndarray  # (3, *shape)
    t: float = 0.0

    @classmethod
    def equilibrium(cls, grid: Grid, params: Params, t: float = 0.0) -> "State":
        d = np.broadcast_to(params.e.reshape((3,) + (1,) * grid.dim), (3,) + grid.shape).copy()
        return cls(
            grid=grid,
            v=np.zeros((grid.dim,) + grid.shape),
            d=d,
            q=np.zeros((3,) + grid.shape),
            t=t,
        )

    def copy(self) -> "State":
        return State(self.grid, self.v.copy(), self.d.copy(), self.q.copy(), self.t)

    def is_finite(self) -> bool:
        return bool(
            np.all(np.isfinite(self.v)) and np.all(np.isfinite(self.d)) and np.all(np.isfinite(self.q))
        )


@dataclass
class Rhs:
    """Bundle of right-hand-side fields evaluated on one state.

    nv_hat/nq_hat are the dealiased spectral nonlinear parts consumed by the
    integrator (projected momentum nonlinearity; director forcing without the
    Laplacian).  dv_dt/dq_dt are the full physical time derivatives.
    """

    dv_dt: np.ndarray
    nv_hat: np.ndarray
    dq_dt: np.ndarray | None = None
    nq_hat: np.ndarray | None = None
    lam: np.ndarray | None = None


# ---------------------------------------------------------------------------
# jet arithmetic: arrays carry a leading time-derivative axis

_BINOM_CACHE: dict[int, np.ndarray] = {}


def _binom_row(m: int) -> np.ndarray:
    if m not in _BINOM_CACHE:
        _BINOM_CACHE[m] = np.array([math.comb(m, i) for i in range(m + 1)], dtype=float)
    return _BINOM_CACHE[m]


def jmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Leibniz product of two jets along their leading axis."""
    nj = min(a.shape[0], b.shape[0])
    if nj == 1:
        return a[:1] * b[:1]
    out = np.empty(np.broadcast_shapes(a[:nj].shape, b[:nj].shape))
    for m in range(nj):
        c = _binom_row(m)
        acc = a[0] * b[m]
        for i in range(1, m + 1):
            acc = acc + c[i] * (a[i] * b[m - i])
        out[m] = acc
    return out


def jet_contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sum_i Leibniz(a[:, i], b[:, i, ...]) over the first component axis."""
    nj = min(a.shape[0], b.shape[0])
    extra = b.ndim - a.ndim
    out = None
    for i in range(a.shape[1]):
        ai = a[:nj, i]
        ai = ai.reshape(ai.shape[:1] + (1,) * extra + ai.shape[1:])
        term = jmul(ai, b[:nj, i])
        out = term if out is None else out + term
    return out


# ---------------------------------------------------------------------------
# core assembly


def _grad_from_hat(grid: Grid, fh: np.ndarray) -> np.ndarray:
    """Physical gradient of a spectral jet stack; derivative axis inserted after jets."""
    parts = [to_physical(grid, 1j * grid.k[a] * fh) for a in range(grid.dim)]
    return np.stack(parts, axis=1)


def _rhs_core(
    grid: Grid,
    params: Params,
    vj: np.ndarray,
    dj: np.ndarray,
    qj: np.ndarray,
    *,
    want_full: bool = True,
) -> dict:
    """Assemble right-hand-side jets for (v, d, q) jets of equal depth."""
    if params.sigma0 == 0:
        raise ParabolicRegimeError("sigma0 = 0 is outside the wave regime")
    nj = vj.shape[0]
    mask = grid.dealias_mask
    s0, s1, mu = params.sigma0, params.sigma1, params.mu
    velocity_active = grid.dim >= 2

    vh = to_spectral(grid, vj)
    dh = to_spectral(grid, dj)
    qh = to_spectral(grid, qj)

    grad_d = _grad_from_hat(grid, dh)  # (nj, dim, 3, *S)
    grad_q = _grad_from_hat(grid, qh)

    out: dict = {}

    if velocity_active:
        grad_v = _grad_from_hat(grid, vh)  # (nj, dim, dim, *S)
        adv = jet_contract(vj, grad_v)
        advh = mask * to_spectral(grid, adv)
        div_stress_hat = np.zeros((nj, grid.dim) + grid.spectral_shape, dtype=complex)
        for i in range(grid.dim):
            for jx in range(i, grid.dim):
                tij = jmul(grad_d[:, i, 0], grad_d[:, jx, 0])
                for c in range(1, 3):
                    tij = tij + jmul(grad_d[:, i, c], grad_d[:, jx, c])
                tij_hat = mask * to_spectral(grid, tij)
                div_stress_hat[:, i] += 1j * grid.k[jx] * tij_hat
                if jx != i:
                    div_stress_hat[:, jx] += 1j * grid.k[i] * tij_hat
        nv_hat = np.empty_like(advh)
        for m in range(nj):
            nv_hat[m] = leray_hat(grid, -advh[m] - div_stress_hat[m])
        dvdt_hat = nv_hat - mu * grid.k2 * vh
        dv_dt = to_physical(grid, dvdt_hat)
    else:
        nv_hat = np.zeros((nj, grid.dim) + grid.spectral_shape, dtype=complex)
        dv_dt = np.zeros_like(vj)

    out["dv_dt"] = dv_dt
    out["nv_hat"] = nv_hat

    # director transport pieces
    w = jet_contract(vj, grad_d)  # (v . grad) d
    wh = mask * to_spectral(grid, w)
    grad_w = _grad_from_hat(grid, wh)
    v_grad_w = jet_contract(vj, grad_w)
    v_grad_q = jet_contract(vj, grad_q)
    dvdt_grad_d = jet_contract(dv_dt, grad_d)

    # sphere multiplier: |grad d|^2 - sigma0 |D_t d|^2
    lam = None
    for i in range(grid.dim):
        for c in range(3):
            term = jmul(grad_d[:, i, c], grad_d[:, i, c])
            lam = term if lam is None else lam + term
    dtd = qj + w
    for c in range(3):
        lam = lam - s0 * jmul(dtd[:, c], dtd[:, c])

    nq = (jmul(lam[:, None], dj) - s1 * dtd) / s0 - (dvdt_grad_d + 2.0 * v_grad_q + v_grad_w)
    nq_hat = mask * to_spectral(grid, nq)

    out["lam"] = lam
    out["nq_hat"] = nq_hat
    if want_full:
        dqdt_hat = nq_hat - (grid.k2 / s0) * dh
        out["dq_dt"] = to_physical(grid, dqdt_hat)
    return out


def _lift(a: np.ndarray) -> np.ndarray:
    return a[np.newaxis]


def evaluate_rhs(state: State, params: Params, *, full: bool = True) -> Rhs:
    """Full right-hand side on one state (depth-0 jets)."""
    res = _rhs_core(
        state.grid,
        params,
        _lift(state.v),
        _lift(state.d),
        _lift(state.q),
        want_full=full,
    )
    return Rhs(
        dv_dt=res["dv_dt"][0],
        nv_hat=res["nv_hat"][0],
        dq_dt=res["dq_dt"][0] if full else None,
        nq_hat=res["nq_hat"][0],
        lam=res["lam"][0],
    )


def solution_jets(state: State, params: Params, depth: int) -> tuple[np.ndarray, np.ndarray]:
    """Time jets [u, u_t, ..., u^(depth)] of velocity and director.

    Computed by recursive substitution of the equations; the director jet is
    returned with `depth` orders, the velocity jet with `depth - 1` capped at
    the same evaluation cost (both arrays have depth+1 entries, velocity's
    top entry valid for depth >= 1).
    """
    vj = _lift(state.v)
    dj = _lift(state.d)
    qj = _lift(state.q)
    for m in range(depth):
        res = _rhs_core(state.grid, params, vj, dj, qj, want_full=True)
        vj = np.concatenate([vj, res["dv_dt"][m : m + 1]])
        dj = np.concatenate([dj, qj[m : m + 1]])
        qj = np.concatenate([qj, res["dq_dt"][m : m + 1]])
    return vj, dj


# ---------------------------------------------------------------------------
# public single-purpose operations


def ericksen_stress_div(grid: Grid, d: np.ndarray) -> np.ndarray:
    """div(grad d (x) grad d): component i = sum_j d_j(d_i d . d_j d)."""
    dh = to_spectral(grid, _lift(d))
    grad_d = _grad_from_hat(grid, dh)[0]  # (dim, 3, *S)
    mask = grid.dealias_mask
    out_hat = np.zeros((grid.dim,) + grid.spectral_shape, dtype=complex)
    for i in range(grid.dim):
        for jx in range(grid.dim):
            tij = np.sum(grad_d[i] * grad_d[jx], axis=0)
            out_hat[i] += 1j * grid.k[jx] * (mask * to_spectral(grid, tij))
    return to_physical(grid, out_hat)


def momentum_rhs(state: State, params: Params) -> np.ndarray:
    """Projected velocity tendency; the pressure gradient is absorbed."""
    if state.grid.dim < 2:
        raise SpectralError("momentum equation requires dim >= 2")
    rhs = evaluate_rhs(state, params, full=False)
    return rhs.dv_dt


def lagrange_multiplier(state: State, params: Params) -> np.ndarray:
    """Scalar multiplier of d enforcing the unit-length constraint."""
    grid = state.grid
    grad_d = _grad_from_hat(grid, to_spectral(grid, _lift(state.d)))[0]
    w = np.einsum("i...,ic...->c...", state.v, grad_d)
    dtd = state.q + w
    return np.sum(grad_d**2, axis=(0, 1)) - params.sigma0 * np.sum(dtd**2, axis=0)


def director_rhs(state: State, params: Params, dv_dt: np.ndarray) -> np.ndarray:
    """Director velocity tendency, with the given velocity tendency substituted."""
    if params.sigma0 == 0:
        raise ParabolicRegimeError("sigma0 = 0 is outside the wave regime")
    grid = state.grid
    mask = grid.dealias_mask
    dh = to_spectral(grid, _lift(state.d))
    qh = to_spectral(grid, _lift(state.q))
    grad_d = _grad_from_hat(grid, dh)[0]
    grad_q = _grad_from_hat(grid, qh)[0]

    w = np.einsum("i...,ic...->c...", state.v, grad_d)
    wh = mask * to_spectral(grid, w)
    grad_w = _grad_from_hat(grid, wh[np.newaxis])[0]
    v_grad_w = np.einsum("i...,ic...->c...", state.v, grad_w)
    v_grad_q = np.einsum("i...,ic...->c...", state.v, grad_q)
    dvdt_grad_d = np.einsum("i...,ic...->c...", dv_dt, grad_d)

    dtd = state.q + w
    lam = np.sum(grad_d**2, axis=(0, 1)) - params.sigma0 * np.sum(dtd**2, axis=0)
    nq = (lam * state.d - params.sigma1 * dtd) / params.sigma0 - (
        dvdt_grad_d + 2.0 * v_grad_q + v_grad_w
    )
    nq_hat = mask * to_spectral(grid, nq)
    return to_physical(grid, nq_hat - (grid.k2 / params.sigma0) * dh[0])


def pressure_gradient(state: State, params: Params) -> np.ndarray:
    """Curl-free pressure gradient consistent with the projected momentum RHS."""
    grid = state.grid
    if grid.dim < 2:
        raise SpectralError("pressure recovery requires dim >= 2")
    mask = grid.dealias_mask
    vh = to_spectral(grid, _lift(state.v))
    grad_v = _grad_from_hat(grid, vh)[0]
    adv = np.einsum("i...,ij...->j...", state.v, grad_v)
    forcing_hat = -mask * to_spectral(grid, adv) - to_spectral(
        grid, ericksen_stress_div(grid, state.d)
    )
    return to_physical(grid, forcing_hat - leray_hat(grid, forcing_hat))


def total_energy(state: State, params: Params) -> float:
    """Kinetic plus director (wave) energy; used by the blow-up guard."""
    grid = state.grid
    grad_d = _grad_from_hat(grid, to_spectral(grid, _lift(state.d)))[0]
    kinetic = 0.5 * np.sum(state.v**2)
    director = 0.5 * (params.sigma0 * np.sum(state.q**2) + np.sum(grad_d**2))
    return grid.cell_volume * float(kinetic + director)
