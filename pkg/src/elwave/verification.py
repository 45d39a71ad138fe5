"""Independent oracles and structural checks.

Exact solutions (geodesic director waves, decaying cellular flow), a Duhamel
reconstruction of the velocity, first-order commuted-equation residuals,
weighted Sobolev inequality probes, and a deliberately low-tech finite
difference reference step.  Nothing here shares code paths with the spectral
assembly beyond reading states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import diagnostics as diag
from . import dynamics
from .dynamics import Params, State
from .integrator import renormalize_constraints
from .spectral import (
    Grid,
    SpectralError,
    gradient,
    l2_norm,
    sigma_weight,
    to_physical,
    to_spectral,
)


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleSpec:
    kind: str  # geodesic_wavemap | taylor_green | heat_semigroup
    epsilon: float = 0.1
    mode: int = 1
    mu: float = 1.0

    def __post_init__(self):
        if self.kind not in ("geodesic_wavemap", "taylor_green", "heat_semigroup"):
            raise OracleError(f"unknown oracle kind {self.kind!r}")
        if self.kind == "geodesic_wavemap" and abs(self.epsilon) >= math.pi / 2:
            raise OracleError("geodesic amplitude must stay inside a hemisphere chart")


def geodesic_oracle(grid: Grid, spec: OracleSpec, t: float) -> State:
    """Exact rotating-plane director wave with resting fluid.

    u(t,x) = eps cos(k t) sin(k x_1) solves the linear wave equation; the
    director (sin u, 0, cos u) then solves the sphere-constrained equation,
    and the induced stress divergence is a pure gradient (velocity stays 0).
    """
    if spec.kind != "geodesic_wavemap":
        raise OracleError("geodesic_oracle needs a geodesic_wavemap spec")
    k = 2 * np.pi * spec.mode / grid.length
    x1 = grid.x[0] * np.ones(grid.shape)
    u = spec.epsilon * np.cos(k * t) * np.sin(k * x1)
    ut = -spec.epsilon * k * np.sin(k * t) * np.sin(k * x1)
    d = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
    q = ut * np.stack([np.cos(u), np.zeros_like(u), -np.sin(u)])
    return State(grid=grid, v=np.zeros((grid.dim,) + grid.shape), d=d, q=q, t=t)


def taylor_green_oracle(grid: Grid, spec: OracleSpec, t: float) -> State:
    """Exponentially decaying cellular flow on a resting director background."""
    if spec.kind != "taylor_green":
        raise OracleError("taylor_green_oracle needs a taylor_green spec")
    if grid.dim < 2:
        raise OracleError("cellular flow needs dim >= 2")
    alpha = 2 * np.pi * spec.mode / grid.length
    decay = spec.epsilon * math.exp(-2.0 * spec.mu * alpha**2 * t)
    x = grid.x[0] * np.ones(grid.shape)
    y = grid.x[1] * np.ones(grid.shape)
    v = np.zeros((grid.dim,) + grid.shape)
    v[0] = decay * np.cos(alpha * x) * np.sin(alpha * y)
    v[1] = -decay * np.sin(alpha * x) * np.cos(alpha * y)
    d = np.zeros((3,) + grid.shape)
    d[2] = 1.0
    return State(grid=grid, v=v, d=d, q=np.zeros((3,) + grid.shape), t=t)


# ---------------------------------------------------------------------------
# Duhamel reconstruction


def duhamel_reconstruct(record, t0: float, t: float) -> np.ndarray:
    """Reconstruct v(t) from v(t0) and stored projected nonlinear terms.

    v(t) = heat(t - t0) v(t0) - integral_{t0}^{t} heat(t - s) F(s) ds with
    F = P[v . grad v + div(grad d (x) grad d)], evaluated modewise with the
    trapezoid rule over the record's checkpoint times.
    """
    grid: Grid = record.grid
    mu = record.params.mu
    cps = [cp for cp in record.checkpoints if t0 - 1e-12 <= cp.t <= t + 1e-12]
    if len(cps) < 2:
        raise OracleError("insufficient checkpoints for the requested interval")
    cps = sorted(cps, key=lambda c: c.t)
    if abs(cps[0].t - t0) > 1e-9 or abs(cps[-1].t - t) > 1e-9:
        raise OracleError("checkpoint times do not bracket the requested interval")

    vh = to_spectral(grid, cps[0].v) * np.exp(-mu * grid.k2 * (t - t0))
    times = [cp.t for cp in cps]
    integrand = [to_spectral(grid, cp.nonlinear) * np.exp(-mu * grid.k2 * (t - cp.t)) for cp in cps]
    acc = np.zeros_like(vh)
    for i in range(len(times) - 1):
        h = times[i + 1] - times[i]
        acc += 0.5 * h * (integrand[i] + integrand[i + 1])
    return to_physical(grid, vh - acc)


# ---------------------------------------------------------------------------
# first-order commuted residuals

FIRST_ORDER_LABELS = ("dt", "dx1", "dx2", "dx3", "rot1", "rot2", "rot3", "S")


def first_order_ops(dim: int) -> list[str]:
    ops = ["dt"] + [f"dx{a+1}" for a in range(dim)]
    if dim == 3:
        ops += ["rot1", "rot2", "rot3"]
    elif dim == 2:
        ops += ["rot3"]
    return ops + ["S"]


def _op_from_label(label) -> diag.VectorFieldOp:
    if isinstance(label, (tuple, list)):
        if sum(label) != 1:
            raise ValueError("only first-order multi-indices are supported")
        slot = list(label).index(1)
        kinds = [
            diag.VectorFieldOp(diag.KIND_SCALING),
            diag.VectorFieldOp(diag.KIND_TIME),
            diag.VectorFieldOp(diag.KIND_TRANSLATION, 0),
            diag.VectorFieldOp(diag.KIND_TRANSLATION, 1),
            diag.VectorFieldOp(diag.KIND_TRANSLATION, 2),
            diag.VectorFieldOp(diag.KIND_ROTATION, 0),
            diag.VectorFieldOp(diag.KIND_ROTATION, 1),
            diag.VectorFieldOp(diag.KIND_ROTATION, 2),
        ]
        return kinds[slot]
    if label == "dt":
        return diag.VectorFieldOp(diag.KIND_TIME)
    if label == "S":
        return diag.VectorFieldOp(diag.KIND_SCALING)
    if label.startswith("dx"):
        return diag.VectorFieldOp(diag.KIND_TRANSLATION, int(label[2:]) - 1)
    if label.startswith("rot"):
        return diag.VectorFieldOp(diag.KIND_ROTATION, int(label[3:]) - 1)
    raise ValueError(f"unknown operator label {label!r}")


def _jet(grid: Grid, data: list[np.ndarray], t: float) -> diag.FieldJet:
    return diag.FieldJet(grid, np.stack(data), t)


def _apply(jet: diag.FieldJet, op: diag.VectorFieldOp, target: str) -> np.ndarray:
    return diag._apply_op(jet, op, target).data[0]


def commuted_residual(record, a, at_time: float | None = None) -> float:
    """Relative residual of the first-order commuted equations.

    The outer time derivatives are centered finite differences across three
    consecutive checkpoints; everything under the operators substitutes the
    equations.  Returns max(velocity residual, director residual); both sides
    vanish for exact solutions, so the value converges to zero at the
    combined scheme/sampling order.
    """
    op = _op_from_label(a)
    params: Params = record.params
    if params.sigma0 != 1.0 or params.sigma1 != 0.0:
        raise OracleError("commuted residuals are implemented for sigma0=1, sigma1=0")
    cps = sorted(record.checkpoints, key=lambda c: c.t)
    if len(cps) < 3:
        raise OracleError("need at least three checkpoints")
    times = np.array([cp.t for cp in cps])
    steps = np.diff(times)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * steps[0]:
        raise OracleError("checkpoints must be uniformly spaced")
    h = float(steps[0])
    target_t = at_time if at_time is not None else times[len(times) // 2]
    mid = int(np.clip(np.argmin(np.abs(times - target_t)), 1, len(cps) - 2))

    states = [cp.to_state(record.grid) for cp in cps[mid - 1 : mid + 2]]
    grid: Grid = record.grid
    dim = grid.dim

    # Z^a fields on the three snapshots; jet entry m is exactly d_t^m (Z^a u)
    zv, zd = [], []
    jets = []
    for st in states:
        vj, dj = dynamics.solution_jets(st, params, depth=2)
        jets.append((st, vj, dj))
        zd.append(diag._apply_op(_jet(grid, list(dj), st.t), op, "director").data)
        if dim >= 2:
            zv.append(diag._apply_op(_jet(grid, list(vj), st.t), op, "velocity").data)

    st, vj, dj = jets[1]
    # one reference scale for both equations: round-off-level sides on a
    # structurally-vanishing branch must not be compared against themselves
    dtt_zd = (zd[2][0] - 2.0 * zd[1][0] + zd[0][0]) / h**2
    lap_zd = to_physical(grid, -grid.k2 * to_spectral(grid, zd[1][0]))
    scale = 1e-3 * (l2_norm(grid, dtt_zd) + l2_norm(grid, lap_zd))
    res_v = 0.0
    if dim >= 2:
        res_v = _velocity_commuted_residual(grid, params, op, st, vj, dj, zv, h, scale)
    res_d = _director_commuted_residual(grid, params, op, st, vj, dj, zv, zd, h, scale)
    return max(res_v, res_d)


def _gradient_stack(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Gradient of a component stack; derivative axis first."""
    fh = to_spectral(grid, f)
    return np.stack(
        [to_physical(grid, 1j * grid.k[a] * fh) for a in range(grid.dim)], axis=0
    )


def _velocity_commuted_residual(grid, params, op, st, vj, dj, zv, h, ref_scale) -> float:
    from .spectral import leray_hat

    mu = params.mu
    mask = grid.dealias_mask
    v, d = st.v, st.d
    t = st.t

    # d_t Z v - mu Lap Z v is a near-cancellation of the stiff heat part, so
    # difference the heat-weighted history: the centered difference of
    # exp(mu k^2 (s - t)) Zv(s) is exactly that combination, with truncation
    # error free of mu^2 k^4 amplification.
    zv_hats = [to_spectral(grid, z[0]) for z in zv]
    weight = np.exp(mu * grid.k2 * h)
    lhs_hat = (weight * zv_hats[2] - zv_hats[0] / weight) / (2 * h)

    # the viscous operator carries the shift (S - 1) under scaling: put the
    # leftover +mu Lap v on the left-hand side
    djet = _jet(grid, list(dj), t)
    if op.kind == diag.KIND_SCALING:
        # -mu Lap (S - 1) v = +mu k^2 S v - mu k^2 v: the shift leaves -mu k^2 v
        lhs_hat = lhs_hat - mu * grid.k2 * to_spectral(grid, v)
        stress_d = _apply(djet, op, "director") - d
    else:
        stress_d = _apply(djet, op, "director")
    lhs = to_physical(grid, lhs_hat)

    grad_v = _gradient_stack(grid, v)
    grad_zv = _gradient_stack(grid, zv[1][0])
    advection = np.einsum("i...,ij...->j...", zv[1][0], grad_v) + np.einsum(
        "i...,ij...->j...", v, grad_zv
    )
    grad_d = _gradient_stack(grid, d)
    grad_sd = _gradient_stack(grid, stress_d)
    stress_hat = np.zeros((grid.dim,) + grid.spectral_shape, dtype=complex)
    for i in range(grid.dim):
        for j in range(grid.dim):
            tij = np.sum(grad_sd[i] * grad_d[j] + grad_d[i] * grad_sd[j], axis=0)
            stress_hat[i] += 1j * grid.k[j] * (mask * to_spectral(grid, tij))
    forcing = -mask * to_spectral(grid, advection) - stress_hat
    rhs = to_physical(grid, leray_hat(grid, forcing))

    denom = max(l2_norm(grid, lhs), l2_norm(grid, rhs), ref_scale)
    if denom == 0:
        return 0.0
    return l2_norm(grid, lhs - rhs) / denom


def _director_commuted_residual(grid, params, op, st, vj, dj, zv, zd, h, ref_scale) -> float:
    mask = grid.dealias_mask
    v, d, q = st.v, st.d, st.q
    dim = grid.dim

    dtt_zd = (zd[2][0] - 2.0 * zd[1][0] + zd[0][0]) / h**2
    lap_zd = to_physical(grid, -grid.k2 * to_spectral(grid, zd[1][0]))
    lhs = dtt_zd - lap_zd

    # operator-applied companions; jet entry 1 is the exact d_t (Z^a field)
    gv = zv[1][0] if dim >= 2 else np.zeros_like(v)
    g_dtv = zv[1][1] if dim >= 2 else np.zeros_like(v)
    gd = zd[1][0]
    gq = zd[1][1]
    dt_v = vj[1]
    dt_d = q

    grad_d = _gradient_stack(grid, d)
    grad_q = _gradient_stack(grid, q)
    grad_gd = _gradient_stack(grid, gd)
    grad_gq = _gradient_stack(grid, gq)

    w = np.einsum("i...,ic...->c...", v, grad_d)  # (v.grad) d
    gw = np.einsum("i...,ic...->c...", gv, grad_d) + np.einsum(
        "i...,ic...->c...", v, grad_gd
    )

    # quadratic null-form block
    f = 2.0 * (
        np.sum(grad_gd * grad_d, axis=(0, 1)) - np.sum(gq * dt_d, axis=0)
    ) * d
    # cubic blocks with one transported factor
    f = f - 2.0 * (
        np.sum(gw * dt_d, axis=0) + np.sum(w * gq, axis=0)
    ) * d
    f = f - 2.0 * np.sum(gw * w, axis=0) * d
    # multiplier times the operator-applied director
    lam = (
        np.sum(grad_d**2, axis=(0, 1))
        - np.sum(dt_d**2, axis=0)
        - np.sum(w**2, axis=0)
        - 2.0 * np.sum(w * dt_d, axis=0)
    )
    f = f + lam * gd
    # transport of time derivatives
    f = f - (
        2.0 * np.einsum("i...,ic...->c...", gv, grad_q)
        + 2.0 * np.einsum("i...,ic...->c...", v, grad_gq)
        + np.einsum("i...,ic...->c...", g_dtv, grad_d)
        + np.einsum("i...,ic...->c...", dt_v, grad_gd)
    )
    # twice-transported block
    wh = mask * to_spectral(grid, w)
    grad_w = np.stack(
        [to_physical(grid, 1j * grid.k[a] * wh) for a in range(dim)], axis=0
    )
    gwh = mask * to_spectral(grid, gw)
    grad_gw = np.stack(
        [to_physical(grid, 1j * grid.k[a] * gwh) for a in range(dim)], axis=0
    )
    f = f - (
        np.einsum("i...,ic...->c...", gv, grad_w)
        + np.einsum("i...,ic...->c...", v, grad_gw)
    )
    rhs = to_physical(grid, mask * to_spectral(grid, f))

    denom = max(l2_norm(grid, lhs), l2_norm(grid, rhs), ref_scale)
    if denom == 0:
        return 0.0
    return l2_norm(grid, lhs - rhs) / denom


# ---------------------------------------------------------------------------
# weighted Sobolev inequality probes


@dataclass
class SobolevReport:
    max_ratio: dict[str, float]
    per_field: dict[str, list[float | None]]
    failures: list[str] = dc_field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


_INEQUALITIES = ("r_half_linf", "r_linf", "interior_linf", "interior_l6", "interior_l3")


def _lp_norm(grid: Grid, f: np.ndarray, p: float, mask=None) -> float:
    vals = np.abs(f) ** p
    if mask is not None:
        vals = vals * mask
    return float((grid.cell_volume * np.sum(vals)) ** (1.0 / p))


def sobolev_probe(grid: Grid, fields: list[np.ndarray], ts: list[float] | None = None) -> SobolevReport:
    """Empirical constants for the weighted pointwise/interior inequalities.

    Each entry of ``fields`` is a compactly supported scalar sample; ``ts``
    gives the time used by the interior (r <= <t>/2) inequalities, default 0.
    """
    if grid.dim != 3:
        raise SpectralError("the weighted inequalities are three dimensional")
    if ts is None:
        ts = [0.0] * len(fields)
    report = SobolevReport(max_ratio={}, per_field={name: [] for name in _INEQUALITIES})

    for u, t in zip(fields, ts):
        ratios = _probe_single(grid, u, t)
        for name in _INEQUALITIES:
            report.per_field[name].append(ratios[name])
            if ratios[name] is None:
                continue
            if math.isinf(ratios[name]):
                report.failures.append(f"{name}: zero right-hand side with nonzero left")
                continue
            cur = report.max_ratio.get(name, 0.0)
            report.max_ratio[name] = max(cur, ratios[name])
    return report


def _omega_dot_grad(grid: Grid, grads: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.shape)
    for a in range(grid.dim):
        out = out + grid.omega[a] * grads[a]
    return out


def _rotations(grid: Grid, u: np.ndarray) -> list[np.ndarray]:
    grads = gradient(grid, u)
    out = []
    for i in range(3):
        j, k = {0: (1, 2), 1: (2, 0), 2: (0, 1)}[i]
        out.append(grid.x[j] * grads[k] - grid.x[k] * grads[j])
    return out


def _ratio(lhs: float, rhs: float) -> float | None:
    if lhs == 0.0 and rhs == 0.0:
        return None
    if rhs == 0.0:
        return math.inf
    return lhs / rhs


def _probe_single(grid: Grid, u: np.ndarray, t: float) -> dict[str, float | None]:
    r = grid.r
    bracket_r = sigma_weight(r)
    bracket_t = float(sigma_weight(t))
    grads = gradient(grid, u)

    first_rot = [u] + _rotations(grid, u)
    rhs_17 = sum(l2_norm(grid, gradient(grid, w)) for w in first_rot)
    lhs_17 = float(np.max(np.sqrt(bracket_r) * np.abs(u)))

    rhs_18a = sum(l2_norm(grid, _omega_dot_grad(grid, gradient(grid, w))) for w in first_rot)
    second_rot = list(first_rot)
    for w in _rotations(grid, u):
        second_rot += _rotations(grid, w)
    rhs_18b = sum(l2_norm(grid, w) for w in [u] + _rotations(grid, u) + second_rot[len(first_rot):])
    lhs_18 = float(np.max(bracket_r * np.abs(u)))
    rhs_18 = math.sqrt(rhs_18a) * math.sqrt(rhs_18b) if rhs_18a * rhs_18b >= 0 else 0.0

    interior = r <= bracket_t / 2.0
    weight = sigma_weight(t - r)
    grad2_norm_sq = np.zeros(grid.shape)
    for a in range(grid.dim):
        ga = gradient(grid, grads[a])
        grad2_norm_sq = grad2_norm_sq + np.sum(ga**2, axis=0)
    l2u = l2_norm(grid, u)
    wl2_grad = l2_norm(grid, weight * grads)
    wl2_grad2 = l2_norm(grid, weight * np.sqrt(grad2_norm_sq))

    lhs_19 = bracket_t * float(np.max(np.abs(u) * interior))
    rhs_19 = l2u + wl2_grad + wl2_grad2
    lhs_20 = bracket_t * _lp_norm(grid, u, 6.0, interior)
    rhs_20 = l2u + wl2_grad
    lhs_21 = math.sqrt(bracket_t) * _lp_norm(grid, u, 3.0, interior)
    rhs_21 = math.sqrt(l2u) * math.sqrt(wl2_grad + l2u) if l2u > 0 else 0.0

    return {
        "r_half_linf": _ratio(lhs_17, rhs_17),
        "r_linf": _ratio(lhs_18, rhs_18),
        "interior_linf": _ratio(lhs_19, rhs_19),
        "interior_l6": _ratio(lhs_20, rhs_20),
        "interior_l3": _ratio(lhs_21, rhs_21),
    }


# ---------------------------------------------------------------------------
# finite-difference reference step


def _roll_diff(f: np.ndarray, axis: int, dx: float) -> np.ndarray:
    return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * dx)


def _roll_lap(f: np.ndarray, dims: int, dx: float) -> np.ndarray:
    out = np.zeros_like(f)
    for a in range(dims):
        ax = f.ndim - dims + a
        out = out + (np.roll(f, -1, axis=ax) + np.roll(f, 1, axis=ax) - 2 * f) / dx**2
    return out


def fd_reference_step(state: State, params: Params, dt: float) -> State:
    """One forward-Euler step with centered differences and an FD Poisson solve.

    Deliberately independent of the spectral assembly: derivatives are
    second-order stencils, and incompressibility is enforced by the discrete
    projection matched to those stencils.
    """
    grid = state.grid
    dx = grid.dx
    dim = grid.dim
    v, d, q = state.v, state.d, state.q
    s0, s1, mu = params.sigma0, params.sigma1, params.mu
    if s0 == 0:
        raise dynamics.ParabolicRegimeError("sigma0 = 0 is outside the wave regime")

    def cdiff(f, a):
        return _roll_diff(f, f.ndim - dim + a, dx)

    grad_d = np.stack([cdiff(d, a) for a in range(dim)])
    grad_q = np.stack([cdiff(q, a) for a in range(dim)])

    if dim >= 2:
        adv = np.zeros_like(v)
        for a in range(dim):
            adv += v[a] * cdiff(v, a)
        stress_div = np.zeros_like(v)
        for i in range(dim):
            for j in range(dim):
                tij = np.sum(grad_d[i] * grad_d[j], axis=0)
                stress_div[i] += cdiff(tij[np.newaxis], j)[0]
        accel = -adv + mu * _roll_lap(v, dim, dx) - stress_div
        accel = _fd_project(grid, accel)
    else:
        accel = np.zeros_like(v)

    w = np.einsum("i...,ic...->c...", v, grad_d)
    v_grad_q = np.einsum("i...,ic...->c...", v, grad_q)
    grad_w = np.stack([cdiff(w, a) for a in range(dim)])
    v_grad_w = np.einsum("i...,ic...->c...", v, grad_w)
    accel_grad_d = np.einsum("i...,ic...->c...", accel, grad_d)
    dtd = q + w
    lam = np.sum(grad_d**2, axis=(0, 1)) - s0 * np.sum(dtd**2, axis=0)
    dq = (_roll_lap(d, dim, dx) + lam * d - s1 * dtd) / s0 - (
        accel_grad_d + 2.0 * v_grad_q + v_grad_w
    )

    raw = State(
        grid=grid,
        v=v + dt * accel,
        d=d + dt * q,
        q=q + dt * dq,
        t=state.t + dt,
    )
    new, _ = renormalize_constraints(raw)
    return new


def _fd_project(grid: Grid, v: np.ndarray) -> np.ndarray:
    """Remove the central-difference divergence via the matched FD Poisson solve."""
    dim, dx = grid.dim, grid.dx
    div = np.zeros(grid.shape)
    for a in range(dim):
        div = div + _roll_diff(v[a], a, dx)
    div_hat = np.fft.fftn(div)
    sym = np.zeros(grid.shape)
    for a in range(dim):
        k = 2 * np.pi * np.fft.fftfreq(grid.n)
        shape = [1] * dim
        shape[a] = grid.n
        sym = sym + (np.sin(k.reshape(shape)) / dx) ** 2
    inv = np.zeros_like(sym)
    nz = sym > 1e-14
    inv[nz] = 1.0 / sym[nz]
    phi = np.real(np.fft.ifftn(-div_hat * inv))
    out = v.copy()
    for a in range(dim):
        out[a] = out[a] - _roll_diff(phi, a, dx)
    return out
