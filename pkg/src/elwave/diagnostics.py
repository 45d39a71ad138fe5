"""Vector-field calculus diagnostics on solution snapshots.

Operators: time derivative, translations, rotations (with the algebraic
component correction on velocity), and the scaling t*d_t + r*d_r.  Compound
applications Z^a follow the fixed pipeline order "scaling powers first, then
the generator string", applied left to right as written.

Time derivatives never use finite differences: fields enter as time jets
[u, u_t, u_tt, ...] obtained by substituting the equations (see
``dynamics.solution_jets``); applying the scaling operator or a time
derivative consumes one jet order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import dynamics
from .dynamics import Params, Rhs, State
from .spectral import Grid, sigma_weight, to_physical, to_spectral

_ROTATION_AXES = {0: (1, 2), 1: (2, 0), 2: (0, 1)}  # Omega_i = x_j d_k - x_k d_j

KIND_TIME = "time_derivative"
KIND_TRANSLATION = "translation"
KIND_ROTATION = "rotation"
KIND_SCALING = "scaling"


class InsufficientHistoryError(ValueError):
    """A time derivative was requested beyond the available jet depth."""


class InsufficientDataError(ValueError):
    """Monitor input series has too few frames."""


class ModifiedEnergyRegimeError(RuntimeError):
    """Modified energy left its equivalence band with the plain energy."""


@dataclass(frozen=True)
class VectorFieldOp:
    kind: str
    axis: int = 0

    def __post_init__(self):
        if self.kind not in (KIND_TIME, KIND_TRANSLATION, KIND_ROTATION, KIND_SCALING):
            raise ValueError(f"unknown vector-field op kind {self.kind!r}")


def generator_ops(dim: int) -> list[VectorFieldOp]:
    """Pipeline-ordered generators: S, d_t, translations, rotations."""
    ops = [VectorFieldOp(KIND_SCALING), VectorFieldOp(KIND_TIME)]
    ops += [VectorFieldOp(KIND_TRANSLATION, a) for a in range(dim)]
    if dim == 3:
        ops += [VectorFieldOp(KIND_ROTATION, a) for a in range(3)]
    elif dim == 2:
        ops += [VectorFieldOp(KIND_ROTATION, 2)]
    return ops


# ---------------------------------------------------------------------------
# field jets and operator application


@dataclass
class FieldJet:
    """A component stack with time-derivative orders along the leading axis."""

    grid: Grid
    data: np.ndarray  # (orders, comps, *grid.shape)
    t: float
    _spec: np.ndarray | None = dc_field(default=None, repr=False)

    @property
    def depth(self) -> int:
        return self.data.shape[0] - 1

    @property
    def spec(self) -> np.ndarray:
        if self._spec is None:
            self._spec = to_spectral(self.grid, self.data)
        return self._spec

    @classmethod
    def lift(cls, grid: Grid, values: np.ndarray, t: float = 0.0) -> "FieldJet":
        if values.ndim == grid.dim:
            values = values[np.newaxis]
        return cls(grid=grid, data=values[np.newaxis].copy(), t=t)


def _apply_A(axis: int, stack: np.ndarray, dim: int) -> np.ndarray:
    """Algebraic rotation correction on a velocity component stack (axis 1)."""
    j, k = _ROTATION_AXES[axis]
    out = np.zeros_like(stack)
    if j < dim and k < dim:
        out[:, j] = stack[:, k]
        out[:, k] = -stack[:, j]
    return out


def apply_vectorfield(
    f: "FieldJet | np.ndarray",
    op: VectorFieldOp,
    hist: "FieldHistory | None" = None,
    target: str = "scalar",
) -> FieldJet:
    """Apply one generator; returns a jet one order shallower for d_t and S.

    ``f`` may be a plain array only for purely spatial operators (or when
    ``hist`` can identify it as a solution field and supply its jet).
    """
    if isinstance(f, np.ndarray):
        if hist is not None:
            jet = hist.jet_for(f)
            if jet is not None:
                f = jet
        if isinstance(f, np.ndarray):
            if op.kind in (KIND_TIME, KIND_SCALING):
                raise InsufficientHistoryError(
                    f"{op.kind} requires a FieldJet or a FieldHistory entry"
                )
            f = FieldJet.lift(hist.grid if hist is not None else _infer_grid(f), f)
    return _apply_op(f, op, target)


def _infer_grid(f: np.ndarray) -> Grid:
    raise TypeError("plain arrays need an explicit FieldHistory to infer the grid")


def _apply_op(jet: FieldJet, op: VectorFieldOp, target: str) -> FieldJet:
    grid = jet.grid
    nj = jet.data.shape[0]
    if op.kind == KIND_TIME:
        if nj < 2:
            raise InsufficientHistoryError("time derivative exhausts the jet depth")
        out = FieldJet(grid, jet.data[1:], jet.t)
        if jet._spec is not None:
            out._spec = jet._spec[1:]
        return out

    if op.kind == KIND_TRANSLATION:
        if op.axis >= grid.dim:
            raise ValueError(f"translation axis {op.axis} out of range")
        spec = 1j * grid.k[op.axis] * jet.spec
        out = FieldJet(grid, to_physical(grid, spec), jet.t)
        out._spec = spec
        return out

    if op.kind == KIND_ROTATION:
        if grid.dim == 1:
            raise ValueError("rotations need dim >= 2")
        if grid.dim == 2 and op.axis != 2:
            raise ValueError("only the in-plane rotation exists in 2D")
        ja, ka = _ROTATION_AXES[op.axis]
        dj = to_physical(grid, 1j * grid.k[ja] * jet.spec)
        dk = to_physical(grid, 1j * grid.k[ka] * jet.spec)
        data = grid.x[ja] * dk - grid.x[ka] * dj
        if target == "velocity":
            data = data + _apply_A(op.axis, jet.data, grid.dim)
        return FieldJet(grid, data, jet.t)

    # scaling: (S u)^(m) = t u^(m+1) + m u^(m) + r d_r u^(m)
    if nj < 2:
        raise InsufficientHistoryError("scaling operator exhausts the jet depth")
    out = np.empty_like(jet.data[:-1])
    for m in range(nj - 1):
        rdr = np.zeros_like(jet.data[m])
        for a in range(grid.dim):
            rdr += grid.x[a] * to_physical(grid, 1j * grid.k[a] * jet.spec[m])
        out[m] = jet.t * jet.data[m + 1] + m * jet.data[m] + rdr
    return FieldJet(grid, out, jet.t)


# ---------------------------------------------------------------------------
# history


@dataclass
class Snapshot:
    state: State
    rhs: Rhs


class FieldHistory:
    """Recent states with their equation right-hand sides.

    Supplies exact time jets of the solution fields for the d_t and scaling
    operators; jets are built by substituting the equations, never by finite
    differences in time.
    """

    def __init__(self, params: Params, maxlen: int = 4):
        self.params = params
        self.maxlen = maxlen
        self._snaps: list[Snapshot] = []
        self._jets: dict[tuple[float, int], tuple[np.ndarray, np.ndarray]] = {}

    @property
    def grid(self) -> Grid:
        return self.latest.state.grid

    def push(self, state: State, rhs: Rhs | None = None) -> None:
        if rhs is None:
            rhs = dynamics.evaluate_rhs(state, self.params)
        self._snaps.append(Snapshot(state=state, rhs=rhs))
        if len(self._snaps) > self.maxlen:
            self._snaps.pop(0)
        self._jets = {k: v for k, v in self._jets.items() if k[0] == state.t}

    @classmethod
    def from_state(cls, state: State, params: Params) -> "FieldHistory":
        hist = cls(params)
        hist.push(state)
        return hist

    @property
    def latest(self) -> Snapshot:
        if not self._snaps:
            raise InsufficientHistoryError("empty history")
        return self._snaps[-1]

    def _solution_jets(self, depth: int) -> tuple[np.ndarray, np.ndarray]:
        snap = self.latest
        key = (snap.state.t, depth)
        if key not in self._jets:
            self._jets[key] = dynamics.solution_jets(snap.state, self.params, depth)
        return self._jets[key]

    def velocity_jet(self, depth: int) -> FieldJet:
        vj, _ = self._solution_jets(depth)
        return FieldJet(self.grid, vj[: depth + 1], self.latest.state.t)

    def director_jet(self, depth: int) -> FieldJet:
        _, dj = self._solution_jets(depth)
        return FieldJet(self.grid, dj[: depth + 1], self.latest.state.t)

    def jet_for(self, f: np.ndarray) -> FieldJet | None:
        """Identify a solution field by identity and return a depth-1 jet."""
        snap = self.latest
        st = snap.state
        if f is st.v:
            data = np.stack([st.v, snap.rhs.dv_dt])
        elif f is st.d:
            data = np.stack([st.d, st.q])
        elif f is st.q:
            if snap.rhs.dq_dt is None:
                return None
            data = np.stack([st.q, snap.rhs.dq_dt])
        else:
            return None
        return FieldJet(self.grid, data, st.t)


# ---------------------------------------------------------------------------
# frames


@dataclass
class DiagnosticsFrame:
    """All monitored quantities at one sample time (kappa_max = K)."""

    t: float
    e_v: list[float]  # E^v_k, k = 0..K
    e_d: list[float]  # E^d_k, k = 1..K+1
    x_d: list[float]  # X^d_k, k = 2..K+1
    linf_v: float
    linf_grad_v: float
    linf_grad2_v: float
    linf_dtv: float
    linf_dzd: list[float]  # per order 0..K
    good_unknown: float
    nullform_ratio: float
    mod_energy: float
    div_v_max: float
    constraint_drift: float
    boundary_mass: float

    @staticmethod
    def csv_header(kappa_max: int) -> list[str]:
        cols = ["t"]
        cols += [f"E_v_{k}" for k in range(kappa_max + 1)]
        cols += [f"E_d_{k}" for k in range(1, kappa_max + 2)]
        cols += [f"X_d_{k}" for k in range(2, kappa_max + 2)]
        cols += ["linf_v", "linf_grad_v", "linf_grad2_v", "linf_dtv"]
        cols += [f"linf_dZd_{k}" for k in range(kappa_max + 1)]
        cols += [
            "good_unknown",
            "nullform_ratio",
            "mod_energy",
            "div_v_max",
            "constraint_drift",
            "boundary_mass",
        ]
        return cols

    def to_row(self) -> list[float]:
        return (
            [self.t]
            + self.e_v
            + self.e_d
            + self.x_d
            + [self.linf_v, self.linf_grad_v, self.linf_grad2_v, self.linf_dtv]
            + self.linf_dzd
            + [
                self.good_unknown,
                self.nullform_ratio,
                self.mod_energy,
                self.div_v_max,
                self.constraint_drift,
                self.boundary_mass,
            ]
        )

    @classmethod
    def from_row(cls, row: list[float], kappa_max: int) -> "DiagnosticsFrame":
        it = iter(row)
        t = next(it)
        e_v = [next(it) for _ in range(kappa_max + 1)]
        e_d = [next(it) for _ in range(kappa_max + 1)]
        x_d = [next(it) for _ in range(kappa_max)]
        linf_v, linf_grad_v, linf_grad2_v, linf_dtv = (next(it) for _ in range(4))
        linf_dzd = [next(it) for _ in range(kappa_max + 1)]
        rest = [next(it) for _ in range(6)]
        return cls(
            t=t,
            e_v=e_v,
            e_d=e_d,
            x_d=x_d,
            linf_v=linf_v,
            linf_grad_v=linf_grad_v,
            linf_grad2_v=linf_grad2_v,
            linf_dtv=linf_dtv,
            linf_dzd=linf_dzd,
            good_unknown=rest[0],
            nullform_ratio=rest[1],
            mod_energy=rest[2],
            div_v_max=rest[3],
            constraint_drift=rest[4],
            boundary_mass=rest[5],
        )

    def e_v_at(self, k: int) -> float:
        return self.e_v[k]

    def e_d_at(self, k: int) -> float:
        return self.e_d[k - 1]

    def x_d_at(self, k: int) -> float:
        return self.x_d[k - 2]


# ---------------------------------------------------------------------------
# the one-pass engine


class DiagnosticsEngine:
    """Shared evaluation of every frame quantity in one sweep over Z^a."""

    def __init__(
        self,
        grid: Grid,
        params: Params,
        kappa_max: int = 2,
        lightcone_kappa: int | None = None,
    ):
        if not 0 <= kappa_max <= 4:
            raise ValueError("kappa_max must lie in [0, 4]")
        self.grid = grid
        self.params = params
        self.kappa_max = kappa_max
        if lightcone_kappa is None:
            lightcone_kappa = max(0, min(kappa_max - 1, 1))
        if lightcone_kappa > max(kappa_max - 1, 0):
            raise ValueError("lightcone aggregation order exceeds available jet depth")
        self.lightcone_kappa = lightcone_kappa
        self.gens = generator_ops(grid.dim)

    # -- helpers ------------------------------------------------------------

    def _l2sq(self, f: np.ndarray) -> float:
        return self.grid.cell_volume * float(np.sum(f * f))

    def _l2sq_masked(self, f: np.ndarray, mask: np.ndarray) -> float:
        return self.grid.cell_volume * float(np.sum((f * f) * mask))

    # -- the sweep ----------------------------------------------------------

    def frame(
        self,
        hist: FieldHistory,
        *,
        constraint_drift: float = 0.0,
    ) -> DiagnosticsFrame:
        grid, K = self.grid, self.kappa_max
        state = hist.latest.state
        t = state.t
        bracket_t = float(sigma_weight(t))
        cone = grid.r >= bracket_t / 2.0
        weight_rt = sigma_weight(grid.r - t)

        vjet = hist.velocity_jet(K) if grid.dim >= 2 else None
        djet = hist.director_jet(K + 1)

        acc = _Accumulators(K)
        base = _NodeFields(self, vjet, djet, level=0)
        self._visit(acc, base, cone, weight_rt, bracket_t, t)
        self._descend(acc, base, 0, 0, cone, weight_rt, bracket_t, t)

        # level-0 pointwise profile
        linf_v = linf_grad_v = linf_grad2_v = linf_dtv = 0.0
        div_v_max = 0.0
        if vjet is not None:
            linf_v = float(np.max(np.abs(vjet.data[0])))
            vh = vjet.spec[0]
            gv = np.stack(
                [to_physical(grid, 1j * grid.k[a] * vh) for a in range(grid.dim)]
            )
            linf_grad_v = float(np.max(np.abs(gv)))
            g2max = 0.0
            for a in range(grid.dim):
                for b in range(a, grid.dim):
                    g2 = to_physical(grid, -grid.k[a] * grid.k[b] * vh)
                    g2max = max(g2max, float(np.max(np.abs(g2))))
            linf_grad2_v = g2max
            if vjet.depth >= 1:
                linf_dtv = float(np.max(np.abs(vjet.data[1])))
            div_hat = np.zeros(grid.spectral_shape, dtype=complex)
            for a in range(grid.dim):
                div_hat += 1j * grid.k[a] * vh[a]
            vmax = float(np.max(np.abs(vjet.data[0])))
            div_v_max = (
                float(np.max(np.abs(to_physical(grid, div_hat)))) / vmax if vmax > 0 else 0.0
            )

        # nullform ratio on the exterior region
        grad_d0 = base.d_space_derivs()
        qd = djet.data[1]
        num_sq = 0.0
        for a in range(grid.dim):
            fld = grid.omega[a] * qd + grad_d0[a]
            num_sq += self._l2sq_masked(fld, cone)
        den_sq = self._l2sq_masked(qd, cone)
        for a in range(grid.dim):
            den_sq += self._l2sq_masked(grad_d0[a], cone)
        nullform_ratio = math.sqrt(num_sq / den_sq) if den_sq > 0 else 0.0

        # boundary mass: energy fraction in the outer shell
        shell = grid.boundary_shell
        density = np.sum(djet.data[1] ** 2, axis=0) + sum(
            np.sum(grad_d0[a] ** 2, axis=0) for a in range(grid.dim)
        )
        if vjet is not None:
            density = density + np.sum(vjet.data[0] ** 2, axis=0)
        total = float(np.sum(density))
        boundary_mass = float(np.sum(density[shell])) / total if total > 0 else 0.0

        e_v_levels = np.cumsum(acc.ev)
        e_d_levels = np.cumsum(acc.ed)
        x_levels = np.cumsum(acc.xd)[:K]
        linf_dzd = []
        running = 0.0
        for k in range(K + 1):
            running = max(running, acc.linf_dzd[k])
            linf_dzd.append(running)

        mod_energy = float(
            0.5 * e_d_levels[K] - 0.5 * acc.me_vzd + acc.me_cross + 0.5 * acc.me_zvd
        )
        good_unknown = math.sqrt(sum(acc.gu[: self.lightcone_kappa + 1]))

        return DiagnosticsFrame(
            t=t,
            e_v=[float(x) for x in e_v_levels],
            e_d=[float(x) for x in e_d_levels],
            x_d=[float(x) for x in x_levels],
            linf_v=linf_v,
            linf_grad_v=linf_grad_v,
            linf_grad2_v=linf_grad2_v,
            linf_dtv=linf_dtv,
            linf_dzd=linf_dzd,
            good_unknown=good_unknown,
            nullform_ratio=nullform_ratio,
            mod_energy=mod_energy,
            div_v_max=div_v_max,
            constraint_drift=constraint_drift,
            boundary_mass=boundary_mass,
        )

    def _descend(self, acc, node, level, start_gen, cone, weight_rt, bracket_t, t):
        if level == self.kappa_max:
            return
        for g in range(start_gen, len(self.gens)):
            child = node.child(self.gens[g], level + 1)
            self._visit(acc, child, cone, weight_rt, bracket_t, t)
            self._descend(acc, child, level + 1, g, cone, weight_rt, bracket_t, t)

    def _visit(self, acc, node, cone, weight_rt, bracket_t, t):
        grid, K = self.grid, self.kappa_max
        j = node.level
        if node.vjet is not None:
            acc.ev[j] += self._l2sq(node.vjet.data[0])
        djet = node.djet

        # first derivatives of Z^a d
        d_time = djet.data[1]
        d_space = node.d_space_derivs()
        acc.ed[j] += self._l2sq(d_time)
        lmax = float(np.max(np.abs(d_time)))
        for a in range(grid.dim):
            acc.ed[j] += self._l2sq(d_space[a])
            lmax = max(lmax, float(np.max(np.abs(d_space[a]))))
        acc.linf_dzd[j] = max(acc.linf_dzd[j], lmax)

        # modified-energy pieces
        if node.vjet is not None:
            base_grad_d = node.base_grad_d
            v0 = node.base_v0
            v_adv_zd = np.einsum("i...,ic...->c...", v0, np.stack(d_space))
            zv_adv_d = np.einsum("i...,ic...->c...", node.vjet.data[0], base_grad_d)
            acc.me_vzd += self._l2sq(v_adv_zd)
            acc.me_zvd += self._l2sq(zv_adv_d)
            acc.me_cross += grid.cell_volume * float(np.sum(zv_adv_d * d_time))

        # second derivatives: weighted norm and light-cone good unknown
        if j <= K - 1 and djet.depth >= 2:
            d2 = node.d_second_derivs()
            xsum = 0.0
            for (alpha, beta), fld in d2.items():
                mult = 1.0 if alpha == beta else 2.0
                xsum += mult * self._l2sq(weight_rt * fld)
            acc.xd[j] += xsum
            if j <= self.lightcone_kappa:
                gu = 0.0
                for alpha in range(grid.dim + 1):  # first-derivative choice: t, x_1..x_dim
                    tt = d2[(0, alpha)] if (0, alpha) in d2 else d2[(alpha, 0)]
                    radial = np.zeros_like(tt)
                    for b in range(grid.dim):
                        key = (min(alpha, b + 1), max(alpha, b + 1))
                        radial += grid.omega[b] * d2[key]
                    gu += self._l2sq_masked(bracket_t * (tt + radial), cone)
                acc.gu[j] += gu


class _Accumulators:
    def __init__(self, K: int):
        self.ev = np.zeros(K + 1)
        self.ed = np.zeros(K + 1)
        self.xd = np.zeros(max(K, 1))
        self.gu = np.zeros(K + 1)
        self.linf_dzd = np.zeros(K + 1)
        self.me_vzd = 0.0
        self.me_cross = 0.0
        self.me_zvd = 0.0


class _NodeFields:
    """One Z^a node: velocity and director jets plus cached derivatives."""

    def __init__(self, engine: DiagnosticsEngine, vjet, djet, level: int, base=None):
        self.engine = engine
        self.vjet = vjet
        self.djet = djet
        self.level = level
        root = base if base is not None else self
        self.base_grad_d = getattr(root, "base_grad_d", None)
        self.base_v0 = getattr(root, "base_v0", None)
        self._d_space = None
        self._d_second = None
        if base is None:
            grid = engine.grid
            self.base_grad_d = np.stack(
                [
                    to_physical(grid, 1j * grid.k[a] * self.djet.spec[0])
                    for a in range(grid.dim)
                ],
                axis=0,
            )
            if vjet is not None:
                self.base_v0 = vjet.data[0]

    def child(self, op: VectorFieldOp, level: int) -> "_NodeFields":
        eng = self.engine
        K = eng.kappa_max
        need_d = K + 2 - level  # orders required at this depth
        need_v = K + 1 - level

        def shrink(jet: FieldJet, need: int) -> FieldJet:
            # pre-truncate before purely spatial ops so excess orders are never
            # transformed; time-type ops consume exactly one order anyway
            if op.kind in (KIND_TIME, KIND_SCALING) or jet.data.shape[0] <= need:
                return jet
            view = FieldJet(jet.grid, jet.data[:need], jet.t)
            view._spec = jet.spec[:need]
            return view

        dj = _apply_op(shrink(self.djet, need_d), op, "director")
        dj.data = dj.data[:need_d]
        if dj._spec is not None:
            dj._spec = dj._spec[:need_d]
        vj = None
        if self.vjet is not None:
            vj = _apply_op(shrink(self.vjet, need_v), op, "velocity")
            vj.data = vj.data[:need_v]
            if vj._spec is not None:
                vj._spec = vj._spec[:need_v]
        return _NodeFields(eng, vj, dj, level, base=self)

    def d_space_derivs(self) -> list[np.ndarray]:
        if self._d_space is None:
            grid = self.engine.grid
            self._d_space = [
                to_physical(grid, 1j * grid.k[a] * self.djet.spec[0]) for a in range(grid.dim)
            ]
        return self._d_space

    def d_second_derivs(self) -> dict[tuple[int, int], np.ndarray]:
        """All second derivatives; key (alpha, beta) with 0 = time, i = axis i-1."""
        if self._d_second is None:
            grid = self.engine.grid
            spec = self.djet.spec
            out: dict[tuple[int, int], np.ndarray] = {}
            out[(0, 0)] = self.djet.data[2]
            for a in range(grid.dim):
                out[(0, a + 1)] = to_physical(grid, 1j * grid.k[a] * spec[1])
            for a in range(grid.dim):
                for b in range(a, grid.dim):
                    out[(a + 1, b + 1)] = to_physical(
                        grid, -grid.k[a] * grid.k[b] * spec[0]
                    )
            self._d_second = out
        return self._d_second


# ---------------------------------------------------------------------------
# public single-quantity operations (thin wrappers over the engine)


def generalized_energy(state: State, hist: FieldHistory, kappa: int) -> tuple[float, float]:
    """(E^v_kappa, E^d_{kappa+1}) summed over all |a| <= kappa."""
    engine = DiagnosticsEngine(state.grid, hist.params, kappa_max=kappa)
    fr = engine.frame(hist)
    return fr.e_v_at(kappa), fr.e_d_at(kappa + 1)


def weighted_X_norm(state: State, hist: FieldHistory, kappa: int) -> float:
    """Klainerman-Sideris weighted norm X^d_kappa (kappa >= 2)."""
    if kappa < 2:
        raise ValueError("weighted norm defined for kappa >= 2")
    engine = DiagnosticsEngine(state.grid, hist.params, kappa_max=kappa - 1)
    fr = engine.frame(hist)
    return fr.x_d_at(kappa)


def lightcone_diagnostics(
    state: State, hist: FieldHistory, kappa: int
) -> tuple[float, float]:
    """(good-unknown norm aggregated over |a| <= kappa, nullform ratio)."""
    engine = DiagnosticsEngine(
        state.grid, hist.params, kappa_max=max(kappa + 1, 1), lightcone_kappa=kappa
    )
    fr = engine.frame(hist)
    bracket_t = float(sigma_weight(state.t))
    if not bool(np.any(state.grid.r >= bracket_t / 2.0)):
        return (math.nan, math.nan)
    return fr.good_unknown, fr.nullform_ratio


@dataclass
class DecayProfile:
    linf_v: float
    linf_grad_v: float
    linf_grad2_v: float
    linf_dtv: float
    linf_dzd: list[float]


def pointwise_decay_profile(state: State, hist: FieldHistory) -> DecayProfile:
    engine = DiagnosticsEngine(state.grid, hist.params)
    fr = engine.frame(hist)
    return DecayProfile(
        linf_v=fr.linf_v,
        linf_grad_v=fr.linf_grad_v,
        linf_grad2_v=fr.linf_grad2_v,
        linf_dtv=fr.linf_dtv,
        linf_dzd=fr.linf_dzd,
    )


def modified_energy(
    state: State, hist: FieldHistory, kappa: int, *, strict: bool = False
) -> float:
    """Corrected director energy; equivalent to E^d_{kappa+1}/2 for small data."""
    engine = DiagnosticsEngine(state.grid, hist.params, kappa_max=kappa)
    fr = engine.frame(hist)
    value = fr.mod_energy
    half = 0.5 * fr.e_d_at(kappa + 1)
    if strict and half > 0 and not (0.5 * half <= value <= 2.0 * half):
        raise ModifiedEnergyRegimeError(
            f"modified energy {value:.3e} left the band around {half:.3e}"
        )
    return value


@dataclass
class MonitorReport:
    velocity_sup_ratio: float
    lower_director_sup_ratio: float
    growth_exponent: float
    growth_residual: float
    weighted_ratio_sup: dict[int, float]
    linf_decay_sup: float
    bootstrap_constant: float  # sup_t (E^v_K + E^d_{K-1}) / epsilon

    @property
    def headline_weighted_ratio(self) -> float:
        return self.weighted_ratio_sup[max(self.weighted_ratio_sup)]


def bootstrap_monitor(frames: list[DiagnosticsFrame], epsilon: float) -> MonitorReport:
    """Boundedness/growth summary of an energy time series."""
    if len(frames) < 4:
        raise InsufficientDataError("need at least 4 frames")
    frames = sorted(frames, key=lambda f: f.t)
    K = len(frames[0].e_v) - 1

    ev0 = frames[0].e_v_at(K)
    edl0 = frames[0].e_d_at(max(K - 1, 1))
    vel_ratio = max(
        (f.e_v_at(K) / ev0 if ev0 > 0 else (0.0 if f.e_v_at(K) == 0 else math.inf))
        for f in frames
    )
    low_ratio = max(
        (
            f.e_d_at(max(K - 1, 1)) / edl0
            if edl0 > 0
            else (0.0 if f.e_d_at(max(K - 1, 1)) == 0 else math.inf)
        )
        for f in frames
    )

    ts = np.array([f.t for f in frames])
    top = np.array([f.e_d_at(K + 1) for f in frames])
    if np.all(top > 0):
        lx = np.log(sigma_weight(ts))
        ly = np.log(top)
        coef, res = _polyfit_line(lx, ly)
        growth_exponent, growth_residual = coef, res
    else:
        growth_exponent, growth_residual = 0.0, 0.0

    ratio_sup: dict[int, float] = {}
    for k in range(2, K + 2):
        vals = []
        for f in frames:
            ed = f.e_d_at(k)
            if ed > 0:
                vals.append(f.x_d_at(k) / ed)
        ratio_sup[k] = max(vals) if vals else 0.0

    linf_vals = []
    for f in frames:
        ed = f.e_d_at(K + 1)
        if ed > 0:
            linf_vals.append(float(sigma_weight(f.t)) * f.linf_dzd[K] / math.sqrt(ed))
    linf_sup = max(linf_vals) if linf_vals else 0.0

    c0 = max(f.e_v_at(K) + f.e_d_at(max(K - 1, 1)) for f in frames) / epsilon

    return MonitorReport(
        velocity_sup_ratio=float(vel_ratio),
        lower_director_sup_ratio=float(low_ratio),
        growth_exponent=float(growth_exponent),
        growth_residual=float(growth_residual),
        weighted_ratio_sup=ratio_sup,
        linf_decay_sup=float(linf_sup),
        bootstrap_constant=float(c0),
    )


def _polyfit_line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return float(slope), float(np.sqrt(np.mean(resid**2)))
