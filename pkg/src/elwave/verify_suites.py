"""Built-in verification batteries behind `elwave verify --suite ...`.

Each check compares an implementation path against an independent oracle or
structural identity with a fixed threshold, and reports pass/fail.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import diagnostics as diag
from .dynamics import Params, State, evaluate_rhs, solution_jets
from .harness import ScenarioConfig, run_scenario
from .integrator import StepperConfig, step
from .spectral import Grid, l2_norm, to_physical, to_spectral
from .verification import (
    OracleSpec,
    commuted_residual,
    duhamel_reconstruct,
    first_order_ops,
    geodesic_oracle,
    sobolev_probe,
    taylor_green_oracle,
)


@dataclass
class CheckResult:
    name: str
    ok: bool
    value: float = float("nan")
    note: str = ""


def run_suites(which: str) -> list[CheckResult]:
    suites = {
        "oracles": oracle_suite,
        "commutation": commutation_suite,
        "sobolev": sobolev_suite,
        "duhamel": duhamel_suite,
    }
    if which == "all":
        out = []
        for fn in suites.values():
            out.extend(fn())
        return out
    return suites[which]()


# ---------------------------------------------------------------------------


def oracle_suite() -> list[CheckResult]:
    out = []
    grid = Grid(dim=1, n=64, length=2 * np.pi)
    params = Params()
    spec = OracleSpec(kind="geodesic_wavemap", epsilon=0.2)

    errors = []
    for dt in (4e-3, 2e-3):
        state = geodesic_oracle(grid, spec, 0.0)
        cfg = StepperConfig(dt=dt)
        for _ in range(int(round(1.0 / dt))):
            state = step(state, params, cfg)
        exact = geodesic_oracle(grid, spec, 1.0)
        errors.append(l2_norm(grid, state.d - exact.d))
    order = float(np.log2(errors[0] / errors[1]))
    out.append(
        CheckResult("geodesic stepper order", order >= 1.9, order, "(want >= 1.9)")
    )
    out.append(
        CheckResult(
            "geodesic stepper error at t=1",
            errors[1] <= 1e-5,
            errors[1],
            "(want <= 1e-5)",
        )
    )

    g2 = Grid(dim=2, n=32, length=2 * np.pi)
    tg = OracleSpec(kind="taylor_green", epsilon=1.0, mu=1.0)
    state = taylor_green_oracle(g2, tg, 0.0)
    n0 = l2_norm(g2, state.v)
    cfg = StepperConfig(dt=1e-3)
    for _ in range(1000):
        state = step(state, Params(mu=1.0), cfg)
    err = abs(l2_norm(g2, state.v) / n0 - np.exp(-2.0))
    out.append(CheckResult("viscous decay amplitude", err <= 1e-8, err, "(want <= 1e-8)"))

    # oracle states satisfy the assembled equations to spectral accuracy
    g3 = Grid(dim=3, n=32, length=2 * np.pi)
    state = geodesic_oracle(g3, spec, 0.35)
    _, dj = solution_jets(state, params, depth=2)
    x1 = g3.x[0] * np.ones(g3.shape)
    k = 2 * np.pi / g3.length
    u = spec.epsilon * np.cos(k * 0.35) * np.sin(k * x1)
    ut = -spec.epsilon * k * np.sin(k * 0.35) * np.sin(k * x1)
    gam = np.stack([np.sin(u), np.zeros_like(u), np.cos(u)])
    gam_p = np.stack([np.cos(u), np.zeros_like(u), -np.sin(u)])
    exact_dtt = -(k**2) * u * gam_p - ut**2 * gam
    resid = float(np.max(np.abs(dj[2] - exact_dtt)))
    out.append(
        CheckResult("oracle self-consistency residual", resid <= 1e-10, resid, "(want <= 1e-10)")
    )
    return out


# ---------------------------------------------------------------------------


def commutation_suite() -> list[CheckResult]:
    out = []
    grid = Grid(dim=3, n=48, length=24.0)
    rng = np.random.default_rng(5)

    # Gaussian-windowed smooth field: spectrally clean and with sub-1e-10
    # amplitude at the periodic seam, so coordinate weights stay smooth
    f = rng.standard_normal(grid.shape)
    fh = to_spectral(grid, f)
    keep = np.ones(grid.spectral_shape)
    for a in range(3):
        keep = keep * np.exp(-((grid.k_full[a] * 1.5) ** 2))
    f = to_physical(grid, keep * fh)
    f = f * np.exp(-((grid.r / 2.2) ** 2))
    f = f / float(np.max(np.abs(f)))
    jet = diag.FieldJet.lift(grid, f)

    # [d_i, Omega_j] = sum of signed translations, checked per axis pair
    worst = 0.0
    for i in range(3):
        for j in range(3):
            di = diag.VectorFieldOp(diag.KIND_TRANSLATION, i)
            oj = diag.VectorFieldOp(diag.KIND_ROTATION, j)
            lhs = diag._apply_op(diag._apply_op(jet, oj, "scalar"), di, "scalar").data[0]
            rhs = diag._apply_op(diag._apply_op(jet, di, "scalar"), oj, "scalar").data[0]
            commutator = lhs - rhs
            expected = np.zeros_like(f)
            ja, ka = {0: (1, 2), 1: (2, 0), 2: (0, 1)}[j]
            # [d_i, x_ja d_ka - x_ka d_ja] = delta_{i,ja} d_ka - delta_{i,ka} d_ja
            if i == ja:
                expected = diag._apply_op(jet, diag.VectorFieldOp(diag.KIND_TRANSLATION, ka), "scalar").data[0]
            elif i == ka:
                expected = -diag._apply_op(jet, diag.VectorFieldOp(diag.KIND_TRANSLATION, ja), "scalar").data[0]
            worst = max(worst, l2_norm(grid, commutator - expected))
    out.append(CheckResult("translation/rotation commutator", worst <= 1e-9, worst, "(want <= 1e-9)"))

    # (S + 1) d = d S on a synthetic space-time monomial jet u = t * g(x)
    g = f
    u_jet = diag.FieldJet(grid, np.stack([0.7 * g[np.newaxis], g[np.newaxis], np.zeros((1,) + grid.shape)]), t=0.7)
    dx0 = diag.VectorFieldOp(diag.KIND_TRANSLATION, 0)
    s_op = diag.VectorFieldOp(diag.KIND_SCALING)
    lhs = diag._apply_op(diag._apply_op(u_jet, dx0, "scalar"), s_op, "scalar").data[0]
    lhs = lhs + diag._apply_op(u_jet, dx0, "scalar").data[0]
    rhs = diag._apply_op(diag._apply_op(u_jet, s_op, "scalar"), dx0, "scalar").data[0]
    err = l2_norm(grid, lhs - rhs)
    out.append(CheckResult("scaling/translation commutation", err <= 1e-9, err, "(want <= 1e-9)"))

    # first-order commuted equations on a small coupled run
    cfg = ScenarioConfig(
        dim=3,
        n_points=48,
        box_length=16.0,
        epsilon=0.05,
        family="mixed",
        support_radius=3.0,
        horizon=0.4,
        sample_dt=0.04,
        dt=0.04,
        kappa_max=1,
        seed=7,
    )
    record = run_scenario(cfg)
    worst_label, worst_val = "", 0.0
    for label in first_order_ops(3):
        val = commuted_residual(record, label)
        if val > worst_val:
            worst_label, worst_val = label, val
    out.append(
        CheckResult(
            "first-order commuted residuals",
            worst_val <= 5e-3,
            worst_val,
            f"(worst op {worst_label}, want <= 5e-3)",
        )
    )
    return out


# ---------------------------------------------------------------------------


def sobolev_suite() -> list[CheckResult]:
    out = []
    results = {}
    for n in (32, 48):
        grid = Grid(dim=3, n=n, length=16.0)
        fields = _probe_family(grid)
        results[n] = sobolev_probe(grid, fields, ts=[0.0, 1.0, 2.0, 0.5])
    rep = results[48]
    finite = all(np.isfinite(v) and v > 0 for v in rep.max_ratio.values())
    out.append(
        CheckResult(
            "weighted inequality ratios finite",
            finite and rep.ok,
            max(rep.max_ratio.values()),
            f"({rep.max_ratio})" if not finite else "",
        )
    )
    drift = 0.0
    for name, v48 in results[48].max_ratio.items():
        v32 = results[32].max_ratio[name]
        drift = max(drift, abs(v48 - v32) / v48)
    out.append(CheckResult("ratio grid stability", drift <= 0.05, drift, "(want <= 5%)"))

    grid = Grid(dim=3, n=32, length=16.0)
    u = _probe_family(grid)[0]
    r1 = sobolev_probe(grid, [u], ts=[1.0]).max_ratio
    r2 = sobolev_probe(grid, [3.0 * u], ts=[1.0]).max_ratio
    inv = max(abs(r1[k] - r2[k]) / r1[k] for k in r1)
    out.append(CheckResult("amplitude invariance", inv <= 1e-12, inv, "(want ~ 0)"))
    return out


def _probe_family(grid: Grid) -> list[np.ndarray]:
    r = grid.r
    fields = [np.exp(-(r**2)), np.exp(-((r / 1.5) ** 2)) * np.cos(grid.x[0] * np.ones(grid.shape))]
    fields.append(np.exp(-(r**2)) * (grid.x[1] * np.ones(grid.shape)))
    fields.append(np.where(r < 4.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - (r / 4.0) ** 2, 1e-12)), 0.0))
    return fields


# ---------------------------------------------------------------------------


def duhamel_suite() -> list[CheckResult]:
    # roomy box: at mu = 1 the heat tails must not reach the boundary shell
    out = []
    base = dict(
        dim=2,
        n_points=96,
        box_length=48.0,
        epsilon=0.05,
        family="mixed",
        support_radius=3.0,
        horizon=1.0,
        kappa_max=1,
        seed=3,
        dt=0.005,
    )
    errors = {}
    for sample_dt in (0.04, 0.02):
        cfg = ScenarioConfig(sample_dt=sample_dt, **base)
        rec = run_scenario(cfg)
        recon = duhamel_reconstruct(rec, 0.0, 1.0)
        final = rec.checkpoints[-1]
        errors[sample_dt] = l2_norm(rec.grid, recon - final.v) / l2_norm(rec.grid, final.v)
    out.append(
        CheckResult(
            "reconstruction matches stepper",
            errors[0.02] <= 1e-3,
            errors[0.02],
            "(want <= 1e-3)",
        )
    )
    factor = errors[0.04] / errors[0.02]
    out.append(
        CheckResult(
            "second-order sampling refinement",
            2.5 <= factor <= 8.0,
            factor,
            "(want ~ 4x)",
        )
    )

    # with zero viscosity the heat factor degenerates to plain time integration
    grid = Grid(dim=2, n=32, length=2 * np.pi)
    rng = np.random.default_rng(11)
    from .harness import Checkpoint, RunRecord

    cfg0 = ScenarioConfig(sample_dt=0.1, **{**base, "n_points": 32, "mu": 0.0})
    times = [0.0, 0.1, 0.2, 0.3]
    cps = []
    v0 = np.stack([np.sin(grid.x[0]) * np.ones(grid.shape), np.zeros(grid.shape)])
    for t in times:
        nl = np.stack(
            [
                np.cos(grid.x[1]) * np.ones(grid.shape) * (1.0 + t),
                np.zeros(grid.shape),
            ]
        )
        cps.append(Checkpoint(t=t, v=v0.copy(), d=np.zeros((3,) + grid.shape), q=np.zeros((3,) + grid.shape), nonlinear=nl))
    rec0 = RunRecord(
        config=cfg0, frames=[], checkpoints=cps, status="completed", hlambda_initial=0.0, t_final=0.3
    )
    recon = duhamel_reconstruct(rec0, 0.0, 0.3)
    # trapezoid of nl over [0, 0.3] subtracted from v(0)
    expected = v0 - np.stack(
        [np.cos(grid.x[1]) * np.ones(grid.shape) * np.trapezoid([1.0, 1.1, 1.2, 1.3], times), np.zeros(grid.shape)]
    )
    err = float(np.max(np.abs(recon - expected)))
    out.append(CheckResult("inviscid degeneration", err <= 1e-12, err, "(want ~ 0)"))
    return out
