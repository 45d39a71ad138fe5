"""Scenario construction, run orchestration, persistence and decay fitting.

A scenario is described by a flat JSON document (strict schema, unknown keys
rejected).  Runs produce a RunRecord: the config, a time series of
diagnostics frames, optional field checkpoints carrying the projected
nonlinear momentum term, and a termination status.  Records persist to a
directory with bit-exact round-tripping.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from .diagnostics import (
    DiagnosticsEngine,
    DiagnosticsFrame,
    FieldHistory,
    FieldJet,
    _apply_op,
    generator_ops,
)
from .dynamics import Params, State, evaluate_rhs, total_energy
from .integrator import BlowupError, StepperConfig, stability_dt, step_with_info
from .spectral import Grid, curl, l2_norm, perp_gradient, to_physical, to_spectral

FAMILIES = ("bump-director", "bump-velocity", "mixed", "geodesic")
STATUS_COMPLETED = "completed"
STATUS_BLOWUP = "blowup"
STATUS_BOUNDARY = "boundary-contact"

BOUNDARY_MASS_LIMIT = 1e-8

_REQUIRED_KEYS = {
    "dim": int,
    "n_points": int,
    "box_length": (int, float),
    "mu": (int, float),
    "sigma0": (int, float),
    "sigma1": (int, float),
    "epsilon": (int, float),
    "family": str,
    "support_radius": (int, float),
    "horizon": (int, float),
    "sample_dt": (int, float),
    "kappa_max": int,
    "seed": int,
}
_OPTIONAL_KEYS = {
    "dt": (int, float, type(None)),
    "cfl_safety": (int, float),
    "dealias_fraction": (int, float),
    "checkpoint_dt": (int, float, type(None)),
    "lightcone_kappa": (int, type(None)),
    "mode": int,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    dim: int
    n_points: int
    box_length: float
    mu: float = 1.0
    sigma0: float = 1.0
    sigma1: float = 0.0
    epsilon: float = 1e-2
    family: str = "mixed"
    support_radius: float = 1.0
    horizon: float = 1.0
    sample_dt: float = 0.1
    kappa_max: int = 2
    seed: int = 0
    dt: float | None = None
    cfl_safety: float = 0.5
    dealias_fraction: float = 2.0 / 3.0
    checkpoint_dt: float | None = None
    lightcone_kappa: int | None = None
    mode: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown perturbation family {self.family!r}")
        if self.epsilon <= 0:
            raise ConfigError("epsilon must be positive")
        if self.family != "geodesic" and self.support_radius + self.horizon >= self.box_length / 2:
            raise ConfigError(
                "support radius + horizon must stay below half the box "
                "(the light cone must not reach the boundary)"
            )
        if self.sample_dt <= 0 or self.horizon <= 0:
            raise ConfigError("horizon and sample_dt must be positive")

    @property
    def grid(self) -> Grid:
        return Grid(
            dim=self.dim,
            n=self.n_points,
            length=float(self.box_length),
            dealias_fraction=self.dealias_fraction,
        )

    @property
    def params(self) -> Params:
        return Params(sigma0=self.sigma0, sigma1=self.sigma1, mu=self.mu)

    def to_json_dict(self) -> dict:
        out = asdict(self)
        return out

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ScenarioConfig":
        known = dict(_REQUIRED_KEYS) | dict(_OPTIONAL_KEYS)
        unknown = set(doc) - set(known)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = set(_REQUIRED_KEYS) - set(doc)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        for key, types in known.items():
            if key in doc and not isinstance(doc[key], types):
                raise ConfigError(f"config key {key!r} has wrong type")
        return cls(**doc)

    @classmethod
    def from_json_file(cls, path: str) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


# ---------------------------------------------------------------------------
# initial data


def _c_inf_bump(r: np.ndarray, radius: float) -> np.ndarray:
    """Classic compactly supported smooth bump, 1 at the origin."""
    out = np.zeros_like(r)
    inside = r < radius
    s2 = (r[inside] / radius) ** 2
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s2))
    return out


def _filtered_noise(grid: Grid, rng: np.random.Generator, corr_len: float) -> np.ndarray:
    """Smooth seeded random field with unit maximum amplitude."""
    f = rng.standard_normal(grid.shape)
    fh = to_spectral(grid, f)
    filt = np.ones(grid.spectral_shape)
    for a in range(grid.dim):
        filt = filt * np.exp(-((grid.k_full[a] * corr_len / 2.0) ** 2))
    out = to_physical(grid, filt * fh)
    return out / max(float(np.max(np.abs(out))), 1e-300)


def _band_limit(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Quartic-exponential low-pass at the dealias cutoff.

    Windowed profiles keep sub-roundoff tails outside their support after
    this filter, so spectral derivatives cannot deposit ringing mass in the
    boundary shell; content below half the cutoff is barely touched.
    """
    fh = to_spectral(grid, f)
    filt = np.ones(grid.spectral_shape)
    kcut = grid.dealias_fraction * np.pi / grid.dx
    for a in range(grid.dim):
        filt = filt * np.exp(-36.0 * (np.abs(grid.k_full[a]) / kcut) ** 4)
    return to_physical(grid, filt * fh)


def _orthonormal_frame(e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    trial = np.array([1.0, 0.0, 0.0])
    if abs(np.dot(trial, e)) > 0.9:
        trial = np.array([0.0, 1.0, 0.0])
    u1 = trial - np.dot(trial, e) * e
    u1 /= np.linalg.norm(u1)
    u2 = np.cross(e, u1)
    return u1, u2


def make_initial_data(cfg: ScenarioConfig) -> State:
    """Admissible initial data: constraints hold exactly by construction.

    The director starts on the sphere through the exponential map of a
    compact bump, its velocity tangentially projected; the fluid velocity is
    a curl (stream function in 2D), hence spectrally divergence-free.
    """
    grid = cfg.grid
    params = cfg.params
    rng = np.random.default_rng(cfg.seed)
    e = params.e

    if cfg.family == "geodesic":
        from .verification import OracleSpec, geodesic_oracle

        spec = OracleSpec(kind="geodesic_wavemap", epsilon=cfg.epsilon, mode=cfg.mode)
        return geodesic_oracle(grid, spec, 0.0)

    if cfg.support_radius >= grid.length / 2 - 2 * grid.dx:
        raise ConfigError("support exceeds the box margin")

    corr = max(2.0 * grid.dx, cfg.support_radius / 4.0)
    chi = _c_inf_bump(grid.r, cfg.support_radius)
    u1, u2 = _orthonormal_frame(e)

    def unit_transverse() -> np.ndarray:
        angle = rng.uniform(0.0, 2.0 * np.pi)
        return math.cos(angle) * u1 + math.sin(angle) * u2

    d = np.broadcast_to(e.reshape((3,) + (1,) * grid.dim), (3,) + grid.shape).copy()
    q = np.zeros((3,) + grid.shape)
    v = np.zeros((grid.dim,) + grid.shape)

    if cfg.family in ("bump-director", "mixed"):
        w = unit_transverse()
        profile = _band_limit(grid, chi * _filtered_noise(grid, rng, corr))
        theta = cfg.epsilon * profile / max(float(np.max(np.abs(profile))), 1e-300)
        ws = w.reshape((3,) + (1,) * grid.dim)
        es = e.reshape((3,) + (1,) * grid.dim)
        d = np.cos(theta) * es + np.sin(theta) * ws
        wp = unit_transverse()
        psi = _band_limit(grid, chi * _filtered_noise(grid, rng, corr))
        raw_q = cfg.epsilon * (psi / max(float(np.max(np.abs(psi))), 1e-300)) * wp.reshape(
            (3,) + (1,) * grid.dim
        )
        q = raw_q - np.sum(raw_q * d, axis=0) * d

    if cfg.family in ("bump-velocity", "mixed") and grid.dim >= 2:
        if grid.dim == 3:
            potential = np.stack(
                [_band_limit(grid, chi * _filtered_noise(grid, rng, corr)) for _ in range(3)]
            )
            raw_v = curl(grid, potential)
        else:
            raw_v = perp_gradient(grid, _band_limit(grid, chi * _filtered_noise(grid, rng, corr)))
        v = cfg.epsilon * raw_v / max(float(np.max(np.abs(raw_v))), 1e-300)

    return State(grid=grid, v=v, d=d, q=q, t=0.0)


def hlambda_surrogate(state: State, params: Params, order: int = 1) -> float:
    """Discrete stand-in for the weighted data norm at t = 0.

    Sums L2 norms of Lambda^a applied to (v, d - e, q) for |a| <= order with
    Lambda = {translations, rotations, r d_r}; the middle slot enters through
    its gradient.
    """
    if order != 1:
        raise ValueError("only the first-order surrogate is implemented")
    grid = state.grid
    e = params.e.reshape((3,) + (1,) * grid.dim)
    ops = [op for op in generator_ops(grid.dim) if op.kind != "time_derivative"]

    def lam_fields(values: np.ndarray, target: str) -> list[np.ndarray]:
        # pad a zero time-derivative entry: the scaling operator at t = 0 is r d_r
        jet = FieldJet(grid, np.stack([values, np.zeros_like(values)]), t=0.0)
        return [values] + [_apply_op(jet, op, target).data[0] for op in ops]

    total = 0.0
    for f in lam_fields(state.v, "velocity"):
        total += l2_norm(grid, f)
    for g in lam_fields(state.d - e, "director"):
        gh = to_spectral(grid, g)
        grad = np.stack([to_physical(grid, 1j * grid.k[a] * gh) for a in range(grid.dim)])
        total += l2_norm(grid, grad)
    for h in lam_fields(state.q, "director"):
        total += l2_norm(grid, h)
    return total


# ---------------------------------------------------------------------------
# records


@dataclass
class Checkpoint:
    t: float
    v: np.ndarray
    d: np.ndarray
    q: np.ndarray
    nonlinear: np.ndarray  # P[v.grad v + div(grad d (x) grad d)]

    def to_state(self, grid: Grid) -> State:
        return State(grid=grid, v=self.v, d=self.d, q=self.q, t=self.t)


@dataclass
class RunRecord:
    config: ScenarioConfig
    frames: list[DiagnosticsFrame]
    checkpoints: list[Checkpoint]
    status: str
    hlambda_initial: float
    t_final: float

    @property
    def grid(self) -> Grid:
        return self.config.grid

    @property
    def params(self) -> Params:
        return self.config.params

    @property
    def boundary_contact_time(self) -> float | None:
        for fr in self.frames:
            if fr.boundary_mass > BOUNDARY_MASS_LIMIT:
                return fr.t
        return None

    def series(self, column: str) -> tuple[np.ndarray, np.ndarray]:
        header = DiagnosticsFrame.csv_header(self.config.kappa_max)
        idx = header.index(column)
        ts = np.array([fr.t for fr in self.frames])
        vals = np.array([fr.to_row()[idx] for fr in self.frames])
        return ts, vals


def run_scenario(cfg: ScenarioConfig) -> RunRecord:
    """Integrate the scenario to its horizon, sampling diagnostics frames."""
    grid = cfg.grid
    params = cfg.params
    state = make_initial_data(cfg)
    engine = DiagnosticsEngine(
        grid, params, kappa_max=cfg.kappa_max, lightcone_kappa=cfg.lightcone_kappa
    )

    raw_dt = cfg.dt if cfg.dt is not None else stability_dt(grid, params, state, cfg.cfl_safety)
    n_sub = max(1, math.ceil(round(cfg.sample_dt / raw_dt, 12)))
    dt = cfg.sample_dt / n_sub
    stepper = StepperConfig(dt=dt, cfl_safety=cfg.cfl_safety)

    checkpoint_every = None
    if cfg.checkpoint_dt is None:
        checkpoint_every = 1  # every sample
    elif cfg.checkpoint_dt > 0:
        checkpoint_every = max(1, round(cfg.checkpoint_dt / cfg.sample_dt))

    baseline = total_energy(state, params)
    hlam = hlambda_surrogate(state, params)

    frames: list[DiagnosticsFrame] = []
    checkpoints: list[Checkpoint] = []
    status = STATUS_COMPLETED
    n_samples = round(cfg.horizon / cfg.sample_dt)
    drift_since_sample = 0.0

    def take_sample(idx: int) -> DiagnosticsFrame:
        rhs = evaluate_rhs(state, params)
        hist = FieldHistory(params)
        hist.push(state, rhs)
        fr = engine.frame(hist, constraint_drift=drift_since_sample)
        frames.append(fr)
        if checkpoint_every and idx % checkpoint_every == 0:
            checkpoints.append(
                Checkpoint(
                    t=state.t,
                    v=state.v.copy(),
                    d=state.d.copy(),
                    q=state.q.copy(),
                    nonlinear=-to_physical(grid, rhs.nv_hat),
                )
            )
        return fr

    fr = take_sample(0)
    t_final = state.t
    for i_sample in range(1, n_samples + 1):
        try:
            for _ in range(n_sub):
                state, info = step_with_info(state, params, stepper)
                drift_since_sample = max(drift_since_sample, info.drift)
        except BlowupError:
            status = STATUS_BLOWUP
            break
        state.t = round(i_sample * cfg.sample_dt, 12)  # keep sample times exact
        fr = take_sample(i_sample)
        t_final = state.t
        drift_since_sample = 0.0
        energy = total_energy(state, params)
        if not np.isfinite(energy) or (
            baseline > 0 and energy > StepperConfig(dt=dt).blowup_energy_factor * baseline
        ):
            status = STATUS_BLOWUP
            break
        # geodesic runs are periodic test solutions, not compact surrogates
        if cfg.family != "geodesic" and fr.boundary_mass > BOUNDARY_MASS_LIMIT:
            status = STATUS_BOUNDARY
            break

    return RunRecord(
        config=cfg,
        frames=frames,
        checkpoints=checkpoints,
        status=status,
        hlambda_initial=hlam,
        t_final=t_final,
    )


# ---------------------------------------------------------------------------
# decay fitting


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    exponent: float
    intercept: float
    residual: float


def fit_decay(
    ts: np.ndarray,
    values: np.ndarray,
    window: tuple[float, float],
    log_corrected: bool = False,
) -> FitResult:
    """Least-squares slope of log(value) against log<t> inside the window.

    With log_corrected, the model gains the (ln<t>)^(1/2) factor used by the
    higher-derivative decay forms.
    """
    ts = np.asarray(ts, dtype=float)
    values = np.asarray(values, dtype=float)
    lo, hi = window
    sel = (ts >= lo) & (ts <= hi)
    ts, values = ts[sel], values[sel]
    if ts.size < 4:
        raise FitError("need at least 4 samples inside the window")
    if np.any(values <= 0):
        raise FitError("values must be positive inside the window")
    bracket = np.sqrt(1.0 + ts**2)
    y = np.log(values)
    if log_corrected:
        logln = np.log(np.log(bracket))
        y = y - 0.5 * logln
    x = np.log(bracket)
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return FitResult(exponent=float(slope), intercept=float(intercept), residual=resid)


def decay_window(record: RunRecord, window: tuple[float, float]) -> tuple[float, float]:
    """Truncate a fit window to pre-boundary-contact times."""
    contact = record.boundary_contact_time
    if contact is None:
        return window
    return (window[0], min(window[1], contact))


# ---------------------------------------------------------------------------
# persistence


def _format_float(x: float) -> str:
    return repr(float(x))


def save_record(record: RunRecord, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(record.config.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    meta = {
        "status": record.status,
        "hlambda_initial": record.hlambda_initial,
        "t_final": record.t_final,
        "n_checkpoints": len(record.checkpoints),
    }
    with open(os.path.join(out_dir, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    header = DiagnosticsFrame.csv_header(record.config.kappa_max)
    with open(os.path.join(out_dir, "frames.csv"), "w") as fh:
        fh.write(",".join(header) + "\n")
        for fr in record.frames:
            fh.write(",".join(_format_float(x) for x in fr.to_row()) + "\n")
    cp_dir = os.path.join(out_dir, "checkpoints")
    os.makedirs(cp_dir, exist_ok=True)
    for i, cp in enumerate(record.checkpoints):
        _write_checkpoint(record, cp, os.path.join(cp_dir, f"cp_{i:06d}.bin"))


def _write_checkpoint(record: RunRecord, cp: Checkpoint, path: str) -> None:
    fields = [("v", cp.v), ("d", cp.d), ("q", cp.q), ("nonlinear", cp.nonlinear)]
    header = {
        "grid": {
            "dim": record.config.dim,
            "n": record.config.n_points,
            "length": record.config.box_length,
        },
        "time": cp.t,
        "params": {
            "mu": record.config.mu,
            "sigma0": record.config.sigma0,
            "sigma1": record.config.sigma1,
        },
        "fields": [{"name": name, "shape": list(arr.shape)} for name, arr in fields],
    }
    with open(path, "wb") as fh:
        fh.write((json.dumps(header, sort_keys=True) + "\n").encode())
        for _, arr in fields:
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read_checkpoint(path: str) -> Checkpoint:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        arrays = {}
        for spec in header["fields"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape))
            buf = fh.read(count * 8)
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
    return Checkpoint(
        t=header["time"],
        v=arrays["v"],
        d=arrays["d"],
        q=arrays["q"],
        nonlinear=arrays["nonlinear"],
    )


def load_record(out_dir: str) -> RunRecord:
    cfg = ScenarioConfig.from_json_file(os.path.join(out_dir, "config.json"))
    with open(os.path.join(out_dir, "meta.json")) as fh:
        meta = json.load(fh)
    frames = []
    with open(os.path.join(out_dir, "frames.csv")) as fh:
        next(fh)
        for line in fh:
            row = [float(tok) for tok in line.strip().split(",")]
            frames.append(DiagnosticsFrame.from_row(row, cfg.kappa_max))
    cp_dir = os.path.join(out_dir, "checkpoints")
    checkpoints = []
    if os.path.isdir(cp_dir):
        for name in sorted(os.listdir(cp_dir)):
            checkpoints.append(_read_checkpoint(os.path.join(cp_dir, name)))
    return RunRecord(
        config=cfg,
        frames=frames,
        checkpoints=checkpoints,
        status=meta["status"],
        hlambda_initial=meta["hlambda_initial"],
        t_final=meta["t_final"],
    )


# ---------------------------------------------------------------------------
# sweeps


def run_sweep(
    base: ScenarioConfig, axes: dict[str, list], max_runs: int = 64
) -> tuple[list[RunRecord], list[dict]]:
    """Cartesian parameter sweep; per-run failures recorded, sweep continues."""
    allowed = {"epsilon", "mu", "sigma1", "n_points"}
    bad = set(axes) - allowed
    if bad:
        raise ConfigError(f"unsupported sweep axes: {sorted(bad)}")
    names = sorted(axes)
    combos = [()]
    for name in names:
        combos = [c + (val,) for c in combos for val in axes[name]]
    if len(combos) > max_runs:
        raise ConfigError(f"sweep size {len(combos)} exceeds cap {max_runs}")

    records, summary = [], []
    for combo in combos:
        overrides = dict(zip(names, combo))
        cfg = replace(base, **overrides)
        row: dict = dict(overrides)
        try:
            rec = run_scenario(cfg)
            records.append(rec)
            row["status"] = rec.status
            row.update(_summary_fits(rec))
            row["tg_decay_rate"] = _taylor_green_control_rate(cfg.mu)
        except Exception as err:  # per-run failure must not kill the sweep
            row["status"] = f"error: {err}"
            records.append(None)
        summary.append(row)
    return records, summary


def _summary_fits(rec: RunRecord) -> dict:
    out = {}
    window = decay_window(rec, (rec.frames[0].t + 1.0, rec.t_final))
    for column in ("linf_v", "linf_grad_v", f"E_d_{rec.config.kappa_max + 1}"):
        try:
            ts, vals = rec.series(column)
            fit = fit_decay(ts, vals, window)
            out[f"slope_{column}"] = fit.exponent
        except (FitError, ValueError):
            out[f"slope_{column}"] = math.nan
    return out


def _taylor_green_control_rate(mu: float) -> float:
    """Fitted amplitude decay rate of the exact cellular-flow control run."""
    from .integrator import step
    from .verification import OracleSpec, taylor_green_oracle

    grid = Grid(dim=2, n=32, length=2 * np.pi)
    params = Params(mu=mu)
    spec = OracleSpec(kind="taylor_green", epsilon=1.0, mu=mu)
    state = taylor_green_oracle(grid, spec, 0.0)
    cfg = StepperConfig(dt=1e-2)
    ts, amps = [0.0], [float(np.max(np.abs(state.v)))]
    for i in range(50):
        state = step(state, params, cfg)
        ts.append(state.t)
        amps.append(float(np.max(np.abs(state.v))))
    slope = np.polyfit(ts, np.log(amps), 1)[0]
    return float(-slope)
