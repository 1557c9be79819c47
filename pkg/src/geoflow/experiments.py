"""Experiment configurations, initial data and the preset drivers.

A configuration is a flat mapping of keys (TOML sections are flattened).
Each preset fills in its own defaults; ``preset`` and ``rho`` are always
required. Every run is deterministic in its configuration and seed.
"""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .discretization import LoopGrid, MapState, Scheme, ambient_deriv
from .flow import FlowConfig, Trajectory, auto_dt, diff_w12, great_circle_exact, integrate
from .functionals import (
    CSV_COLUMNS,
    EnergyReport,
    cancellation_residuals,
    e3_bookkeeping,
    energy_report,
)
from .oracles import AuditResult, SpectrumState, airy_exact, conservation_audit, order_estimate
from .space_forms import Kind, SpaceForm

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

PRESETS = {
    "conservation": "E1/E2 drift and the dE3/dt identity along a perturbed-circle run",
    "airy": "flat target against the exact Airy evolution",
    "traveling_wave": "rotating great circle against its closed form, plus a dt sweep",
    "epsilon_sweep": "regularised runs for a dyadic epsilon sweep against the epsilon = 0 run",
    "dt_order": "temporal convergence order from a dt sweep",
    "long_time": "long run tracking E3 and the H^2 norm",
    "uniqueness_perturbation": "growth of the W^{1,2} distance between nearby solutions",
}

FAMILIES = ("great_circle", "perturbed_circle", "random_band_limited", "flat_fourier")
REQUIRED = ("preset", "rho")
# geodesic radius of the reference loop on hyperbolic targets
HYPERBOLIC_LOOP_RADIUS = 0.5


class ConfigError(ValueError):
    """Invalid or incomplete experiment configuration."""


class ExperimentError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage = stage
        self.cause = exc


# -- configuration -----------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    preset: str
    rho: float
    target: str = "sphere"
    dim: int = 2
    curvature_scale: float = 1.0
    grid_size: int = 256
    scheme: str = "spectral"
    dealias: bool = False
    epsilon: float = 0.0
    t_end: float = 0.05
    dt: float | str = "auto"
    safety: float = 0.5
    reproject_every_stage: bool = True
    record_stride: int = 1
    record_dt: float | None = None
    integrator: str = "rk4"
    family: str = "perturbed_circle"
    winding: int = 1
    modes: int = 3
    amplitude: float = 0.1
    coefficients: dict | None = None
    seed: int = 42
    epsilons: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)
    dts: tuple[float, ...] = ()
    dt_factors: tuple[int, ...] = (2, 4, 8)
    sweep_grid_size: int = 8
    refine: bool = False
    delta: float = 1e-6
    output_dir: str = "geoflow_out"

    def flow_config(self, **overrides) -> FlowConfig:
        kw = dict(
            rho=self.rho,
            t_end=self.t_end,
            epsilon=self.epsilon,
            dt=self.dt,
            safety=self.safety,
            reproject_every_stage=self.reproject_every_stage,
            scheme=self.scheme,
            dealias=self.dealias,
            record_stride=self.record_stride,
            record_dt=self.record_dt,
            integrator=self.integrator,
        )
        kw.update(overrides)
        return FlowConfig(**kw)

    def space_form(self) -> SpaceForm:
        return SpaceForm.from_config(self.target, self.dim, self.curvature_scale)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


PRESET_DEFAULTS: dict[str, dict] = {
    "conservation": dict(t_end=0.05, grid_size=256, record_dt=1e-5, family="perturbed_circle", modes=3, amplitude=0.1),
    "airy": dict(
        target="flat", dim=1, grid_size=128, t_end=0.5, family="flat_fourier", coefficients={"1": 1.0, "2": 0.3},
        record_stride=1000,
    ),
    "traveling_wave": dict(
        family="great_circle", grid_size=32, t_end=1.0, dts=(0.08, 0.04, 0.02), sweep_grid_size=8, record_stride=500
    ),
    "epsilon_sweep": dict(grid_size=128, t_end=0.02, record_stride=100, epsilons=(1e-2, 5e-3, 2.5e-3)),
    "dt_order": dict(grid_size=32, t_end=0.05, safety=1.0, dt_factors=(2, 4, 8), record_stride=100),
    "long_time": dict(grid_size=256, t_end=5.0, integrator="ifrk4", record_dt=0.01),
    "uniqueness_perturbation": dict(grid_size=64, t_end=0.05, record_dt=5e-4, delta=1e-6),
}

_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _flatten(data: dict, out: dict | None = None) -> dict:
    out = {} if out is None else out
    for k, v in data.items():
        if isinstance(v, dict) and k != "coefficients":
            _flatten(v, out)
        elif k in out:
            raise ConfigError(f"key '{k}' given more than once")
        else:
            out[k] = v
    return out


def _parse_scalar(text: str):
    """Interpret a ``--set`` value as TOML, falling back to a bare string."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_overrides(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override '{item}' must look like key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = _parse_scalar(v.strip())
    return out


def _coerce(key: str, value):
    typ = str(_FIELD_TYPES[key])
    try:
        if key == "dt":
            return value if value == "auto" else float(value)
        if key == "record_dt":
            return None if value in (None, "none") else float(value)
        if key == "coefficients":
            if value is None:
                return None
            if not isinstance(value, dict):
                raise TypeError("expected a table of wavenumber = coefficient")
            return {str(k): v for k, v in value.items()}
        if typ.startswith("tuple"):
            return tuple(int(v) if key == "dt_factors" else float(v) for v in value)
        if typ == "bool":
            if not isinstance(value, bool):
                raise TypeError("expected true or false")
            return value
        if typ == "int":
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError("expected an integer")
            return int(value)
        if typ == "float":
            return float(value)
        return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for '{key}': {value!r} ({exc})") from None


def make_config(raw: dict) -> ExperimentConfig:
    """Validate a flat mapping and merge in the preset defaults."""
    data = _flatten(raw)
    for key in REQUIRED:
        if key not in data:
            raise ConfigError(f"missing required key '{key}'")
    unknown = sorted(set(data) - set(_FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    preset = data["preset"]
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset '{preset}' (choose from {', '.join(PRESETS)})")
    merged = dict(PRESET_DEFAULTS[preset])
    merged.update(data)
    cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in merged.items()})
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    try:
        target = cfg.space_form()
        LoopGrid(cfg.grid_size)
        Scheme(cfg.scheme)
        cfg.flow_config()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.family not in FAMILIES:
        raise ConfigError(f"unknown initial-data family '{cfg.family}'")
    if not 0 <= cfg.amplitude <= 0.5:
        raise ConfigError("amplitude must lie in [0, 0.5]")
    if cfg.family == "great_circle" and target.kind is not Kind.SPHERE:
        raise ConfigError("great_circle initial data needs a sphere target")
    if cfg.family == "flat_fourier" and target.kind is not Kind.FLAT:
        raise ConfigError("flat_fourier initial data needs a flat target")
    if cfg.family == "perturbed_circle" and target.kind is Kind.FLAT:
        raise ConfigError("perturbed_circle initial data needs a curved target")
    if cfg.preset == "airy" and target.kind is not Kind.FLAT:
        raise ConfigError("the airy preset needs target = 'flat'")
    if cfg.preset == "traveling_wave" and cfg.family != "great_circle":
        raise ConfigError("the traveling_wave preset needs family = 'great_circle'")
    if cfg.preset == "epsilon_sweep" and (len(cfg.epsilons) < 3 or min(cfg.epsilons) <= 0):
        raise ConfigError("epsilon_sweep needs at least three positive epsilons")
    if cfg.modes < 1:
        raise ConfigError("modes must be at least 1")


def load_config(path, overrides=None) -> ExperimentConfig:
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    raw = _flatten(raw)
    raw.update(overrides or {})
    return make_config(raw)


# -- initial data ------------------------------------------------------------------


def _mode_rng(seed: int, mode: int) -> np.random.Generator:
    """Counter-based stream for one Fourier mode, independent of all others."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[mode, 0, 0, 0]))


def base_loop(grid: LoopGrid, target: SpaceForm, winding: int = 1) -> np.ndarray:
    """Closed reference loop: a great circle, or a geodesic circle in H^n."""
    x = grid.nodes
    r = target.radius
    out = np.zeros((grid.points, target.ambient_dim))
    if target.kind is Kind.SPHERE:
        out[:, 0] = r * np.cos(winding * x)
        out[:, 1] = r * np.sin(winding * x)
    elif target.kind is Kind.HYPERBOLIC:
        ell = HYPERBOLIC_LOOP_RADIUS
        out[:, 0] = r * np.sinh(ell) * np.cos(winding * x)
        out[:, 1] = r * np.sinh(ell) * np.sin(winding * x)
        out[:, -1] = r * np.cosh(ell)
    return out


# perturbation sizes are normalised on this grid so initial data do not depend on M
REFERENCE_POINTS = 4096


def _random_modes(grid: LoopGrid, width: int, K: int, seed: int, decay: float) -> np.ndarray:
    x = grid.nodes
    out = np.zeros((grid.points, width))
    for m in range(1, K + 1):
        a, b = _mode_rng(seed, m).normal(size=(2, width))
        out += (np.outer(np.cos(m * x), a) + np.outer(np.sin(m * x), b)) / m**decay
    return out


def build_initial(cfg: ExperimentConfig, grid: LoopGrid | None = None) -> MapState:
    grid = LoopGrid(cfg.grid_size) if grid is None else grid
    target = cfg.space_form()
    fam = cfg.family
    if fam == "great_circle":
        if target.kind is not Kind.SPHERE:
            raise ConfigError("great_circle initial data needs a sphere target")
        return MapState(grid, base_loop(grid, target, cfg.winding), target)
    if fam == "flat_fourier":
        if target.kind is not Kind.FLAT:
            raise ConfigError("flat_fourier initial data needs a flat target")
        x = grid.nodes
        vals = np.zeros((grid.points, target.ambient_dim))
        for k, c in (cfg.coefficients or {}).items():
            c = np.broadcast_to(np.asarray(c, dtype=float), (target.ambient_dim,)) if np.ndim(c) else np.eye(
                target.ambient_dim
            )[0] * float(c)
            vals += np.outer(np.cos(int(k) * x), c)
        return MapState(grid, vals, target)
    base = base_loop(grid, target, cfg.winding)
    ref = LoopGrid(REFERENCE_POINTS)
    if fam == "perturbed_circle":
        if target.kind is Kind.FLAT:
            raise ConfigError("perturbed_circle initial data needs a curved target")

        def tangent_bump(g):
            return target.project(base_loop(g, target, cfg.winding), _random_modes(g, target.ambient_dim, cfg.modes, cfg.seed, 0.0))

        ref_bump = tangent_bump(ref)
        size = np.max(np.sqrt(np.abs(target.inner(ref_bump, ref_bump))))
        vals = target.retract(base + cfg.amplitude * target.radius * tangent_bump(grid) / size)
        return MapState(grid, vals, target)
    if fam == "random_band_limited":
        noise = _random_modes(grid, target.ambient_dim, cfg.modes, cfg.seed, 2.0)
        noise /= np.max(np.abs(_random_modes(ref, target.ambient_dim, cfg.modes, cfg.seed, 2.0)))
        if target.kind is Kind.FLAT:
            return MapState(grid, cfg.amplitude * noise, target)
        scale = target.radius if target.kind is Kind.SPHERE else 1.0
        return MapState(grid, target.retract(base + cfg.amplitude * scale * noise), target)
    raise ConfigError(f"unknown initial-data family '{fam}'")


# -- running -----------------------------------------------------------------------


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    status: str = "ok"
    message: str = ""
    reports: list[EnergyReport] = field(default_factory=list)
    audits: list[AuditResult] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: dict[str, bool] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def _recorder(rho: float, alias_free: bool):
    def rec(t, u):
        return energy_report(u, rho, t=t, alias_free=alias_free)

    return rec


def _run(cfg: ExperimentConfig, u0: MapState, stage: str, keep_states=False, record=True, **flow_overrides) -> Trajectory:
    fc = cfg.flow_config(**flow_overrides)
    rec = _recorder(cfg.rho, cfg.dealias) if record else None
    try:
        return integrate(u0, fc, rec, keep_states=keep_states)
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage name
        raise ExperimentError(stage, exc) from exc


def _check_run(traj: Trajectory, res: ExperimentResult) -> bool:
    if not traj.ok:
        res.status, res.message = "blowup", traj.message
        return False
    return True


def _l2(grid: LoopGrid, a, b) -> float:
    return float(np.sqrt(grid.dx * np.sum((np.asarray(a) - np.asarray(b)) ** 2)))


def preset_conservation(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    traj = _run(cfg, u0, "conservation: integrate")
    res.reports = traj.records
    if not _check_run(traj, res):
        return
    audits = [conservation_audit(traj, f) for f in ("E1", "E2", "E3")]
    res.audits = audits
    books = [e3_bookkeeping(u, cfg.rho) for u in (u0, traj.final)]
    cancel = max(max(cancellation_residuals(b).values()) for b in books)
    res.summary.update(
        E1_drift=audits[0].max_drift,
        E2_drift=audits[1].max_drift,
        dE3_mismatch=audits[2].max_drift,
        cancellation=cancel,
        steps=traj.steps,
        max_residual=max(r.manifold_residual for r in traj.records),
    )
    res.checks.update(
        E1_drift=audits[0].max_drift <= 1e-8,
        E2_drift=audits[1].max_drift <= 1e-7,
        dE3_identity=audits[2].max_drift <= 1e-4,
        cancellation=cancel <= 1e-10,
    )
    if cfg.refine:
        dt0 = traj.steps and (cfg.t_end / traj.steps)
        fine = _run(cfg, u0, "conservation: refined integrate", dt=dt0 / 2, record_dt=cfg.record_dt)
        if not _check_run(fine, res):
            return
        d1 = conservation_audit(fine, "E1").max_drift
        d2 = conservation_audit(fine, "E2").max_drift
        r1 = audits[0].max_drift / d1 if d1 > 0 else math.inf
        r2 = audits[1].max_drift / d2 if d2 > 0 else math.inf
        res.summary.update(E1_drift_half_dt=d1, E2_drift_half_dt=d2, E1_refine_ratio=r1, E2_refine_ratio=r2)
        res.checks.update(E1_refinement=r1 >= 8, E2_refinement=r2 >= 8)


def preset_airy(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    traj = _run(cfg, u0, "airy: integrate", keep_states=True)
    res.reports = traj.records
    if not _check_run(traj, res):
        return
    exact = airy_exact(u0, cfg.t_end)
    err = _l2(u0.grid, traj.final.values, exact.values) / _l2(u0.grid, exact.values, 0.0)
    mag0 = SpectrumState.from_values(u0.values).magnitudes()
    mag_dev = max(
        float(np.max(np.abs(SpectrumState.from_values(s.values).magnitudes() - mag0)) / u0.grid.points)
        for s in traj.states
    )
    res.summary.update(relative_l2_error=err, max_mode_magnitude_change=mag_dev, steps=traj.steps)
    res.checks.update(airy_error=err <= 1e-9, mode_magnitudes=mag_dev <= 1e-10)


def rotating_circle(cfg: ExperimentConfig, grid: LoopGrid, t: float) -> np.ndarray:
    """Closed-form great-circle solution: rigid rotation at rate ``rho (n-1) w^2``."""
    target = cfg.space_form()
    rate = cfg.rho * (target.dim - 1)
    gc = target.radius * great_circle_exact(grid, rate, t, cfg.winding)
    return np.pad(gc, ((0, 0), (0, target.ambient_dim - 3)))


def preset_traveling_wave(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    traj = _run(cfg, u0, "traveling_wave: integrate")
    res.reports = traj.records
    if not _check_run(traj, res):
        return
    err = float(np.max(np.abs(traj.final.values - rotating_circle(cfg, u0.grid, cfg.t_end))))
    sweep_cfg = replace(cfg, grid_size=cfg.sweep_grid_size)
    g = LoopGrid(cfg.sweep_grid_size)
    s0 = build_initial(sweep_cfg, g)
    exact = rotating_circle(cfg, g, cfg.t_end)
    errors = []
    for dt in sorted(cfg.dts, reverse=True):
        tr = _run(sweep_cfg, s0, f"traveling_wave: sweep dt={dt}", record=False, dt=dt, record_dt=None)
        if not _check_run(tr, res):
            return
        errors.append((dt, float(np.max(np.abs(tr.final.values - exact)))))
    order = order_estimate(errors)
    res.summary.update(max_error=err, sweep=errors, order=order)
    res.checks.update(max_error=err <= 1e-8, order=abs(order - 4) <= 0.2)


def preset_epsilon_sweep(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    dt = cfg.dt if cfg.dt != "auto" else None
    if dt is None:
        dt = min(auto_dt(cfg.flow_config(epsilon=e, integrator="rk4"), u0) for e in (0.0, *cfg.epsilons))
    base = _run(cfg, u0, "epsilon_sweep: epsilon=0", dt=dt, epsilon=0.0)
    res.reports = base.records
    if not _check_run(base, res):
        return
    errors = []
    for eps in sorted(cfg.epsilons, reverse=True):
        tr = _run(cfg, u0, f"epsilon_sweep: epsilon={eps}", record=False, dt=dt, epsilon=eps)
        if not _check_run(tr, res):
            return
        errors.append((eps, _l2(u0.grid, tr.final.values, base.final.values)))
    order = order_estimate(errors)
    decreasing = all(b[1] < a[1] for a, b in zip(errors, errors[1:]))
    res.summary.update(errors=errors, order=order, dt=dt)
    res.checks.update(decreasing=decreasing, order=order >= 0.8)


def preset_dt_order(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    if cfg.dt == "auto":
        d0 = auto_dt(cfg.flow_config(), u0)
    else:
        d0 = float(cfg.dt)
    finest = max(cfg.dt_factors) * 8
    ref = _run(cfg, u0, "dt_order: reference", dt=d0 / finest, record=False, record_dt=None)
    res.reports = []
    if not _check_run(ref, res):
        return
    errors = []
    drifts = []
    for f in sorted(cfg.dt_factors):
        tr = _run(cfg, u0, f"dt_order: dt/{f}", dt=d0 / f, record_dt=None)
        if not _check_run(tr, res):
            return
        errors.append((d0 / f, _l2(u0.grid, tr.final.values, ref.final.values)))
        drifts.append((d0 / f, abs(tr.records[-1].E1 - tr.records[0].E1) / abs(tr.records[0].E1 or 1.0)))
        if f == min(cfg.dt_factors):
            res.reports = tr.records
    order = order_estimate(errors)
    res.summary.update(errors=errors, order=order, E1_drifts=drifts)
    res.checks.update(order=abs(order - 4) <= 0.2)


def growth_fit(times, values) -> tuple[float, float]:
    """Smallest ``(c1, c2)`` with ``E(t) <= (E(0) + c1) exp(c2 t)`` on the samples.

    ``c1`` is fixed so that ``E(0) + c1 >= 1``; ``c2`` is then the largest
    observed log-ratio slope (zero if the bound already holds at ``c2 = 0``).
    """
    t = np.asarray(times, dtype=float)
    e = np.asarray(values, dtype=float)
    c1 = max(1.0, 1.0 - e[0])
    base = e[0] + c1
    mask = t > 0
    ratios = np.log(np.maximum(e[mask], base) / base) / t[mask]
    c2 = float(max(0.0, np.max(ratios, initial=0.0)))
    return c1, c2


def preset_long_time(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    traj = _run(cfg, u0, "long_time: integrate")
    res.reports = traj.records
    if not _check_run(traj, res):
        return
    t = [r.t for r in traj.records]
    e3 = [r.E3 for r in traj.records]
    h2 = [r.Hm[2] for r in traj.records]
    c1, c2 = growth_fit(t, e3)
    e1 = np.array([r.E1 for r in traj.records])
    res.summary.update(
        sup_E3=float(np.max(e3)),
        sup_H2=float(np.max(h2)),
        E3_initial=e3[0],
        H2_initial=h2[0],
        c1=c1,
        c2=c2,
        E1_drift=float(np.max(np.abs(e1 - e1[0])) / abs(e1[0])),
        steps=traj.steps,
        t_final=t[-1],
    )
    bounded = bool(np.all(np.isfinite(e3)) and np.all(np.isfinite(h2)))
    holds = all(v <= (e3[0] + c1) * math.exp(c2 * s) * (1 + 1e-12) for s, v in zip(t, e3))
    res.checks.update(
        no_blowup=t[-1] == cfg.t_end, bounded=bounded, growth_bound=holds and math.isfinite(c1) and math.isfinite(c2)
    )


def perturb_to_distance(u: MapState, delta: float, seed: int) -> MapState:
    """Nearby loop whose ``W^{1,2}`` distance from ``u`` is ``delta`` to rounding."""
    target = u.target
    bump = target.project(u.values, _random_modes(u.grid, target.ambient_dim, 3, seed + 1, 0.0))
    bx = ambient_deriv(bump, 1)
    s = delta / np.sqrt(u.grid.dx * (np.sum(bump * bump) + np.sum(bx * bx)))
    for _ in range(60):
        v = u.with_values(target.retract(u.values + s * bump))
        d = diff_w12(u, v)
        if abs(d - delta) <= 1e-13 * delta:
            break
        s *= delta / d
    return v


def preset_uniqueness(cfg: ExperimentConfig, res: ExperimentResult) -> None:
    u0 = build_initial(cfg)
    v0 = perturb_to_distance(u0, cfg.delta, cfg.seed)
    fc_kw = dict(record=False, keep_states=True)
    a = _run(cfg, u0, "uniqueness: base run", **fc_kw)
    b = _run(cfg, v0, "uniqueness: perturbed run", **fc_kw)
    c = _run(cfg, u0, "uniqueness: repeated run", **fc_kw)
    if not all(_check_run(tr, res) for tr in (a, b, c)):
        return
    times = np.array(a.times)
    d = np.array([diff_w12(x, y) for x, y in zip(a.states, b.states)])
    same = max(diff_w12(x, y) for x, y in zip(a.states, c.states))
    bitwise = all(np.array_equal(x.values, y.values) for x, y in zip(a.states, c.states))
    slope, intercept = np.polyfit(times, np.log(d / d[0]), 1)
    C = float(np.max(np.log(d[1:] / d[0]) / times[1:]))
    stride = max(1, len(a.times) // 20)
    res.reports = [energy_report(s, cfg.rho, t=t) for t, s in zip(a.times[::stride], a.states[::stride])]
    res.summary.update(
        delta=float(d[0]),
        final_distance=float(d[-1]),
        fitted_slope=float(slope),
        fitted_intercept=float(intercept),
        growth_constant=C,
        same_ic_distance=same,
    )
    res.checks.update(
        initial_distance=abs(d[0] - cfg.delta) <= 1e-9 * cfg.delta,
        finite_slope=bool(np.isfinite(slope) and np.isfinite(C)),
        same_ic_zero=bool(same == 0.0 and bitwise),
    )


RUNNERS = {
    "conservation": preset_conservation,
    "airy": preset_airy,
    "traveling_wave": preset_traveling_wave,
    "epsilon_sweep": preset_epsilon_sweep,
    "dt_order": preset_dt_order,
    "long_time": preset_long_time,
    "uniqueness_perturbation": preset_uniqueness,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult(config=cfg)
    start = time.perf_counter()
    try:
        RUNNERS[cfg.preset](cfg, res)
    except ExperimentError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise ExperimentError(cfg.preset, exc) from exc
    res.elapsed = time.perf_counter() - start
    return res


# -- output ------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def manifest(cfg: ExperimentConfig) -> dict:
    return {
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "versions": {
            "geoflow": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
    }


def config_from_manifest(data: dict) -> ExperimentConfig:
    return make_config(dict(data["config"]))


def emit_report(res: ExperimentResult, path) -> dict[str, Path]:
    """Write ``diagnostics.csv``, ``audit.json`` and ``manifest.json`` into ``path``."""
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "csv": out / "diagnostics.csv",
            "audit": out / "audit.json",
            "manifest": out / "manifest.json",
        }
        with open(files["csv"], "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in res.reports:
                w.writerow([_fmt(v) for v in r.row()])
        audit = {
            "preset": res.config.preset,
            "status": res.status,
            "message": res.message,
            "summary": res.summary,
            "checks": res.checks,
            "audits": [json.loads(a.to_json()) for a in res.audits],
        }
        files["audit"].write_text(json.dumps(audit, indent=2, default=float) + "\n")
        files["manifest"].write_text(json.dumps(manifest(res.config), indent=2) + "\n")
    except OSError as exc:
        raise ExperimentError("emit_report", exc) from exc
    return files


def read_manifest(path) -> ExperimentConfig:
    return config_from_manifest(json.loads(Path(path).read_text()))
