"""End-to-end acceptance criteria; each test prints one PASS/FAIL line."""

import numpy as np
import pytest

from geoflow.experiments import build_initial, make_config, run_experiment
from geoflow.flow import integrate
from geoflow.functionals import energy_E1, energy_report, ricci_sobolev_I, sobolev_H
from geoflow.oracles import conservation_audit
from geoflow.space_forms import SpaceForm, random_point, random_tangent, verify_ricci_symmetry

# tolerances
E1_DRIFT = 1e-8
E2_DRIFT = 1e-7
DE3_MISMATCH = 1e-4
CANCELLATION = 1e-10
REFINE_FACTOR = 8
RUNTIME = 60.0
AIRY_L2 = 1e-9
AIRY_MODES = 1e-10
WAVE_ERR = 1e-8
ORDER, ORDER_TOL = 4.0, 0.2
MONOTONE_SLACK = 1e-10
EPS_ORDER = 0.8
STRUCTURE = 1e-12
SAMPLES = 1000

pytestmark = pytest.mark.slow

CONSERVATION = {"preset": "conservation", "rho": 0.5, "family": "perturbed_circle", "modes": 3, "amplitude": 0.1, "seed": 42}


@pytest.fixture(scope="module")
def sphere_run():
    cfg = make_config({**CONSERVATION, "target": "sphere", "dim": 2, "grid_size": 256, "t_end": 0.05, "dt": "auto"})
    return cfg, run_experiment(cfg)


@pytest.fixture(scope="module")
def sphere_refined(sphere_run):
    """Same run at half the automatic step."""
    cfg, res = sphere_run
    dt = cfg.t_end / res.summary["steps"]
    u0 = build_initial(cfg)
    fc = cfg.flow_config(dt=dt / 2)
    traj = integrate(u0, fc, lambda t, u: energy_report(u, cfg.rho, t=t), keep_states=False)
    assert traj.ok, traj.message
    return {f: conservation_audit(traj, f).max_drift for f in ("E1", "E2")}


def test_c1_e1_conservation(sphere_run, verdict):
    _, res = sphere_run
    assert res.status == "ok", res.message
    d = res.summary["E1_drift"]
    ok = verdict("C1 E1 drift", d <= E1_DRIFT and res.elapsed <= RUNTIME, f"drift {d:.2e} (<= {E1_DRIFT:g}), runtime {res.elapsed:.1f}s (<= {RUNTIME:g}s)")
    assert ok


def test_c1_e1_refinement(sphere_run, sphere_refined, verdict):
    d, dh = sphere_run[1].summary["E1_drift"], sphere_refined["E1"]
    ratio = d / dh
    ok = verdict("C1 E1 drift refinement", ratio >= REFINE_FACTOR, f"drift(dt)/drift(dt/2) = {ratio:.3f} (>= {REFINE_FACTOR})")
    assert ok


def test_c2_e2_conservation(sphere_run, verdict):
    d = sphere_run[1].summary["E2_drift"]
    ok = verdict("C2 E2 drift", d <= E2_DRIFT, f"drift {d:.2e} (<= {E2_DRIFT:g})")
    assert ok


def test_c2_e2_refinement(sphere_run, sphere_refined, verdict):
    ratio = sphere_run[1].summary["E2_drift"] / sphere_refined["E2"]
    ok = verdict("C2 E2 drift refinement", ratio >= REFINE_FACTOR, f"drift(dt)/drift(dt/2) = {ratio:.3f} (>= {REFINE_FACTOR})")
    assert ok


def test_c3_de3_identity(sphere_run, verdict):
    s = sphere_run[1].summary
    ok = s["dE3_mismatch"] <= DE3_MISMATCH and s["cancellation"] <= CANCELLATION
    ok = verdict(
        "C3 dE3/dt identity",
        ok,
        f"FD mismatch {s['dE3_mismatch']:.2e} (<= {DE3_MISMATCH:g}), cancellation {s['cancellation']:.2e} (<= {CANCELLATION:g})",
    )
    assert ok


def test_c4_airy(verdict):
    cfg = make_config(
        {"preset": "airy", "rho": 0.5, "grid_size": 128, "t_end": 0.5, "coefficients": {"1": 1.0, "2": 0.3}}
    )
    res = run_experiment(cfg)
    err, mag = res.summary["relative_l2_error"], res.summary["max_mode_magnitude_change"]
    ok = verdict("C4 Airy reduction", err <= AIRY_L2 and mag <= AIRY_MODES, f"L2 error {err:.2e} (<= {AIRY_L2:g}), |u_k| change {mag:.2e} (<= {AIRY_MODES:g})")
    assert ok


def test_c5_traveling_wave(verdict):
    res = run_experiment(make_config({"preset": "traveling_wave", "rho": 0.5, "t_end": 1.0}))
    err, order = res.summary["max_error"], res.summary["order"]
    ok = err <= WAVE_ERR and abs(order - ORDER) <= ORDER_TOL
    ok = verdict("C5 traveling wave", ok, f"max error {err:.2e} (<= {WAVE_ERR:g}), order {order:.3f} (4 +- {ORDER_TOL})")
    assert ok


def test_c6_regularized_monotone(verdict):
    cfg = make_config({**CONSERVATION, "grid_size": 128, "t_end": 0.02, "epsilon": 0.01, "record_dt": 1e-4})
    traj = integrate(build_initial(cfg), cfg.flow_config(), lambda t, u: energy_E1(u), keep_states=False)
    e = np.array(traj.records)
    rise = float(np.max(np.diff(e)))
    ok = traj.ok and rise <= MONOTONE_SLACK
    ok = verdict("C6 regularized E1 monotone", ok, f"largest increase {rise:.2e} over {len(e)} records (<= {MONOTONE_SLACK:g})")
    assert ok


def test_c7_epsilon_convergence(verdict):
    cfg = make_config({**CONSERVATION, "preset": "epsilon_sweep", "epsilons": [1e-2, 5e-3, 2.5e-3], "t_end": 0.02})
    res = run_experiment(cfg)
    errs = [e for _, e in res.summary["errors"]]
    dec = all(b < a for a, b in zip(errs, errs[1:]))
    order = res.summary["order"]
    ok = verdict("C7 epsilon convergence", dec and order >= EPS_ORDER, f"errors {', '.join(f'{e:.2e}' for e in errs)}, order {order:.3f} (>= {EPS_ORDER})")
    assert ok


def test_c8_long_time(verdict):
    res = run_experiment(make_config({"preset": "long_time", "rho": 0.5, "t_end": 5.0, "grid_size": 256}))
    s = res.summary
    ok = res.status == "ok" and res.passed and np.isfinite(s["c1"]) and np.isfinite(s["c2"])
    ok = verdict(
        "C8 global existence",
        ok,
        f"T={s.get('t_final')}, sup E3 {s.get('sup_E3', float('nan')):.4g}, sup H2 {s.get('sup_H2', float('nan')):.4g}, c1={s.get('c1')}, c2={s.get('c2')}",
    )
    assert ok


def test_c9_uniqueness(verdict):
    res = run_experiment(make_config({"preset": "uniqueness_perturbation", "rho": 0.5, "delta": 1e-6}))
    s = res.summary
    ok = verdict(
        "C9 uniqueness proxy",
        res.passed,
        f"d(0) {s['delta']:.3e}, fitted slope {s['fitted_slope']:.4f}, same-IC distance {s['same_ic_distance']}",
    )
    assert ok


STRUCTURE_TARGETS = {
    "S2": SpaceForm.sphere(2),
    "S3(k=0.5)": SpaceForm.sphere(3, 0.5),
    "H2": SpaceForm.hyperbolic(2),
    "H3(k=2)": SpaceForm.hyperbolic(3, 2.0),
    "R2": SpaceForm.flat(2),
}


def _ricci_compatibility(M, p, X, Y, dX, dY):
    """Max defect of Ric(D X, Y) + Ric(X, D Y) = D Ric(X, Y) for the extrinsic connection."""
    lam = M.einstein_constant
    lhs = M.ricci(M.project(p, dX), Y) + M.ricci(X, M.project(p, dY))
    rhs = lam * (M.inner(dX, Y) + M.inner(X, dY))
    n = lambda v: np.linalg.norm(v, axis=-1)
    scale = 1.0 + abs(lam) * (n(dX) * n(Y) + n(X) * n(dY))
    return float(np.max(np.abs(lhs - rhs) / scale))


def test_c10_structure(verdict):
    rng = np.random.default_rng(2024)
    worst = {}
    ok = True
    for name, M in STRUCTURE_TARGETS.items():
        p = random_point(M, rng, SAMPLES)
        X, Y, Z, W = (random_tangent(M, p, rng) for _ in range(4))
        checks = verify_ricci_symmetry(M, p, X, Y, Z, W, tol=STRUCTURE)
        dX, dY = rng.normal(size=(2, SAMPLES, M.ambient_dim))
        compat = _ricci_compatibility(M, p, X, Y, dX, dY)
        worst[name] = compat
        ok &= all(checks.values()) and compat <= STRUCTURE

    norm_err = 0.0
    for M in (SpaceForm.sphere(2), SpaceForm.sphere(3, 0.5)):
        cfg = make_config(
            {"preset": "conservation", "rho": 0.5, "family": "random_band_limited", "dim": M.dim, "curvature_scale": M.curvature_scale, "grid_size": 128}
        )
        u = build_initial(cfg)
        I = np.array(ricci_sobolev_I(u, 4))
        semi = np.diff(np.concatenate([[0.0], sobolev_H(u, 4)]))
        norm_err = max(norm_err, float(np.max(np.abs(I - M.einstein_constant * semi) / np.abs(I))))
    ok &= norm_err <= STRUCTURE

    hyp = run_experiment(make_config({**CONSERVATION, "target": "hyperbolic", "amplitude": 0.05}))
    s = hyp.summary
    hyp_ok = (
        hyp.status == "ok"
        and s["E1_drift"] <= E1_DRIFT
        and s["E2_drift"] <= E2_DRIFT
        and s["dE3_mismatch"] <= DE3_MISMATCH
        and s["cancellation"] <= CANCELLATION
    )
    ok &= hyp_ok
    ok = verdict(
        "C10 structure",
        bool(ok),
        f"identities on {SAMPLES} samples/target (worst compatibility {max(worst.values()):.1e}), norm identity {norm_err:.1e}; "
        f"hyperbolic run E1 {s.get('E1_drift', float('nan')):.1e} E2 {s.get('E2_drift', float('nan')):.1e} "
        f"dE3 {s.get('dE3_mismatch', float('nan')):.1e} cancel {s.get('cancellation', float('nan')):.1e}",
    )
    assert ok
