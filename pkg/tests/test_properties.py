import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoflow.discretization import LoopGrid, MapState, cov_deriv, cov_stack, dealias
from geoflow.experiments import build_initial, make_config
from geoflow.flow import FlowConfig, diff_w12
from geoflow.oracles import SpectrumState, airy_exact, order_estimate
from geoflow.space_forms import SpaceForm, random_point, random_tangent, verify_ricci_symmetry

TARGETS = [
    SpaceForm.sphere(2),
    SpaceForm.sphere(3, 0.5),
    SpaceForm.hyperbolic(2),
    SpaceForm.hyperbolic(3, 2.0),
    SpaceForm.flat(2),
]
seeds = st.integers(0, 2**32 - 1)
targets = st.sampled_from(TARGETS)


def frame(M, seed, k=4):
    rng = np.random.default_rng(seed)
    p = random_point(M, rng, spread=1.0)
    return p, [random_tangent(M, p, rng) for _ in range(k)]


@given(targets, seeds)
def test_projection_idempotent_and_self_adjoint(M, seed):
    rng = np.random.default_rng(seed)
    p = random_point(M, rng, spread=1.0)
    v, w = rng.normal(size=(2, M.ambient_dim))
    Pv = M.project(p, v)
    assert np.allclose(M.project(p, Pv), Pv, rtol=0, atol=1e-13 * max(1, np.abs(v).max() * np.abs(p).max() ** 2))
    a = M.inner(Pv, w)
    b = M.inner(v, M.project(p, w))
    assert abs(a - b) <= 1e-12 * max(1, np.abs(p).max() ** 2 * np.abs(v).max() * np.abs(w).max())
    if M.curvature != 0:
        assert abs(M.inner(Pv, p)) <= 1e-12 * max(1, np.abs(p).max() ** 3 * np.abs(v).max())


@given(targets, seeds)
def test_curvature_symmetries(M, seed):
    p, (X, Y, Z, W) = frame(M, seed)
    checks = verify_ricci_symmetry(M, p, X, Y, Z, W)
    assert all(checks.values()), checks
    assert np.array_equal(M.curvature_apply(X, Y, Z), -M.curvature_apply(Y, X, Z))


@given(targets, seeds)
def test_ricci_kills_curvature_along_a(M, seed):
    p, (A, B, _, _) = frame(M, seed)
    scale = max(1.0, float(np.max(np.abs([A, B]))) ** 4 * abs(M.curvature) ** 2)
    assert abs(M.ricci(A, M.curvature_apply(B, A, A))) <= 1e-12 * scale


@given(targets, seeds)
def test_ricci_is_einstein_multiple(M, seed):
    p, (X, Y, _, _) = frame(M, seed)
    lam = M.einstein_constant
    assert M.ricci(X, Y) == pytest.approx(lam * M.inner(X, Y), rel=1e-12, abs=1e-12)


@given(targets, seeds)
def test_retract_is_idempotent(M, seed):
    rng = np.random.default_rng(seed)
    p = random_point(M, rng, spread=1.0)
    q = M.retract(p)
    assert np.allclose(M.retract(q), q, rtol=1e-14, atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(seeds, st.floats(0, 3), st.floats(0, 3))
def test_airy_group_and_isometry(seed, t1, t2):
    rng = np.random.default_rng(seed)
    g = LoopGrid(32)
    x = g.nodes
    c = rng.normal(size=(6, 2))
    vals = sum(c[k, 0] * np.cos(k * x) + c[k, 1] * np.sin(k * x) for k in range(6))
    u0 = MapState(g, vals[:, None], SpaceForm.flat(1))
    a = airy_exact(airy_exact(u0, t1), t2).values
    b = airy_exact(u0, t1 + t2).values
    assert np.max(np.abs(a - b)) <= 1e-13 * max(1, np.abs(vals).max())
    s = SpectrumState.from_values(vals[:, None])
    assert np.allclose(s.airy(t1).magnitudes(), s.magnitudes(), rtol=1e-15, atol=0)


@given(st.floats(0.5, 6), st.floats(1e-3, 1e3), st.integers(3, 6))
def test_order_estimate_recovers_power(p, c, n):
    hs = [2.0**-k for k in range(n)]
    assert order_estimate([(h, c * h**p) for h in hs]) == pytest.approx(p, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(-3, 3), st.floats(-3, 3))
def test_cov_deriv_linear(seed, a, b):
    u = build_initial(make_config({"preset": "conservation", "rho": 0.5, "grid_size": 32, "seed": seed % 1000}))
    V, W = cov_stack(u, 1)
    lhs = cov_deriv(u, a * V + b * W).vectors
    rhs = a * cov_deriv(u, V).vectors + b * cov_deriv(u, W).vectors
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1, np.max(np.abs(rhs)))


@settings(max_examples=20, deadline=None)
@given(seeds, seeds)
def test_w12_symmetric(s1, s2):
    mk = lambda s: build_initial(make_config({"preset": "conservation", "rho": 0.5, "grid_size": 32, "seed": s % 1000}))
    u, v = mk(s1), mk(s2)
    assert diff_w12(u, v) == diff_w12(v, u)
    assert diff_w12(u, u) == 0


@given(st.integers(8, 128))
def test_dealias_idempotent(M):
    rng = np.random.default_rng(M)
    f = rng.normal(size=(M, 2))
    once = dealias(f)
    assert np.allclose(dealias(once), once, atol=1e-14)


@given(st.floats(allow_nan=True), st.floats(allow_nan=True))
def test_flow_config_rejects_bad_values(rho, t_end):
    ok = np.isfinite(rho) and rho > 0 and np.isfinite(t_end) and t_end > 0
    if ok:
        FlowConfig(rho=rho, t_end=t_end)
    else:
        with pytest.raises(ValueError):
            FlowConfig(rho=rho, t_end=t_end)
