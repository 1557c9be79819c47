import numpy as np
import pytest

from geoflow.space_forms import (
    DegenerateStateError,
    GeometryError,
    Kind,
    SpaceForm,
    curvature_op,
    metric_at,
    project_tangent,
    random_point,
    random_tangent,
    retract,
    ricci_form,
    verify_ricci_symmetry,
)

S2 = SpaceForm.sphere(2)
H2 = SpaceForm.hyperbolic(2)
R2 = SpaceForm.flat(2)
NORTH = np.array([0.0, 0.0, 1.0])


def test_constants():
    assert S2.curvature == 1 and H2.curvature == -1 and R2.curvature == 0
    assert SpaceForm.sphere(3).einstein_constant == 2
    assert H2.einstein_constant == -1
    assert list(H2.signature) == [1, 1, -1]
    assert S2.ambient_dim == 3 and R2.ambient_dim == 2
    assert SpaceForm.from_config("hyperbolic", 3, 1.0).ambient_dim == 4


def test_invalid_construction():
    with pytest.raises(GeometryError):
        SpaceForm.sphere(0)
    with pytest.raises(GeometryError):
        SpaceForm(Kind.SPHERE, 2, -1.0)
    with pytest.raises(ValueError):
        SpaceForm.from_config("torus", 2)


def test_metric_examples():
    assert metric_at(S2, NORTH, [1, 0, 0], [1, 0, 0]) == 1
    assert metric_at(H2, NORTH, [1, 0, 0], [1, 0, 0]) == 1
    assert metric_at(S2, NORTH, [1, 0, 0], [0, 1, 0]) == 0


def test_metric_rejects_bad_input():
    with pytest.raises(GeometryError):
        metric_at(S2, NORTH, [1, 0], [1, 0])
    with pytest.raises(GeometryError):
        metric_at(S2, NORTH, [0, 0, 1], [1, 0, 0])


def test_projection_examples():
    assert np.allclose(project_tangent(S2, NORTH, [0.3, 0, 0.7]), [0.3, 0, 0])
    assert np.allclose(project_tangent(R2, [4.0, 1.0], [2, 5]), [2, 5])
    assert np.allclose(project_tangent(S2, NORTH, [0, 0, 4]), 0)
    with pytest.raises(GeometryError):
        project_tangent(S2, [0, 0, 2.0], [1, 0, 0])


def test_hyperbolic_projection_matches_lorentz_form():
    rng = np.random.default_rng(0)
    p = random_point(H2, rng)
    v = rng.normal(size=3)
    lorentz = v + H2.inner(v, p) * p
    assert np.allclose(project_tangent(H2, p, v), lorentz, atol=1e-13)


def test_retract_examples():
    assert np.allclose(retract(S2, [0, 0, 2.0]), NORTH)
    assert np.allclose(retract(R2, [1, -3.0]), [1, -3])
    assert np.allclose(retract(H2, [0, 0, 2.0]), NORTH)
    with pytest.raises(DegenerateStateError):
        retract(S2, [0, 0, 0.4])
    with pytest.raises(DegenerateStateError):
        retract(H2, [0, 0, -2.0])
    with pytest.raises(DegenerateStateError):
        retract(H2, [1.0, 0, 0.5])


def test_retract_lands_on_manifold():
    rng = np.random.default_rng(1)
    for M in (S2, H2, SpaceForm.sphere(3, 4.0)):
        p = random_point(M, rng, 50, spread=0.5)
        q = p + 0.01 * M.radius * rng.normal(size=p.shape)
        assert np.max(M.residual(M.retract(q))) <= 1e-12 * max(1, abs(M.level))


def test_curvature_examples():
    X, Y = np.array([1.0, 0, 0]), np.array([0, 1.0, 0])
    assert np.allclose(curvature_op(S2, NORTH, X, Y, Y), X)
    assert np.allclose(curvature_op(H2, NORTH, X, Y, Y), -X)
    assert np.allclose(curvature_op(S2, NORTH, X, X, Y), 0)


def test_ricci_examples():
    S3 = SpaceForm.sphere(3)
    assert ricci_form(S3, [0, 0, 0, 1.0], [1, 0, 0, 0], [1, 0, 0, 0]) == 2
    assert ricci_form(H2, NORTH, [1, 0, 0], [1, 0, 0]) == -1
    assert ricci_form(R2, [0, 0], [1, 2], [3, 4]) == 0


@pytest.mark.parametrize("M", [S2, H2, SpaceForm.sphere(3), SpaceForm.hyperbolic(4), R2])
def test_verify_ricci_symmetry_seeded(M):
    rng = np.random.default_rng(42)
    p = random_point(M, rng)
    X, Y, Z, W = (random_tangent(M, p, rng) for _ in range(4))
    assert all(verify_ricci_symmetry(M, p, X, Y, Z, W).values())


def test_flat_identities_vanish():
    rng = np.random.default_rng(3)
    X, Y, Z = rng.normal(size=(3, 2))
    assert np.all(R2.curvature_apply(X, Y, Z) == 0)
    assert R2.ricci(X, Y) == 0


def test_h2_paired_orderings():
    rng = np.random.default_rng(5)
    p = random_point(H2, rng)
    X, Y = (random_tangent(H2, p, rng) for _ in range(2))
    a = H2.ricci(X, H2.curvature_apply(X, Y, Y))
    b = H2.ricci(X, H2.curvature_apply(X, Y, Y))
    assert a == b
    assert all(verify_ricci_symmetry(H2, p, X, Y, X, Y).values())
