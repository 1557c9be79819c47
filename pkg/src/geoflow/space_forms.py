"""Constant-curvature targets embedded in a flat ambient space.

A :class:`SpaceForm` is a sphere, a hyperboloid (upper sheet, Minkowski
ambient) or a flat Euclidean space. All geometry is extrinsic: points and
tangent vectors are arrays of ambient coordinates, with the last axis running
over ambient components, so every routine broadcasts over a loop of grid
nodes at once.

Curvature convention: ``R(X, Y)Z = kappa * (<Y, Z> X - <X, Z> Y)`` so that
``<R(X, Y)Y, X>`` is the sectional curvature and ``Ric = (n - 1) kappa h``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np

ON_MANIFOLD_TOL = 1e-12
TANGENT_TOL = 1e-10


class GeometryError(ValueError):
    """Invalid geometric input (wrong shape, off the manifold, not tangent)."""


class DegenerateStateError(GeometryError):
    """A point left the tubular neighbourhood in which retraction is defined."""


class Kind(str, enum.Enum):
    SPHERE = "sphere"
    HYPERBOLIC = "hyperbolic"
    FLAT = "flat"


@dataclass(frozen=True)
class SpaceForm:
    """Space form of dimension ``dim`` and curvature ``+-curvature_scale``.

    ``curvature_scale`` is ``|kappa|``; it is ignored for flat targets.
    """

    kind: Kind
    dim: int
    curvature_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if int(self.dim) != self.dim or self.dim < 1:
            raise GeometryError(f"intrinsic dimension must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        if self.kind is Kind.FLAT:
            object.__setattr__(self, "curvature_scale", 0.0)
        elif not self.curvature_scale > 0:
            raise GeometryError("curvature_scale must be positive for curved targets")

    @classmethod
    def sphere(cls, dim: int = 2, curvature_scale: float = 1.0) -> "SpaceForm":
        return cls(Kind.SPHERE, dim, curvature_scale)

    @classmethod
    def hyperbolic(cls, dim: int = 2, curvature_scale: float = 1.0) -> "SpaceForm":
        return cls(Kind.HYPERBOLIC, dim, curvature_scale)

    @classmethod
    def flat(cls, dim: int = 1) -> "SpaceForm":
        return cls(Kind.FLAT, dim, 0.0)

    @classmethod
    def from_config(cls, target: str, dim: int, curvature_scale: float = 1.0) -> "SpaceForm":
        return cls(Kind(target), dim, curvature_scale)

    # -- derived constants -------------------------------------------------

    @property
    def ambient_dim(self) -> int:
        return self.dim if self.kind is Kind.FLAT else self.dim + 1

    @property
    def curvature(self) -> float:
        """Signed sectional curvature kappa."""
        if self.kind is Kind.SPHERE:
            return float(self.curvature_scale)
        if self.kind is Kind.HYPERBOLIC:
            return -float(self.curvature_scale)
        return 0.0

    @property
    def einstein_constant(self) -> float:
        return (self.dim - 1) * self.curvature

    @cached_property
    def signature(self) -> np.ndarray:
        sig = np.ones(self.ambient_dim)
        if self.kind is Kind.HYPERBOLIC:
            sig[-1] = -1.0
        sig.setflags(write=False)
        return sig

    @property
    def level(self) -> float:
        """Value of <p, p> on the manifold (nan when unconstrained)."""
        if self.kind is Kind.FLAT:
            return float("nan")
        return 1.0 / self.curvature

    @property
    def radius(self) -> float:
        return 1.0 / np.sqrt(self.curvature_scale) if self.kind is not Kind.FLAT else float("inf")

    # -- vectorised primitives (no validation) -----------------------------

    def inner(self, X, Y) -> np.ndarray:
        """Signature-weighted ambient inner product over the last axis."""
        X = np.asarray(X, dtype=float)
        Y = np.asarray(Y, dtype=float)
        if self.kind is Kind.HYPERBOLIC:
            return np.einsum("...i,i,...i->...", X, self.signature, Y)
        return np.einsum("...i,...i->...", X, Y)

    def project(self, p, v) -> np.ndarray:
        if self.kind is Kind.FLAT:
            return np.array(v, dtype=float, copy=True)
        return self.projector(p)(v)

    def projector(self, p):
        """Return ``v -> P(p) v`` with the normal direction precomputed."""
        if self.kind is Kind.FLAT:
            return lambda v: np.array(v, dtype=float, copy=True)
        p = np.asarray(p, dtype=float)
        w = p / self.inner(p, p)[..., None]
        return lambda v: v - self.inner(v, p)[..., None] * w

    def retract(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        if self.kind is Kind.FLAT:
            return q.copy()
        s = self.inner(q, q) * self.curvature
        if self.kind is Kind.SPHERE:
            bad = ~(s > 0.25)
        else:
            bad = ~((s > 0.25) & (q[..., -1] > 0))
        if np.any(bad):
            raise DegenerateStateError("point outside the retraction tube")
        return q / np.sqrt(s)[..., None]

    def residual(self, p) -> np.ndarray:
        """Pointwise on-manifold residual | <p, p> - 1/kappa | (zeros if flat)."""
        p = np.asarray(p, dtype=float)
        if self.kind is Kind.FLAT:
            return np.zeros(p.shape[:-1])
        return np.abs(self.inner(p, p) - self.level)

    def curvature_apply(self, X, Y, Z) -> np.ndarray:
        k = self.curvature
        return k * (self.inner(Y, Z)[..., None] * X - self.inner(X, Z)[..., None] * Y)

    def ricci(self, X, Y) -> np.ndarray:
        return self.einstein_constant * self.inner(X, Y)

    # -- validation helpers ------------------------------------------------

    def check_points(self, p, tol: float = ON_MANIFOLD_TOL) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if p.shape[-1] != self.ambient_dim:
            raise GeometryError(f"expected ambient dimension {self.ambient_dim}, got {p.shape[-1]}")
        if self.kind is not Kind.FLAT:
            scale = max(1.0, abs(self.level))
            if np.max(self.residual(p), initial=0.0) > tol * scale:
                raise GeometryError("point is not on the manifold")
            if self.kind is Kind.HYPERBOLIC and np.any(p[..., -1] <= 0):
                raise GeometryError("point is on the lower sheet")
        return p

    def check_tangent(self, p, *vectors, tol: float = TANGENT_TOL) -> None:
        p = np.asarray(p, dtype=float)
        for v in vectors:
            v = np.asarray(v, dtype=float)
            if v.shape[-1] != self.ambient_dim:
                raise GeometryError(f"expected ambient dimension {self.ambient_dim}, got {v.shape[-1]}")
            if self.kind is Kind.FLAT:
                continue
            normal = np.abs(self.inner(v, p)) / np.sqrt(np.abs(self.inner(p, p)))
            size = np.sqrt(np.abs(np.sum(v * v, axis=-1))) + 1.0
            if np.any(normal > tol * size):
                raise GeometryError("vector is not tangent at its base point")


# -- checked operations ---------------------------------------------------


def metric_at(M: SpaceForm, p, X, Y, tol: float = TANGENT_TOL) -> np.ndarray | float:
    """Inner product of tangent vectors ``X`` and ``Y`` at ``p``."""
    p = M.check_points(p, tol=max(tol, ON_MANIFOLD_TOL))
    M.check_tangent(p, X, Y, tol=tol)
    out = M.inner(X, Y)
    return float(out) if np.ndim(out) == 0 else out


def project_tangent(M: SpaceForm, p, v, tol: float = 1e-8) -> np.ndarray:
    """Orthogonal (w.r.t. the ambient form) projection of ``v`` onto ``T_p N``."""
    p = M.check_points(p, tol=tol)
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != M.ambient_dim:
        raise GeometryError(f"expected ambient dimension {M.ambient_dim}, got {v.shape[-1]}")
    return M.project(p, v)


def retract(M: SpaceForm, q) -> np.ndarray:
    """Nearest-point normalisation back onto ``M``.

    Raises :class:`DegenerateStateError` outside the tube of radius 0.5
    (measured in units of the target radius).
    """
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != M.ambient_dim:
        raise GeometryError(f"expected ambient dimension {M.ambient_dim}, got {q.shape[-1]}")
    return M.retract(q)


def curvature_op(M: SpaceForm, p, X, Y, Z, tol: float = TANGENT_TOL) -> np.ndarray:
    p = M.check_points(p, tol=max(tol, ON_MANIFOLD_TOL))
    M.check_tangent(p, X, Y, Z, tol=tol)
    return M.curvature_apply(np.asarray(X, float), np.asarray(Y, float), np.asarray(Z, float))


def ricci_form(M: SpaceForm, p, X, Y, tol: float = TANGENT_TOL) -> np.ndarray | float:
    p = M.check_points(p, tol=max(tol, ON_MANIFOLD_TOL))
    M.check_tangent(p, X, Y, tol=tol)
    out = M.ricci(X, Y)
    return float(out) if np.ndim(out) == 0 else out


def verify_ricci_symmetry(M: SpaceForm, p, X, Y, Z, W, tol: float = 1e-12) -> dict[str, bool]:
    """Check the Ricci/curvature symmetries used by the energy identities.

    Inputs may be single vectors or stacks of samples. Each identity is
    tested with a tolerance scaled by the size of the terms involved.
    """
    p = M.check_points(p, tol=1e-10)
    X, Y, Z, W = (M.project(p, np.asarray(v, float)) for v in (X, Y, Z, W))
    ric, R = M.ricci, M.curvature_apply

    # rounding scales with the factors, not with the (possibly cancelling) result
    nx, ny, nz, nw = (np.linalg.norm(v, axis=-1) for v in (X, Y, Z, W))
    quad_scale = 1.0 + abs(M.einstein_constant * M.curvature) * nx * ny * nz * nw
    pair_scale = 1.0 + abs(M.einstein_constant) * nx * ny

    def close(a, b, scale):
        return bool(np.all(np.abs(a - b) <= tol * scale))

    lhs = ric(X, R(Z, W, Y))
    swapped = -ric(X, R(W, Z, Y))
    exchanged = ric(Z, R(X, Y, W))
    bianchi = R(X, Y, Z) + R(Y, Z, X) + R(Z, X, Y)
    size = 1.0 + abs(M.curvature) * nx * ny * nz
    cancel = ric(X, R(Y, X, X))
    return {
        "antisymmetry": close(lhs, swapped, quad_scale),
        "pair_exchange": close(lhs, exchanged, quad_scale),
        "bianchi": bool(np.all(np.linalg.norm(bianchi, axis=-1) <= tol * size)),
        "cancellation": close(cancel, 0.0, 1.0 + abs(M.einstein_constant * M.curvature) * nx**3 * ny),
        "ricci_symmetric": close(ric(X, Y), ric(Y, X), pair_scale),
        "tangent_output": bool(np.all(np.abs(M.inner(R(X, Y, Z), p)) <= tol * size * 10 * (1 + np.linalg.norm(p, axis=-1)))),
    }


def random_point(M: SpaceForm, rng: np.random.Generator, size=None, spread: float = 1.0) -> np.ndarray:
    """Sample points on ``M`` (Gaussian ambient draw, then retract)."""
    shape = (() if size is None else tuple(np.atleast_1d(size))) + (M.ambient_dim,)
    q = rng.normal(size=shape) * spread
    if M.kind is Kind.SPHERE:
        return q / (np.sqrt(M.curvature_scale) * np.linalg.norm(q, axis=-1, keepdims=True))
    if M.kind is Kind.HYPERBOLIC:
        space = q[..., :-1]
        last = np.sqrt(1.0 / M.curvature_scale + np.sum(space**2, axis=-1))
        return np.concatenate([space, last[..., None]], axis=-1)
    return q


def random_tangent(M: SpaceForm, p, rng: np.random.Generator) -> np.ndarray:
    return M.project(p, rng.normal(size=np.shape(p)))
