"""Periodic grids on the circle and covariant derivatives along loops.

Covariant derivatives are computed extrinsically: differentiate the ambient
coordinates, then project onto the tangent space at each node. Iterating
this gives the stack ``[u_x, nabla u_x, nabla^2 u_x, ...]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import lru_cache
from math import factorial

import numpy as np

from .space_forms import GeometryError, SpaceForm

MAX_STACK_DEPTH = 5
MAX_FD_ORDER = 4


class Scheme(str, enum.Enum):
    SPECTRAL = "spectral"
    FD2 = "fd2"
    FD4 = "fd4"


@dataclass(frozen=True)
class LoopGrid:
    """Uniform grid ``x_j = j * 2pi / M`` on ``[0, 2pi)``."""

    points: int

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 8:
            raise ValueError(f"grid needs at least 8 points, got {self.points}")
        object.__setattr__(self, "points", int(self.points))

    @property
    def dx(self) -> float:
        return 2.0 * np.pi / self.points

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.points) * self.dx

    @property
    def k_max(self) -> int:
        return self.points // 2

    def wavenumbers(self) -> np.ndarray:
        """Non-negative wavenumbers matching ``numpy.fft.rfft`` output."""
        return np.fft.rfftfreq(self.points, 1.0 / self.points)

    def quad(self, f) -> float | np.ndarray:
        """Trapezoidal rule over the period (sum over the first axis)."""
        return self.dx * np.sum(f, axis=0)


@dataclass(frozen=True, eq=False)
class MapState:
    """Samples of a loop ``u: S^1 -> N`` in ambient coordinates, shape ``(M, m)``."""

    grid: LoopGrid
    values: np.ndarray
    target: SpaceForm
    tol: float = field(default=1e-8, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.points, self.target.ambient_dim):
            raise GeometryError(
                f"values must have shape {(self.grid.points, self.target.ambient_dim)}, got {v.shape}"
            )
        if np.all(np.isfinite(v)):
            self.target.check_points(v, tol=self.tol)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def residual(self) -> float:
        return float(np.max(self.target.residual(self.values), initial=0.0))

    def with_values(self, values: np.ndarray, tol: float | None = None) -> "MapState":
        return MapState(self.grid, values, self.target, self.tol if tol is None else tol)


@dataclass(frozen=True, eq=False)
class TangentField:
    """Ambient vectors along a loop, each tangent at its base point."""

    grid: LoopGrid
    vectors: np.ndarray
    base: MapState

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=float)
        if v.shape != self.base.values.shape:
            raise GeometryError("tangent field shape does not match its base loop")
        if np.all(np.isfinite(v)):
            self.base.target.check_tangent(self.base.values, v)
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    def __add__(self, other: "TangentField") -> "TangentField":
        return TangentField(self.grid, self.vectors + other.vectors, self.base)

    def __rmul__(self, a: float) -> "TangentField":
        return TangentField(self.grid, a * self.vectors, self.base)

    def norm_sq(self) -> np.ndarray:
        return self.base.target.inner(self.vectors, self.vectors)


# -- ambient derivatives ----------------------------------------------------


@lru_cache(maxsize=64)
def _spectral_symbol(M: int, order: int) -> np.ndarray:
    k = np.fft.rfftfreq(M, 1.0 / M)
    sym = (1j * k) ** order
    if order % 2 == 1 and M % 2 == 0:
        sym[-1] = 0.0
    sym.setflags(write=False)
    return sym


@lru_cache(maxsize=32)
def fd_weights(order: int, accuracy: int) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Centred finite-difference weights for the ``order``-th derivative.

    Solves the Taylor moment conditions on the smallest symmetric stencil
    that reaches the requested accuracy.
    """
    half = (order + 1) // 2 + accuracy // 2 - 1
    offsets = np.arange(-half, half + 1)
    n = offsets.size
    A = np.array([offsets.astype(float) ** q / factorial(q) for q in range(n)])
    rhs = np.zeros(n)
    rhs[order] = 1.0
    w = np.linalg.solve(A, rhs)
    w[np.abs(w) < 1e-13] = 0.0
    return tuple(int(s) for s in offsets), tuple(float(c) for c in w)


def ambient_deriv(f, order: int = 1, scheme: Scheme | str = Scheme.SPECTRAL) -> np.ndarray:
    """``order``-th x-derivative of periodic samples along axis 0.

    ``f`` has shape ``(M,)`` or ``(M, m)`` and is assumed to sample one period
    on a uniform grid.
    """
    scheme = Scheme(scheme)
    f = np.asarray(f, dtype=float)
    M = f.shape[0]
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    if scheme is Scheme.SPECTRAL:
        if M < 8:
            raise ValueError("spectral differentiation needs at least 8 points")
        sym = _spectral_symbol(M, order)
        if f.ndim > 1:
            sym = sym.reshape((-1,) + (1,) * (f.ndim - 1))
        return np.fft.irfft(sym * np.fft.rfft(f, axis=0), n=M, axis=0)
    if order > MAX_FD_ORDER:
        raise ValueError(f"finite-difference schemes support order <= {MAX_FD_ORDER}")
    if M < 2 * order + 2:
        raise ValueError(f"{scheme.value} order-{order} derivative needs M >= {2 * order + 2}")
    offsets, weights = fd_weights(order, 2 if scheme is Scheme.FD2 else 4)
    h = 2.0 * np.pi / M
    out = np.zeros_like(f)
    for s, w in zip(offsets, weights):
        if w:
            out += w * np.roll(f, -s, axis=0)
    return out / h**order


def dealias(f) -> np.ndarray:
    """Zero Fourier modes with ``|k| > M/3`` (2/3 rule) along axis 0."""
    f = np.asarray(f, dtype=float)
    M = f.shape[0]
    fh = np.fft.rfft(f, axis=0)
    k = np.fft.rfftfreq(M, 1.0 / M)
    fh[k > M / 3.0] = 0.0
    return np.fft.irfft(fh, n=M, axis=0)


# -- covariant derivatives ----------------------------------------------------


def stack_values(target: SpaceForm, values: np.ndarray, depth: int, scheme=Scheme.SPECTRAL) -> list[np.ndarray]:
    """Raw-array version of :func:`cov_stack`: ``[u_x, ..., nabla^depth u_x]``."""
    if depth > MAX_STACK_DEPTH:
        raise ValueError(f"covariant stack depth is capped at {MAX_STACK_DEPTH}")
    if depth < 0:
        raise ValueError("depth must be non-negative")
    P = target.projector(values)
    scheme = Scheme(scheme)
    if scheme is Scheme.SPECTRAL:
        M = values.shape[0]
        sym = _spectral_symbol(M, 1)[:, None]
        D = lambda f: np.fft.irfft(sym * np.fft.rfft(f, axis=0), n=M, axis=0)
    else:
        D = lambda f: ambient_deriv(f, 1, scheme)
    out = [P(D(values))]
    for _ in range(depth):
        out.append(P(D(out[-1])))
    return out


def velocity(u: MapState, scheme=Scheme.SPECTRAL) -> TangentField:
    """Tangent velocity ``u_x``: ambient derivative followed by projection."""
    v = u.target.project(u.values, ambient_deriv(u.values, 1, scheme))
    return TangentField(u.grid, v, u)


def cov_deriv(u: MapState, V: TangentField, scheme=Scheme.SPECTRAL) -> TangentField:
    """Covariant derivative ``nabla_x V = P(u) d/dx V`` along the loop."""
    if V.vectors.shape != u.values.shape:
        raise GeometryError("field and loop have different shapes")
    w = u.target.project(u.values, ambient_deriv(V.vectors, 1, scheme))
    return TangentField(u.grid, w, u)


def cov_stack(u: MapState, depth: int, scheme=Scheme.SPECTRAL) -> list[TangentField]:
    """``[u_x, nabla_x u_x, ..., nabla_x^depth u_x]`` (depth at most 5)."""
    return [TangentField(u.grid, v, u) for v in stack_values(u.target, u.values, depth, scheme)]
