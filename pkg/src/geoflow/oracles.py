"""Independent reference computations used to audit the solver.

* exact Fourier evolution of the vector Airy equation (flat targets),
* covariant derivatives on spheres in a stereographic chart,
* finite-difference audits of conserved and semi-conserved functionals,
* least-squares convergence orders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .discretization import MapState, Scheme, TangentField, ambient_deriv
from .flow import Trajectory
from .space_forms import GeometryError, Kind

POLE_MARGIN = 0.2


# -- Airy ------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumState:
    """One-sided Fourier coefficients (``rfft`` layout) of a real loop."""

    coeffs: np.ndarray
    points: int

    @classmethod
    def from_values(cls, values) -> "SpectrumState":
        values = np.asarray(values, dtype=float)
        return cls(np.fft.rfft(values, axis=0), values.shape[0])

    def to_values(self) -> np.ndarray:
        return np.fft.irfft(self.coeffs, n=self.points, axis=0)

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.fft.rfftfreq(self.points, 1.0 / self.points)

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.coeffs)

    def airy(self, t: float) -> "SpectrumState":
        k = self.wavenumbers
        phase = np.exp(-1j * k**3 * t)
        if self.points % 2 == 0:
            # the Nyquist mode carries no odd derivative on the grid
            phase[-1] = 1.0
        shape = (-1,) + (1,) * (self.coeffs.ndim - 1)
        return SpectrumState(self.coeffs * phase.reshape(shape), self.points)


def airy_exact(u0: MapState, t: float) -> MapState:
    """Exact solution of ``u_t = u_xxx`` at time ``t`` from ``u0``."""
    if u0.target.kind is not Kind.FLAT:
        raise GeometryError("the Airy oracle applies to flat targets only")
    evolved = SpectrumState.from_values(u0.values).airy(t)
    return MapState(u0.grid, evolved.to_values(), u0.target)


# -- stereographic chart on spheres ------------------------------------------------


def _orthonormal_complement(e: np.ndarray) -> np.ndarray:
    """Columns spanning the orthogonal complement of unit vector ``e``."""
    m = e.size
    basis = np.linalg.qr(np.column_stack([e, np.eye(m)]))[0]
    return basis[:, 1:m]


def choose_pole(points: np.ndarray, radius: float) -> tuple[np.ndarray, float]:
    """Pick the pole direction with the largest distance from the loop.

    Candidates are the direction opposite to the centroid and the signed
    coordinate axes. Returns the unit pole direction and its distance
    (in units of the radius) to the nearest loop point.
    """
    m = points.shape[1]
    cands = [s * row for row in np.eye(m) for s in (1.0, -1.0)]
    centroid = points.mean(axis=0)
    n = np.linalg.norm(centroid)
    if n > 1e-12:
        cands.insert(0, -centroid / n)
    best, best_d = None, -1.0
    for e in cands:
        d = np.min(np.linalg.norm(points - radius * e, axis=1)) / radius
        if d > best_d + 1e-12:
            best, best_d = e, d
    return best, best_d


@dataclass(frozen=True)
class StereoChart:
    """Stereographic chart of the sphere of radius ``r`` from the pole ``r e``."""

    e: np.ndarray
    r: float

    @property
    def Q(self) -> np.ndarray:
        return _orthonormal_complement(self.e)

    def to_chart(self, p) -> np.ndarray:
        pe = p @ self.e
        return self.r * (p @ self.Q) / (self.r - pe)[:, None]

    def from_chart(self, y) -> np.ndarray:
        r = self.r
        s = np.sum(y * y, axis=1) + r**2
        return (2 * r**2 / s)[:, None] * (y @ self.Q.T) + (r * (np.sum(y * y, axis=1) - r**2) / s)[:, None] * self.e

    def jacobian(self, y) -> np.ndarray:
        """``d p / d y`` at each node, shape ``(M, m, n)``."""
        r, Q, e = self.r, self.Q, self.e
        s = np.sum(y * y, axis=1) + r**2
        Qy = y @ Q.T
        J = (2 * r**2 / s)[:, None, None] * Q[None]
        J = J - (4 * r**2 / s**2)[:, None, None] * Qy[:, :, None] * y[:, None, :]
        J = J + (4 * r**3 / s**2)[:, None, None] * e[None, :, None] * y[:, None, :]
        return J

    def conformal_factor(self, y) -> np.ndarray:
        return 2 * self.r**2 / (np.sum(y * y, axis=1) + self.r**2)


def chart_cov_deriv(u: MapState, V: TangentField, scheme=Scheme.SPECTRAL) -> TangentField:
    """Covariant derivative along a sphere loop computed in a stereographic chart.

    The chart metric is ``phi^2 delta`` with ``phi = 2 r^2 / (|y|^2 + r^2)``;
    for ``f = log phi`` the Christoffel symbols are
    ``Gamma(a, b) = a (b . df) + b (a . df) - (a . b) df``.
    """
    if u.target.kind is not Kind.SPHERE:
        raise GeometryError("the chart oracle is implemented for spheres only")
    r = u.target.radius
    e, dist = choose_pole(u.values, r)
    if dist < POLE_MARGIN:
        raise GeometryError(f"loop comes within {dist:.3g} of every candidate pole")
    chart = StereoChart(e, r)
    y = chart.to_chart(u.values)
    J = chart.jacobian(y)
    phi = chart.conformal_factor(y)
    # J has orthogonal columns of length phi, so its left inverse is J^T / phi^2
    Vc = np.einsum("jmn,jm->jn", J, V.vectors) / (phi**2)[:, None]
    yx = ambient_deriv(y, 1, scheme)
    df = -2.0 * y / (np.sum(y * y, axis=1) + r**2)[:, None]
    dot = lambda a, b: np.sum(a * b, axis=1)[:, None]
    nabla = ambient_deriv(Vc, 1, scheme) + yx * dot(Vc, df) + Vc * dot(yx, df) - dot(yx, Vc) * df
    out = np.einsum("jmn,jn->jm", J, nabla)
    return TangentField(u.grid, out, u)


# -- audits ----------------------------------------------------------------------


@dataclass
class AuditResult:
    functional: str
    max_drift: float
    samples: list[dict] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps({"functional": self.functional, "max_drift": self.max_drift, "samples": self.samples})


def time_derivative(values, h: float) -> np.ndarray:
    """Fourth-order centred differences; third-order one-sided near the ends."""
    f = np.asarray(values, dtype=float)
    n = f.size
    if n < 5:
        raise ValueError("need at least 5 samples")
    d = np.empty(n)
    d[2:-2] = (f[:-4] - 8 * f[1:-3] + 8 * f[3:-1] - f[4:]) / (12 * h)
    d[0] = (-11 * f[0] + 18 * f[1] - 9 * f[2] + 2 * f[3]) / (6 * h)
    d[1] = (-2 * f[0] - 3 * f[1] + 6 * f[2] - f[3]) / (6 * h)
    d[-2] = (f[-4] - 6 * f[-3] + 3 * f[-2] + 2 * f[-1]) / (6 * h)
    d[-1] = (11 * f[-1] - 18 * f[-2] + 9 * f[-3] - 2 * f[-4]) / (6 * h)
    return d


def _uniform_step(times) -> float:
    t = np.asarray(times, dtype=float)
    steps = np.diff(t)
    h = float(np.mean(steps))
    if h <= 0 or np.max(np.abs(steps - h)) > 1e-9 * max(h, 1.0):
        raise ValueError("conservation audit needs records at a uniform time stride")
    return h


AUDIT_ABS_FLOOR = 1e-12


def conservation_audit(traj: Trajectory, functional: str) -> AuditResult:
    """Drift of E1/E2, or FD-vs-formula mismatch of dE3/dt, along a trajectory.

    ``traj.records`` must hold :class:`EnergyReport` objects.
    """
    functional = functional.upper()
    if functional not in ("E1", "E2", "E3"):
        raise ValueError(f"unknown functional {functional!r}")
    recs = traj.records
    if len(recs) < 5:
        raise ValueError("conservation audit needs at least 5 records")
    t = np.array([r.t for r in recs])
    if functional in ("E1", "E2"):
        vals = np.array([getattr(r, functional) for r in recs])
        ref = abs(vals[0])
        diff = np.abs(vals - vals[0])
        drift = float(np.max(diff) / ref) if ref > 0 else float(np.max(diff))
        samples = [{"t": float(a), "value": float(b)} for a, b in zip(t, vals)]
        return AuditResult(functional, drift, samples)
    h = _uniform_step(t)
    e3 = np.array([r.E3 for r in recs])
    formula = np.array([r.dE3_formula for r in recs])
    fd = time_derivative(e3, h)
    scale = np.max(np.abs(formula))
    mismatch = np.max(np.abs(fd - formula))
    # a formula at roundoff level (e.g. a geodesic) has no meaningful relative scale
    drift = float(mismatch / scale) if scale > AUDIT_ABS_FLOOR else float(mismatch)
    samples = [{"t": float(a), "fd": float(b), "formula": float(c)} for a, b, c in zip(t, fd, formula)]
    return AuditResult(functional, drift, samples)


def order_estimate(errors) -> float:
    """Least-squares slope of ``log err`` against ``log h``."""
    data = np.asarray(errors, dtype=float)
    if data.ndim != 2 or data.shape[0] < 3 or data.shape[1] != 2:
        raise ValueError("need at least 3 (h, err) pairs")
    h, err = data[:, 0], data[:, 1]
    if np.any(np.diff(h) >= 0):
        raise ValueError("h must be strictly decreasing")
    if np.any(err <= 0) or np.any(h <= 0):
        raise ValueError("errors and step sizes must be positive")
    slope = np.polyfit(np.log(h), np.log(err), 1)[0]
    return float(slope) if abs(slope) > 1e-12 else 0.0
