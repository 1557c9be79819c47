"""Conserved and semi-conserved functionals of a loop, plus Sobolev norms.

Every quantity is a trapezoidal-rule integral over the loop of pointwise
Ricci/curvature expressions in the covariant stack
``u_x, nabla u_x, nabla^2 u_x, ...``. A single stack is shared by all terms
of one evaluation so the bookkeeping checks compare like with like.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .discretization import MapState, Scheme, dealias, stack_values
from .space_forms import SpaceForm

MAX_SOBOLEV_LEVEL = 4

# E3 = A1 F1 + A2 F2 + A3 F3 + A4 F4 with A = (6, -20 rho, -10 rho, -4)
E3_WEIGHTS = (6.0, -20.0, -10.0, -4.0)

CSV_COLUMNS = (
    ["t", "E1", "E2", "E3", "F1", "F2", "F3", "F4", "dE3_formula"]
    + [f"I{j}" for j in range(MAX_SOBOLEV_LEVEL + 1)]
    + [f"H{j}" for j in range(MAX_SOBOLEV_LEVEL + 1)]
    + ["residual"]
)


def e3_coefficients(rho: float) -> tuple[float, float, float, float]:
    a1, a2, a3, a4 = E3_WEIGHTS
    return a1, a2 * rho, a3 * rho, a4


@dataclass
class EnergyReport:
    t: float
    E1: float
    E2: float
    E3: float
    F1: float
    F2: float
    F3: float
    F4: float
    dE3_formula: float
    I: list[float] = field(default_factory=list)
    Hm: list[float] = field(default_factory=list)
    manifold_residual: float = 0.0

    def row(self) -> list[float]:
        pad = lambda xs: list(xs) + [float("nan")] * (MAX_SOBOLEV_LEVEL + 1 - len(xs))
        return (
            [self.t, self.E1, self.E2, self.E3, self.F1, self.F2, self.F3, self.F4, self.dE3_formula]
            + pad(self.I)
            + pad(self.Hm)
            + [self.manifold_residual]
        )

    def as_dict(self) -> dict:
        return asdict(self)


class _Stack:
    """Pointwise building blocks shared by all functionals of one state."""

    def __init__(self, target: SpaceForm, values: np.ndarray, depth: int, scheme=Scheme.SPECTRAL, alias_free=False):
        self.target = target
        self.values = values
        self.fields = stack_values(target, values, depth, scheme)
        if alias_free:
            self.fields = [target.project(values, dealias(f)) for f in self.fields]
        self.dx = 2.0 * np.pi / values.shape[0]

    def ric(self, a, b):
        return self.target.ricci(a, b)

    def R(self, a, b, c):
        return self.target.curvature_apply(a, b, c)

    def integral(self, f) -> float:
        return float(self.dx * np.sum(f))

    # shorthand for u_x, nabla u_x, nabla^2 u_x
    @property
    def v0(self):
        return self.fields[0]

    @property
    def v1(self):
        return self.fields[1]

    @property
    def v2(self):
        return self.fields[2]


def _stack(u: MapState, depth: int, scheme, alias_free=False) -> _Stack:
    return _Stack(u.target, u.values, depth, scheme, alias_free)


# -- the functionals -----------------------------------------------------------


def _E1(s: _Stack) -> float:
    return s.integral(s.ric(s.v0, s.v0))


def _E2(s: _Stack, rho: float) -> float:
    r00 = s.ric(s.v0, s.v0)
    return s.integral(s.ric(s.v1, s.v1)) - 0.5 * rho * s.integral(r00**2)


def _F(s: _Stack) -> tuple[float, float, float, float]:
    a, b, c = s.v0, s.v1, s.v2
    F1 = s.integral(s.ric(c, c))
    F2 = s.integral(s.ric(b, a) ** 2)
    F3 = s.integral(s.ric(b, b) * s.ric(a, a))
    F4 = s.integral(s.ric(b, s.R(b, a, a)))
    return F1, F2, F3, F4


VARIANTS = ("quadratic", "linear")


def middle_coefficient(rho: float, variant: str = "quadratic") -> float:
    """Coefficient of ``int Ric(b, R(b,a)a) Ric(b,a)`` in dE3/dt.

    ``quadratic`` is ``40 rho (rho - 1)``; ``linear`` is ``-20 rho``, which
    follows when the curvature term of dF3/dt carries ``-2`` instead of
    ``-4 rho``. The two agree at ``rho = 1/2``.
    """
    if variant == "quadratic":
        return 40.0 * rho * (rho - 1.0)
    if variant == "linear":
        return -20.0 * rho
    raise ValueError(f"variant must be one of {VARIANTS}")


def _dE3(s: _Stack, rho: float, variant: str = "quadratic") -> float:
    a, b = s.v0, s.v1
    q = s.ric(b, a)
    Rbaa = s.R(b, a, a)
    Rbab = s.R(b, a, b)
    integrand = (
        -80.0 * rho**2 * q**3
        + middle_coefficient(rho, variant) * s.ric(b, Rbaa) * q
        - 100.0 * rho**2 * s.ric(b, b) * q * s.ric(a, a)
        + 8.0 * s.ric(Rbab, Rbaa)
    )
    return s.integral(integrand)


def energy_E1(u: MapState, scheme=Scheme.SPECTRAL) -> float:
    """``E1 = int Ric(u_x, u_x) dx``."""
    return _E1(_stack(u, 0, scheme))


def energy_E2(u: MapState, rho: float, scheme=Scheme.SPECTRAL) -> float:
    """``E2 = int Ric(nabla u_x, nabla u_x) - (rho/2) int Ric(u_x, u_x)^2``."""
    return _E2(_stack(u, 1, scheme), rho)


def energy_E3(u: MapState, rho: float, scheme=Scheme.SPECTRAL) -> tuple[float, float, float, float, float]:
    """Return ``(E3, F1, F2, F3, F4)``."""
    F = _F(_stack(u, 2, scheme))
    E3 = sum(c * f for c, f in zip(e3_coefficients(rho), F))
    return (E3, *F)


def dE3_dt_formula(u: MapState, rho: float, scheme=Scheme.SPECTRAL, variant: str = "quadratic") -> float:
    """Closed-form time derivative of E3 along the flow (space-form targets).

    See :func:`middle_coefficient` for the two variants.
    """
    return _dE3(_stack(u, 1, scheme), rho, variant)


def _check_level(m: int) -> None:
    if not 0 <= m <= MAX_SOBOLEV_LEVEL:
        raise ValueError(f"Sobolev level must be in [0, {MAX_SOBOLEV_LEVEL}], got {m}")


def ricci_sobolev_I(u: MapState, m: int, scheme=Scheme.SPECTRAL) -> list[float]:
    """Per-level Ricci-weighted terms ``int Ric(nabla^i u_x, nabla^i u_x)``, i = 0..m.

    The Ricci-weighted norm ``I_m`` is the sum of the returned list.
    """
    _check_level(m)
    s = _stack(u, m, scheme)
    return [s.integral(s.ric(f, f)) for f in s.fields]


def sobolev_H(u: MapState, m: int, scheme=Scheme.SPECTRAL) -> list[float]:
    """Cumulative ``||u_x||^2_{H^j}`` for j = 0..m."""
    _check_level(m)
    s = _stack(u, m, scheme)
    semi = [s.integral(s.target.inner(f, f)) for f in s.fields]
    return list(np.cumsum(semi))


def gn_diagnostic(u: MapState, scheme=Scheme.SPECTRAL) -> tuple[float, float]:
    """Ratios of the two sides of the Gagliardo-Nirenberg type interpolation bounds.

    ``ratio_inf = |u_x|_inf / ((|nabla u_x|^2 + |u_x|^2)^(1/4) |u_x|^(1/2))`` and
    ``ratio_l3 = |nabla u_x|_3^3 / ((|nabla^2 u_x|^2 + |nabla u_x|^2)^(1/4) |nabla u_x|^(5/2))``,
    all norms in L^2 unless marked. ``ratio_l3`` is nan when ``nabla u_x`` vanishes.
    """
    s = _stack(u, 2, scheme)
    norms = [np.sqrt(np.maximum(s.target.inner(f, f), 0.0)) for f in s.fields]
    l2 = [np.sqrt(s.integral(n**2)) for n in norms]
    if l2[0] == 0.0:
        raise ValueError("u_x vanishes identically; interpolation ratio undefined")
    ratio_inf = float(np.max(norms[0]) / ((l2[1] ** 2 + l2[0] ** 2) ** 0.25 * np.sqrt(l2[0])))
    if l2[1] <= 1e-10 * l2[0]:
        ratio_l3 = float("nan")
    else:
        l3_cubed = s.integral(norms[1] ** 3)
        ratio_l3 = float(l3_cubed / ((l2[2] ** 2 + l2[1] ** 2) ** 0.25 * l2[1] ** 2.5))
    return ratio_inf, ratio_l3


def energy_report(
    u: MapState,
    rho: float,
    t: float = 0.0,
    scheme=Scheme.SPECTRAL,
    levels: int = MAX_SOBOLEV_LEVEL,
    alias_free: bool = False,
) -> EnergyReport:
    """Evaluate every functional from one shared covariant stack."""
    _check_level(levels)
    s = _stack(u, max(levels, 2), scheme, alias_free)
    F = _F(s)
    E3 = sum(c * f for c, f in zip(e3_coefficients(rho), F))
    fields = s.fields[: levels + 1]
    I = [s.integral(s.ric(f, f)) for f in fields]
    H = list(np.cumsum([s.integral(s.target.inner(f, f)) for f in fields]))
    return EnergyReport(
        t=float(t),
        E1=_E1(s),
        E2=_E2(s, rho),
        E3=E3,
        F1=F[0],
        F2=F[1],
        F3=F[2],
        F4=F[3],
        dE3_formula=_dE3(s, rho),
        I=[float(x) for x in I],
        Hm=[float(x) for x in H],
        manifold_residual=u.residual,
    )


# -- bookkeeping audit of dE3/dt -------------------------------------------------

# Integrals appearing in the time derivatives of F1..F4, written with
# a = u_x, b = nabla u_x, c = nabla^2 u_x.
E3_TERM_NAMES = {
    "Ta": "Ric(c,b) Ric(c,a)",
    "Tb": "Ric(c,c) Ric(b,a)",
    "Tc": "Ric(c, R(c,a) b)",
    "Td": "Ric(b,a)^3",
    "Te": "Ric(b,b) Ric(b,a) Ric(a,a)",
    "Tf": "Ric(b, R(b,a) a) Ric(b,a)",
    "Tg": "Ric(R(b,a) b, R(b,a) a)",
}


def e3_derivative_terms(u: MapState, scheme=Scheme.SPECTRAL) -> dict[str, float]:
    s = _stack(u, 2, scheme)
    a, b, c = s.v0, s.v1, s.v2
    q = s.ric(b, a)
    Rbaa = s.R(b, a, a)
    return {
        "Ta": s.integral(s.ric(c, b) * s.ric(c, a)),
        "Tb": s.integral(s.ric(c, c) * q),
        "Tc": s.integral(s.ric(c, s.R(c, a, b))),
        "Td": s.integral(q**3),
        "Te": s.integral(s.ric(b, b) * q * s.ric(a, a)),
        "Tf": s.integral(s.ric(b, Rbaa) * q),
        "Tg": s.integral(s.ric(s.R(b, a, b), Rbaa)),
    }


def per_functional_derivatives(rho: float, variant: str = "quadratic") -> list[dict[str, float]]:
    """Coefficients of each ``T*`` integral in dF1/dt .. dF4/dt."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    f3_curv = -4 * rho if variant == "quadratic" else -2.0
    return [
        {"Ta": 20 * rho, "Tb": 10 * rho, "Tc": 4.0},
        {"Ta": 6.0, "Td": 6 * rho},
        {"Tb": 6.0, "Td": -4 * rho, "Te": 10 * rho, "Tf": f3_curv},
        {"Tc": 6.0, "Tg": -2.0, "Tf": 10 * rho},
    ]


def e3_bookkeeping(u: MapState, rho: float, scheme=Scheme.SPECTRAL, variant: str = "quadratic") -> dict:
    """Assemble dE3/dt term by term from the per-functional derivatives.

    Returns the per-``F`` derivative values, the net coefficient-weighted
    value of each integral (the first three must cancel), the assembled
    derivative and the closed-form value for comparison.
    """
    T = e3_derivative_terms(u, scheme)
    A = e3_coefficients(rho)
    dF = per_functional_derivatives(rho, variant)
    dF_values = [sum(coef * T[name] for name, coef in d.items()) for d in dF]
    groups = {}
    for name in T:
        parts = [A[i] * d[name] * T[name] for i, d in enumerate(dF) if name in d]
        groups[name] = {
            "value": float(sum(parts)),
            "scale": float(sum(abs(p) for p in parts)),
        }
    assembled = float(sum(a * v for a, v in zip(A, dF_values)))
    return {
        "terms": T,
        "dF": dF_values,
        "groups": groups,
        "assembled": assembled,
        "formula": dE3_dt_formula(u, rho, scheme, variant),
    }


def cancellation_residuals(book: dict) -> dict[str, float]:
    """Relative size of the three groups that cancel identically."""
    out = {}
    for name in ("Ta", "Tb", "Tc"):
        g = book["groups"][name]
        out[name] = abs(g["value"]) / g["scale"] if g["scale"] > 0 else 0.0
    return out
