"""Dissipation calculus for the unit H-ball dissipation and its regularizations.

Covers the 0-homogeneous operator ``A = d||.||_H``, the viscous potential
``(eps/2)|z|^2 + |z|``, the closed-form resolvent of ``eps*d + A(d) + g = 0``,
the rescaled potential ``|z| + eps*F(|z|)`` with ``F(r) = -r - log(1-r)``, and
the Fenchel gap certifying membership in the subdifferential of the
constrained norm ``Psi(z) = |z|`` on the closed unit ball.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import SpaceGeometry, h_inner, h_norm

DOMAIN_TOL = 1e-9


class _PlusInfinity:
    """Tagged +infinity; deliberately refuses arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "PLUS_INF"

    def __bool__(self):
        return True


PLUS_INF = _PlusInfinity()


def is_plus_inf(x) -> bool:
    return x is PLUS_INF


@dataclass(frozen=True)
class UnitBall:
    """Set descriptor for the closed ball ``{w : |w|_H <= radius}``."""

    radius: float = 1.0

    def contains(self, w, geom: SpaceGeometry | None = None, tol: float = 0.0) -> bool:
        return bool(h_norm(w, geom) <= self.radius + tol)


@dataclass(frozen=True)
class Interval:
    """Closed interval descriptor; endpoints may be +-inf, ``empty`` marks no points."""

    lo: float
    hi: float
    empty: bool = False

    def contains(self, x: float) -> bool:
        return (not self.empty) and self.lo <= x <= self.hi

    @property
    def is_singleton(self) -> bool:
        return not self.empty and self.lo == self.hi


EMPTY = Interval(math.nan, math.nan, empty=True)


@dataclass(frozen=True, eq=False)
class DissipationEval:
    value: float | _PlusInfinity
    subgradient_selection: np.ndarray | None
    in_domain: bool


def a_of(z, geom: SpaceGeometry | None = None):
    """``A(z)``: the unit vector ``z/|z|`` or, at the origin, the unit ball."""
    z = np.asarray(z, dtype=float)
    n = h_norm(z, geom)
    if n > 0:
        return z / n
    return UnitBall()


def resolvent_shrink(g, epsilon: float, geom: SpaceGeometry | None = None):
    """Unique ``d`` with ``eps*d + A(d) + g`` containing 0.

    Minimizer of ``(eps/2)|d|^2 + |d| + (g, d)``; zero while ``|g| <= 1``
    (stick), otherwise ``-(|g|-1)/(eps |g|) g``.  Batched over leading axes.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    g = np.asarray(g, dtype=float)
    ng = h_norm(g, geom)
    slip = ng > 1.0
    safe = np.where(slip, ng, 1.0)
    scale = np.where(slip, (ng - 1.0) / (epsilon * safe), 0.0)
    return 0.0 - scale[..., None] * g


def psi_eps(z, epsilon: float, geom: SpaceGeometry | None = None):
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    n = h_norm(z, geom)
    return 0.5 * epsilon * n * n + n


def psi_norm(z, geom: SpaceGeometry | None = None, tol: float = 0.0):
    """Norm restricted to the closed unit ball; PLUS_INF outside."""
    n = float(h_norm(z, geom))
    if n > 1.0 + tol:
        return PLUS_INF
    return n


def big_f(r: float):
    r = float(r)
    if 0.0 <= r < 1.0:
        return -r - math.log1p(-r)
    return PLUS_INF


def little_f(r: float) -> Interval:
    r = float(r)
    if r == 0.0:
        return Interval(-math.inf, 0.0)
    if 0.0 < r < 1.0:
        x = 1.0 / (1.0 - r) - 1.0
        return Interval(x, x)
    return EMPTY


def psi_hat_eps(z, epsilon: float, geom: SpaceGeometry | None = None) -> DissipationEval:
    """``|z| + eps*F(|z|)`` with the selection ``z/|z| (1 + eps f(|z|))``.

    At ``z = 0`` the subdifferential is the unit ball; the minimal-norm
    element 0 is returned as selection.
    """
    z = np.asarray(z, dtype=float)
    n = float(h_norm(z, geom))
    if n >= 1.0:
        return DissipationEval(PLUS_INF, None, False)
    if n == 0.0:
        return DissipationEval(0.0, np.zeros_like(z), True)
    fr = little_f(n).lo
    return DissipationEval(n + epsilon * big_f(n), z / n * (1.0 + epsilon * fr), True)


def psi_hat_subgradient_residual(z, v, epsilon: float, geom: SpaceGeometry | None = None):
    """Distance from ``v`` to the subdifferential of the rescaled potential at ``z``.

    Batched; requires ``|z| < 1``.  Used for the viscous-level inclusion in
    rescaled time.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    n = h_norm(z, geom)
    if np.any(n >= 1.0):
        raise DomainError("rescaled speed must satisfy |z|_H < 1")
    moving = n > 0
    safe = np.where(moving, n, 1.0)
    fac = np.where(moving, (1.0 + epsilon * (1.0 / (1.0 - n) - 1.0)) / safe, 0.0)
    sel = fac[..., None] * z
    res_moving = h_norm(v - sel, geom)
    res_still = np.maximum(h_norm(v, geom) - 1.0, 0.0)
    return np.where(moving, res_moving, res_still)


def fenchel_gap(z, v, geom: SpaceGeometry | None = None, tol: float = DOMAIN_TOL):
    """``Psi(z) + Psi*(v) - (v, z)`` for the unit-ball-constrained norm.

    The conjugate is ``Psi*(v) = max(|v| - 1, 0)``.  The gap is nonnegative
    and vanishes exactly on subdifferential pairs.  Batched over leading axes.
    """
    z = np.asarray(z, dtype=float)
    v = np.asarray(v, dtype=float)
    nz = h_norm(z, geom)
    if np.any(nz > 1.0 + tol):
        raise DomainError(f"fenchel_gap: |z|_H = {np.max(nz):.12g} exceeds 1 (+{tol:g})")
    gap = nz + np.maximum(h_norm(v, geom) - 1.0, 0.0) - h_inner(v, z, geom)
    return gap[()] if np.ndim(gap) == 0 else gap


def mosco_gap(z, epsilon: float, geom: SpaceGeometry | None = None) -> float:
    n = float(h_norm(z, geom))
    if n >= 1.0:
        raise DomainError("mosco_gap requires |z|_H < 1")
    return epsilon * big_f(n)


def clip_to_unit_ball(z, geom: SpaceGeometry | None = None):
    """Radial projection onto the closed unit ball; also returns the max overshoot."""
    z = np.asarray(z, dtype=float)
    n = h_norm(z, geom)
    over = n > 1.0
    scale = np.where(over, 1.0 / np.where(over, n, 1.0), 1.0)
    overshoot = float(np.max(n - 1.0, initial=0.0)) if n.size else 0.0
    return z * scale[..., None], max(overshoot, 0.0)
