"""Stored-energy potentials, their H-gradients and the Ito trace term.

``b_of`` returns the H-Riesz representative of the derivative of ``phi``
(the Euclidean gradient divided by the H weights), so ``(b_of(z), h)_H`` is
the directional derivative.  With unit weights this is the plain gradient.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .geometry import SpaceGeometry, matvec

KINDS = ("quadratic", "double_well", "custom_polynomial")


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    kind: str
    dim: int
    stiffness: np.ndarray | None = None
    well_param: float = 1.0
    coeffs: np.ndarray | None = None
    c_B: float | None = None
    C_B: float | None = None
    c_B_prime: float | None = None
    p: float | None = None
    _shift: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        n = int(self.dim)
        set_("dim", n)
        if self.kind == "quadratic":
            K = np.array(self.stiffness, dtype=float).reshape(n, n)
            if not np.allclose(K, K.T, rtol=0, atol=1e-14):
                raise ConfigError("stiffness must be symmetric", key="potential.stiffness")
            eig = np.linalg.eigvalsh(K)
            if eig[0] <= 0:
                raise ConfigError("stiffness must be positive definite", key="potential.stiffness")
            K.setflags(write=False)
            set_("stiffness", K)
            set_("p", 2.0)
            set_("c_B_prime", 0.0)
            if self.c_B is None:
                set_("c_B", float(eig[0]))
            if self.C_B is None:
                set_("C_B", float(eig[-1]))
        elif self.kind == "double_well":
            a = float(self.well_param)
            if a <= 0:
                raise ConfigError("well_param must be positive", key="potential.well_param")
            set_("well_param", a)
            set_("p", 4.0)
            if self.c_B_prime is None:
                set_("c_B_prime", a)
            if self.c_B is None:
                # (x^3-y^3)(x-y) >= (x-y)^4/4 per coordinate, then sum d_i^4 >= |d|^4/n
                set_("c_B", min(0.125, 0.25 / n))
            if self.C_B is None:
                set_("C_B", max(3.0, a))
        elif self.kind == "custom_polynomial":
            c = np.atleast_2d(np.array(self.coeffs, dtype=float))
            if c.shape[0] != n:
                raise DimensionError(n, c.shape[0], "coeffs rows")
            deg = c.shape[1] - 1
            if deg < 1 or deg % 2 == 0 or np.any(c[:, -1] <= 0):
                raise ConfigError(
                    "custom_polynomial needs odd degree with positive leading coefficient",
                    key="potential.coeffs",
                )
            if np.any(c[:, 0::2] != 0):
                raise ConfigError("custom_polynomial must be odd (even powers zero)", key="potential.coeffs")
            for k in ("c_B", "C_B", "c_B_prime"):
                if getattr(self, k) is None:
                    raise ConfigError(f"custom_polynomial requires {k}", key=f"potential.{k}")
            c.setflags(write=False)
            set_("coeffs", c)
            set_("p", float(deg + 1))
            set_("_shift", _poly_shift(c))
        else:
            raise ConfigError(f"unknown potential kind {self.kind!r}", key="potential.kind")

    @classmethod
    def quadratic(cls, stiffness) -> "PotentialSpec":
        K = np.atleast_2d(np.asarray(stiffness, dtype=float))
        return cls("quadratic", K.shape[0], stiffness=K)

    @classmethod
    def double_well(cls, a: float = 1.0, dim: int = 1) -> "PotentialSpec":
        return cls("double_well", dim, well_param=a)


def _poly_antiderivative(c):
    # coefficients of Phi_i with Phi_i(0) = 0
    powers = np.arange(1, c.shape[1] + 1)
    return np.concatenate([np.zeros((c.shape[0], 1)), c / powers], axis=1)


def _poly_shift(c):
    anti = _poly_antiderivative(c)
    shift = np.zeros(c.shape[0])
    for i in range(c.shape[0]):
        roots = np.roots(c[i][::-1])
        real = roots[np.abs(roots.imag) < 1e-9].real
        vals = np.polyval(anti[i][::-1], real) if real.size else np.array([0.0])
        shift[i] = -min(0.0, float(vals.min()))
    return shift


def _h(geom, n):
    if geom is None:
        return np.ones(n)
    if geom.dim != n:
        raise DimensionError(geom.dim, n)
    return geom.h_weights


def _grad_euclid(z, spec):
    if spec.kind == "quadratic":
        return matvec(spec.stiffness, z)
    if spec.kind == "double_well":
        return z * z * z - spec.well_param * z
    c = spec.coeffs
    out = np.zeros_like(z)
    for k in range(c.shape[1] - 1, -1, -1):  # Horner
        out = out * z + c[:, k]
    return out


def _hess_diag(z, spec):
    if spec.kind == "double_well":
        return 3.0 * z * z - spec.well_param
    c = spec.coeffs
    out = np.zeros_like(z)
    for k in range(c.shape[1] - 1, 0, -1):
        out = out * z + k * c[:, k]
    return out


def _check(z, spec):
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.dim:
        raise DimensionError(spec.dim, z.shape[-1])
    return z


def phi(z, spec: PotentialSpec):
    z = _check(z, spec)
    if spec.kind == "quadratic":
        Kz = matvec(spec.stiffness, z)
        out = 0.5 * (z[..., 0] * Kz[..., 0])
        for i in range(1, spec.dim):
            out = out + 0.5 * (z[..., i] * Kz[..., i])
        return out
    if spec.kind == "double_well":
        a = spec.well_param
        z2 = z * z
        terms = 0.25 * z2 * z2 - 0.5 * a * z2 + 0.25 * a * a
    else:
        anti = _poly_antiderivative(spec.coeffs)
        terms = np.zeros_like(z)
        for k in range(anti.shape[1] - 1, -1, -1):
            terms = terms * z + anti[:, k]
        terms = terms + spec._shift
    out = terms[..., 0]
    for i in range(1, spec.dim):
        out = out + terms[..., i]
    return out


def b_of(z, spec: PotentialSpec, geom: SpaceGeometry | None = None):
    """``B = D Phi`` as an element of H."""
    z = _check(z, spec)
    return _grad_euclid(z, spec) / _h(geom, spec.dim)


def hessian(z, spec: PotentialSpec):
    """Euclidean second derivative of ``phi``; shape ``(..., n, n)``."""
    z = _check(z, spec)
    if spec.kind == "quadratic":
        return np.broadcast_to(spec.stiffness, z.shape + (spec.dim,)).copy()
    d = _hess_diag(z, spec)
    out = np.zeros(z.shape + (spec.dim,))
    idx = np.arange(spec.dim)
    out[..., idx, idx] = d
    return out


def db_of(z, spec: PotentialSpec, geom: SpaceGeometry | None = None):
    """Derivative of ``b_of``; symmetric whenever the H weights are uniform."""
    return hessian(z, spec) / _h(geom, spec.dim)[:, None]


def trace_l(t, v, spec: PotentialSpec, noise, geom: SpaceGeometry | None = None):
    """``Tr[G G* DB(v)]`` with ``G*`` the (U, H)-adjoint, i.e. ``Tr[G G^T Hess]``."""
    from .noise import g_matrix

    v = _check(v, spec)
    if noise.kind == "off":
        return np.zeros(v.shape[:-1])
    G = g_matrix(t, v, noise)
    n, m = spec.dim, G.shape[-1]
    if spec.kind == "quadratic":
        hess = spec.stiffness
        out = np.zeros(v.shape[:-1])
        for i in range(n):
            for j in range(n):
                if hess[j, i] == 0.0:
                    continue
                gg = G[..., i, 0] * G[..., j, 0]
                for c in range(1, m):
                    gg = gg + G[..., i, c] * G[..., j, c]
                out = out + gg * hess[j, i]
        return out
    d = _hess_diag(v, spec)
    out = np.zeros(v.shape[:-1])
    for i in range(n):
        gg = G[..., i, 0] * G[..., i, 0]
        for c in range(1, m):
            gg = gg + G[..., i, c] * G[..., i, c]
        out = out + gg * d[..., i]
    return out


def monotonicity_ratio(spec: PotentialSpec, geom: SpaceGeometry, rng, n_pairs=500, scale=2.0):
    """Worst ratio ``lhs / rhs`` of the strong-monotonicity inequality on random pairs.

    ``lhs = <B(z1)-B(z2), z1-z2>``, ``rhs = c_B |z1-z2|_V^p - c_B' |z1-z2|_H^2``;
    pairs with ``rhs <= 0`` are trivially satisfied when ``lhs >= rhs`` and are
    reported through the returned minimum slack instead.  Returns
    ``(worst_ratio, min_slack)``; the inequality holds iff ``min_slack >= 0``.
    """
    from .geometry import h_inner, h_norm, v_norm

    z1 = rng.uniform(-scale, scale, size=(n_pairs, spec.dim))
    z2 = rng.uniform(-scale, scale, size=(n_pairs, spec.dim))
    dz = z1 - z2
    lhs = h_inner(b_of(z1, spec, geom) - b_of(z2, spec, geom), dz, geom)
    rhs = spec.c_B * v_norm(dz, geom) ** spec.p - spec.c_B_prime * h_norm(dz, geom) ** 2
    slack = lhs - rhs
    pos = rhs > 0
    ratio = float(np.min(lhs[pos] / rhs[pos])) if np.any(pos) else np.inf
    return ratio, float(np.min(slack))


def growth_ratio(spec: PotentialSpec, geom: SpaceGeometry, rng, n_samples=500, scale=3.0):
    """Max of ``|DB(z)|_op / (C_B (1 + |z|_V^(p-2)))`` over random samples."""
    from .geometry import v_norm

    z = rng.uniform(-scale, scale, size=(n_samples, spec.dim))
    ops = np.linalg.norm(db_of(z, spec, geom), ord=2, axis=(-2, -1))
    bound = spec.C_B * (1.0 + v_norm(z, geom) ** (spec.p - 2.0))
    return float(np.max(ops / bound))
