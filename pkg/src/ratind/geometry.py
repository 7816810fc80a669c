"""Finite-dimensional Gelfand triple V = H = R^n with diagonal weights.

Vectors are plain float arrays whose last axis has length ``dim``; leading
axes are treated as batch axes.  All reductions run over the component axis
in a fixed order, so a row gives bit-identical results whether it is
evaluated alone or inside a batch.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpaceGeometry:
    dim: int
    h_weights: np.ndarray = field(default=None)
    v_weights: np.ndarray = field(default=None)
    p: float = 2.0

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be >= 1")
        object.__setattr__(self, "dim", int(self.dim))
        h = np.ones(self.dim) if self.h_weights is None else np.asarray(self.h_weights, float)
        v = h.copy() if self.v_weights is None else np.asarray(self.v_weights, float)
        if h.shape != (self.dim,) or v.shape != (self.dim,):
            raise DimensionError(self.dim, (h.shape, v.shape), "weights")
        if np.any(h <= 0) or np.any(v <= 0):
            raise ValueError("weights must be positive")
        if np.any(v < h):
            raise ValueError("v_weights must dominate h_weights componentwise")
        if not self.p >= 2:
            raise ValueError("growth exponent p must be >= 2")
        object.__setattr__(self, "h_weights", _frozen(h))
        object.__setattr__(self, "v_weights", _frozen(v))
        object.__setattr__(self, "p", float(self.p))

    @classmethod
    def euclidean(cls, dim: int, p: float = 2.0) -> "SpaceGeometry":
        return cls(dim, p=p)

    @property
    def q(self) -> float:
        return self.p / (self.p - 1.0)

    def check(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        if z.ndim == 0 or z.shape[-1] != self.dim:
            raise DimensionError(self.dim, z.shape[-1] if z.ndim else 0)
        return z


def _weighted_sum(w, x) -> np.ndarray:
    # explicit component loop keeps the summation order batch-independent
    out = w[0] * x[..., 0]
    for i in range(1, x.shape[-1]):
        out = out + w[i] * x[..., i]
    return out


def _unit(geom, n):
    if geom is None:
        return np.ones(n)
    if geom.dim != n:
        raise DimensionError(geom.dim, n)
    return geom.h_weights


def h_inner(a, b, geom: SpaceGeometry | None = None):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1:] != b.shape[-1:]:
        raise DimensionError(a.shape[-1], b.shape[-1])
    w = _unit(geom, a.shape[-1])
    return _weighted_sum(w, a * b)


def h_norm(a, geom: SpaceGeometry | None = None):
    a = np.asarray(a, dtype=float)
    w = _unit(geom, a.shape[-1])
    return np.sqrt(_weighted_sum(w, a * a))


def v_norm(a, geom: SpaceGeometry | None = None):
    a = np.asarray(a, dtype=float)
    if geom is None:
        w = np.ones(a.shape[-1])
    else:
        geom.check(a)
        w = geom.v_weights
    return np.sqrt(_weighted_sum(w, a * a))


def matvec(m, z):
    """``m @ z`` over the last axis of ``z`` with a fixed accumulation order."""
    m = np.asarray(m, dtype=float)
    z = np.asarray(z, dtype=float)
    if m.shape[-1] != z.shape[-1]:
        raise DimensionError(m.shape[-1], z.shape[-1])
    out = z[..., 0, None] * m[..., :, 0]
    for j in range(1, z.shape[-1]):
        out = out + z[..., j, None] * m[..., :, j]
    return out
