"""Finite-dimensional Wiener driving, diffusion maps and rescaled noise.

Each path draws its increments from a Philox stream keyed by
``(seed, path_index)``; the counter then runs over (step, component) in
row-major order, so a path is reproducible independently of how many other
paths are generated or in which order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, NonMonotoneError
from .geometry import SpaceGeometry

KINDS = ("off", "additive_constant", "multiplicative_linear", "time_modulated")


@dataclass(frozen=True, eq=False)
class NoiseSpec:
    kind: str = "off"
    sigma: np.ndarray | None = None
    lip_u: float = 1.0
    holder_t: float = 1.0
    nu: float = 1.0
    modulation_amp: float = 0.0
    modulation_freq: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown noise kind {self.kind!r}", key="noise.kind")
        s = np.atleast_2d(np.asarray(self.sigma if self.sigma is not None else [[0.0]], dtype=float))
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)
        if not 0 < self.holder_t <= 1:
            raise ConfigError("holder_t must lie in (0, 1]", key="noise.holder_t")

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def m(self) -> int:
        return self.sigma.shape[1]

    @classmethod
    def off(cls, n: int = 1, m: int = 1) -> "NoiseSpec":
        return cls("off", np.zeros((n, m)))

    @classmethod
    def additive(cls, sigma) -> "NoiseSpec":
        s = np.atleast_2d(np.asarray(sigma, dtype=float))
        return cls("additive_constant", s, lip_u=float(np.linalg.norm(s)))


def modulation(t, spec: NoiseSpec):
    return 1.0 + spec.modulation_amp * np.sin(2.0 * math.pi * spec.modulation_freq * np.asarray(t, float))


def g_matrix(t, z, spec: NoiseSpec):
    """``G(t, z)`` with shape ``z.shape + (m,)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != spec.n:
        raise DimensionError(spec.n, z.shape[-1])
    shape = z.shape + (spec.m,)
    if spec.kind == "off":
        return np.zeros(shape)
    if spec.kind == "additive_constant":
        return np.broadcast_to(spec.sigma, shape).copy()
    if spec.kind == "multiplicative_linear":
        return (1.0 + z)[..., None] * spec.sigma
    mod = np.asarray(modulation(t, spec))
    return np.broadcast_to(spec.sigma, shape) * mod.reshape(mod.shape + (1, 1))


def g_apply(t, z, dW, spec: NoiseSpec):
    """``G(t, z) dW``; batched over leading axes of ``z`` and ``dW``."""
    z = np.asarray(z, dtype=float)
    dW = np.asarray(dW, dtype=float)
    if dW.shape[-1] != spec.m:
        raise DimensionError(spec.m, dW.shape[-1], "noise increment")
    if spec.kind == "off":
        return np.zeros(np.broadcast_shapes(z.shape, dW.shape[:-1] + (spec.n,)))
    G = g_matrix(t, z, spec)
    out = G[..., :, 0] * dW[..., 0, None]
    for c in range(1, spec.m):
        out = out + G[..., :, c] * dW[..., c, None]
    return out


def hs_norm(G, geom: SpaceGeometry | None = None):
    """Hilbert-Schmidt norm of ``G: U -> H`` (Frobenius with unit weights)."""
    G = np.asarray(G, dtype=float)
    w = np.ones(G.shape[-2]) if geom is None else geom.h_weights
    return np.sqrt(np.sum(w[:, None] * G * G, axis=(-2, -1)))


@dataclass(frozen=True, eq=False)
class WienerPath:
    t_grid: np.ndarray
    increments: np.ndarray
    cumulative: np.ndarray
    path_index: int = 0

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    def at(self, t):
        return rescaled_noise(self, t)


def philox_generator(seed: int, path_index: int) -> np.random.Generator:
    key = np.array([int(seed) & 0xFFFFFFFFFFFFFFFF, int(path_index)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def wiener_from_grid(t_grid, m: int, seed: int, path_index: int) -> WienerPath:
    t_grid = np.asarray(t_grid, dtype=float)
    dt = np.diff(t_grid)
    rng = philox_generator(seed, path_index)
    raw = rng.standard_normal((dt.size, m)) * np.sqrt(dt)[:, None]
    cum = np.zeros((t_grid.size, m))
    np.cumsum(raw, axis=0, out=cum[1:])
    # increments are taken as differences of the stored path so that
    # cumulative[k+1] - cumulative[k] == increments[k] holds bit for bit
    inc = np.diff(cum, axis=0)
    for a in (t_grid, inc, cum):
        a.setflags(write=False)
    return WienerPath(t_grid, inc, cum, int(path_index))


def coarsen_wiener(wiener: WienerPath, factor: int) -> WienerPath:
    """Same Brownian path observed on every ``factor``-th node (coupled refinement)."""
    factor = int(factor)
    if factor < 1 or (wiener.t_grid.size - 1) % factor:
        raise ValueError("factor must divide the number of steps")
    t = wiener.t_grid[::factor]
    c = wiener.cumulative[::factor]
    inc = np.diff(c, axis=0)
    for a in (t, c, inc):
        a.setflags(write=False)
    return WienerPath(t, inc, c, wiener.path_index)


def sample_wiener(spec, path_index: int) -> WienerPath:
    """Wiener path on the time grid of a ProblemSpec, keyed by (seed, path_index)."""
    if not 0 <= path_index < spec.n_paths:
        raise IndexError(f"path_index {path_index} outside [0, {spec.n_paths})")
    return wiener_from_grid(spec.time_grid(), spec.noise.m, spec.seed, path_index)


def rescaled_noise(wiener: WienerPath, t_hat, tol: float = 1e-12):
    """``W(t_hat)`` with W linearly interpolated between grid nodes."""
    t_hat = np.asarray(t_hat, dtype=float)
    T = wiener.T
    if t_hat.size and (t_hat.min() < -tol or t_hat.max() > T + tol * max(1.0, T)):
        raise ValueError(f"t_hat outside [0, {T}]: [{t_hat.min()}, {t_hat.max()}]")
    if t_hat.ndim == 1 and np.any(np.diff(t_hat) < 0):
        raise NonMonotoneError("t_hat must be nondecreasing")
    tg = wiener.t_grid
    if tg.size == 1:
        return np.zeros(t_hat.shape + (wiener.cumulative.shape[1],))
    tc = np.clip(t_hat, 0.0, T)
    return np.stack([np.interp(tc, tg, wiener.cumulative[:, c]) for c in range(wiener.cumulative.shape[1])], axis=-1)


def empirical_qv(samples):
    """Mean over paths of summed squared increments, per component.

    ``samples`` has shape ``(paths, nodes, m)``.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 3 or samples.shape[0] < 2:
        raise ValueError("empirical_qv needs an ensemble of at least 2 paths shaped (paths, nodes, m)")
    inc = np.diff(samples, axis=1)
    return np.mean(np.sum(inc * inc, axis=1), axis=0)


def holder_constant(wiener: WienerPath, alpha: float, max_lag_time: float | None = None) -> float:
    """Empirical alpha-Hoelder constant of W over grid-node pairs.

    Only pairs with ``|t - s| <= max_lag_time`` are scanned when a window is
    given.  The piecewise-linear interpolant's constant is at most
    ``3**(1-alpha)`` times this value (see ``holder_transfer_factor``).
    """
    t = wiener.t_grid
    W = wiener.cumulative
    K = t.size - 1
    if K < 1:
        return 0.0
    dt_min = float(np.min(np.diff(t)))
    max_lag = K if max_lag_time is None else min(K, int(math.ceil(max_lag_time / dt_min)) + 1)
    best = 0.0
    for lag in range(1, max_lag + 1):
        dW = W[lag:] - W[:-lag]
        num = np.sqrt(np.sum(dW * dW, axis=1))
        den = (t[lag:] - t[:-lag]) ** alpha
        best = max(best, float(np.max(num / den)))
    return best


def holder_transfer_factor(alpha: float) -> float:
    """Bound on the interpolant-to-node Hoelder constant ratio.

    For s < t in different cells, splitting at the two inner nodes gives
    three pieces each controlled by the node constant; concavity of
    ``x**alpha`` yields the factor ``3**(1-alpha)``.
    """
    return 3.0 ** (1.0 - alpha)
