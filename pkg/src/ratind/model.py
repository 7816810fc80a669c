"""Problem description: geometry, potential, noise, forcing, initial state, run knobs."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .energy import PotentialSpec
from .errors import ConfigError, DimensionError
from .geometry import SpaceGeometry
from .noise import NoiseSpec

FORCING_KINDS = ("none", "linear", "polynomial", "circle")


@dataclass(frozen=True, eq=False)
class Forcing:
    """Deterministic loading ``g(t)``.

    ``linear``: ``offset + rate*t``; ``polynomial``: ``coeffs[i][k] t**k``;
    ``circle`` (2-D): ``radius(t) (cos 2 pi f t, sin 2 pi f t)`` with the radius
    ramped linearly from 0 over ``ramp_time``.
    """

    kind: str = "none"
    dim: int = 1
    offset: np.ndarray | None = None
    rate: np.ndarray | None = None
    coeffs: np.ndarray | None = None
    radius: float = 1.0
    freq: float = 1.0
    ramp_time: float = 0.0

    def __post_init__(self):
        if self.kind not in FORCING_KINDS:
            raise ConfigError(f"unknown forcing kind {self.kind!r}", key="forcing.kind")
        n = self.dim
        if self.kind == "linear":
            off = np.zeros(n) if self.offset is None else np.asarray(self.offset, float).reshape(n)
            rate = np.zeros(n) if self.rate is None else np.asarray(self.rate, float).reshape(n)
            object.__setattr__(self, "offset", off)
            object.__setattr__(self, "rate", rate)
        elif self.kind == "polynomial":
            c = np.atleast_2d(np.asarray(self.coeffs, float))
            if c.shape[0] != n:
                raise DimensionError(n, c.shape[0], "forcing coeffs rows")
            object.__setattr__(self, "coeffs", c)
        elif self.kind == "circle" and n != 2:
            raise ConfigError("circle forcing requires dim = 2", key="forcing.kind")

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        n = self.dim
        if self.kind == "none":
            return np.zeros(t.shape + (n,))
        if self.kind == "linear":
            return self.offset + t[..., None] * self.rate
        if self.kind == "polynomial":
            out = np.zeros(t.shape + (n,))
            for k in range(self.coeffs.shape[1] - 1, -1, -1):
                out = out * t[..., None] + self.coeffs[:, k]
            return out
        r = self.radius * (np.minimum(1.0, t / self.ramp_time) if self.ramp_time > 0 else np.ones_like(t))
        ang = 2.0 * math.pi * self.freq * t
        return np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    geometry: SpaceGeometry
    potential: PotentialSpec
    noise: NoiseSpec
    u0: np.ndarray
    T: float
    epsilon: float
    dt: float
    forcing: Forcing | None = None
    n_paths: int = 1
    seed: int = 0
    midpoint_refine: bool = False
    tau_step: float | None = None

    def __post_init__(self):
        n = self.geometry.dim
        u0 = np.asarray(self.u0, dtype=float).reshape(-1)
        if u0.shape != (n,):
            raise DimensionError(n, u0.shape[0], "u0")
        if not np.all(np.isfinite(u0)):
            raise ConfigError("u0 must be finite", key="run.u0")
        u0.setflags(write=False)
        object.__setattr__(self, "u0", u0)
        if self.potential.dim != n:
            raise DimensionError(n, self.potential.dim, "potential")
        if self.noise.n != n:
            raise DimensionError(n, self.noise.n, "noise sigma rows")
        if self.forcing is None:
            object.__setattr__(self, "forcing", Forcing("none", n))
        elif self.forcing.dim != n:
            raise DimensionError(n, self.forcing.dim, "forcing")
        if not self.T >= 0:
            raise ConfigError("T must be >= 0", key="run.T")
        if not self.dt > 0 or (self.T > 0 and self.dt > self.T):
            raise ConfigError("dt must satisfy 0 < dt <= T", key="run.dt")
        if not 0 < self.epsilon < 1:
            raise ConfigError("epsilon must lie in (0, 1)", key="run.epsilon")
        if int(self.n_paths) < 1:
            raise ConfigError("n_paths must be positive", key="run.n_paths")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer", key="run.seed")
        object.__setattr__(self, "n_paths", int(self.n_paths))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def dim(self) -> int:
        return self.geometry.dim

    @property
    def n_steps(self) -> int:
        if self.T == 0:
            return 0
        return max(1, int(math.ceil(self.T / self.dt - 1e-9)))

    def time_grid(self) -> np.ndarray:
        K = self.n_steps
        t = np.minimum(np.arange(K + 1) * self.dt, self.T)
        if K:
            t[-1] = self.T
        return t

    def replace(self, **changes) -> "ProblemSpec":
        return dataclasses.replace(self, **changes)

    @property
    def default_tau_step(self) -> float:
        return self.tau_step if self.tau_step else self.dt / 2.0
