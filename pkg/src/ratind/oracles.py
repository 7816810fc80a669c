"""Reference solvers that share no code path with the viscous scheme.

``play_operator`` and ``sweeping_catchup`` are implicit (projection)
catch-up schemes for the rate-independent limit with a quadratic energy;
``skorohod_1d`` is the discrete Skorohod regulator on an interval;
``bruteforce_resolvent`` minimizes the per-step functional numerically.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import SpaceGeometry, h_inner, h_norm

METHODS = ("play_closed_form", "moreau_catchup", "skorohod_reflection", "bruteforce_resolvent")


@dataclass(frozen=True, eq=False)
class OracleResult:
    t_grid: np.ndarray
    u_ref: np.ndarray
    method: str
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown oracle method {self.method!r}")
        if not np.all(np.isfinite(self.u_ref)):
            raise ValueError("oracle trajectory must be finite")


def _grid(t_grid, n):
    return np.arange(n, dtype=float) if t_grid is None else np.asarray(t_grid, float)


def play_operator(g_samples, u0: float, radius: float = 1.0, t_grid=None) -> OracleResult:
    """Scalar play: ``u_{k+1} = median(u_k, g_{k+1} - r, g_{k+1} + r)``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    g = np.asarray(g_samples, float).reshape(-1)
    u = np.empty_like(g)
    u[0] = float(u0)
    for k in range(g.size - 1):
        u[k + 1] = min(max(u[k], g[k + 1] - radius), g[k + 1] + radius)
    return OracleResult(_grid(t_grid, g.size), u, "play_closed_form", {"radius": radius})


def sweeping_catchup(g_samples, u0, stiffness: float = 1.0, geom: SpaceGeometry | None = None, t_grid=None) -> OracleResult:
    """Moreau catch-up for ``0 in A(u') + k u - g`` with scalar stiffness ``k``.

    In ``w = k u`` this is a sweeping process by the unit H-ball centred at
    ``g``: ``w_{k+1} = g_{k+1} - proj_ball(g_{k+1} - w_k)``.
    """
    S = np.asarray(stiffness, float)
    k = float(S.reshape(-1)[0])
    if S.ndim == 2 and not np.array_equal(S, k * np.eye(S.shape[0])):
        raise ValueError("sweeping oracle needs a scalar multiple of the identity as stiffness")
    if not k > 0:
        raise ValueError("stiffness must be positive")
    g = np.asarray(g_samples, float)
    if g.ndim == 1:
        g = g[:, None]
    w = np.empty_like(g)
    w[0] = k * np.asarray(u0, float)
    for i in range(g.shape[0] - 1):
        gap = g[i + 1] - w[i]
        r = float(h_norm(gap, geom))
        w[i + 1] = w[i] if r <= 1.0 else g[i + 1] - gap / r
    return OracleResult(_grid(t_grid, g.shape[0]), w / k, "moreau_catchup", {"stiffness": k})


def skorohod_1d(drive_samples, lower: float = -np.inf, upper: float = np.inf, x0: float | None = None, t_grid=None) -> OracleResult:
    """Discrete Skorohod regulator on ``[lower, upper]``.

    Each drive increment is applied and the result projected back; away from
    the barrier the output moves exactly with the drive.  ``extras`` carries
    the cumulative pushing term.
    """
    if not lower < upper:
        raise ValueError("barrier needs lower < upper")
    y = np.asarray(drive_samples, float).reshape(-1)
    x = np.empty_like(y)
    x[0] = min(max(y[0] if x0 is None else float(x0), lower), upper)
    dy = np.diff(y)
    for k in range(dy.size):
        x[k + 1] = min(max(x[k] + dy[k], lower), upper)
    push = x - x[0] - (y - y[0])
    return OracleResult(_grid(t_grid, y.size), x, "skorohod_reflection", {"push": push, "lower": lower, "upper": upper})


def bruteforce_resolvent(g, epsilon: float, geom: SpaceGeometry | None = None, n_grid: int = 2001):
    """Numerical minimizer of ``(eps/2)|d|^2 + |d| + (g, d)``.

    For fixed length t the linear term is smallest along ``-g/|g|`` (Cauchy
    Schwarz), leaving a scalar problem on ``t >= 0``: a uniform grid brackets
    the minimizer, then golden-section search refines it.
    """
    g = np.asarray(g, float)
    if g.shape[-1] > 4:
        raise ValueError("bruteforce_resolvent is meant for n <= 4")
    ng = float(h_norm(g, geom))
    if ng == 0.0:
        return np.zeros_like(g)

    def f(t):
        return 0.5 * epsilon * t * t + t - ng * t

    def centred(c):
        # f(t) - f(c) in product form, free of the cancellation that limits
        # value-based searches near a flat minimum
        return lambda t: (t - c) * (0.5 * epsilon * (t + c) + 1.0 - ng)

    ts = np.linspace(0.0, ng / epsilon + 1.0, n_grid)
    c = float(ts[int(np.argmin(f(ts)))])
    delta = float(ts[1])
    for _ in range(8):
        fc = centred(c)
        if c - delta <= 0.0:
            res = minimize_scalar(fc, bounds=(0.0, c + delta), method="bounded", options={"xatol": delta * 1e-9})
            new = float(res.x) if fc(float(res.x)) < 0.0 else c
            # the bounded search never lands exactly on 0
            if fc(0.0) <= min(0.0, fc(new)):
                new = 0.0
        else:
            try:
                new = float(minimize_scalar(fc, bracket=(c - delta, c, c + delta), method="golden", tol=1e-14).x)
            except ValueError:
                break
        step = abs(new - c)
        c = new
        delta = max(10.0 * step, delta * 1e-3, 1e-13 * (1.0 + c))
    t = c
    return -t * g / ng


def oracle_energy_residual(result: OracleResult, g_samples, stiffness: float = 1.0, radius: float = 1.0,
                           geom: SpaceGeometry | None = None) -> np.ndarray:
    """Running defect of the deterministic energy identity.

    ``Phi(u) - (g, u) + r * sum |du|`` against its initial value minus
    ``sum (dg_k, u_k)`` (left point), with ``Phi = k/2 |u|^2``.
    """
    u = np.asarray(result.u_ref, float)
    g = np.asarray(g_samples, float)
    if u.ndim == 1:
        u = u[:, None]
        g = g.reshape(-1, 1)
    e = 0.5 * stiffness * h_inner(u, u, geom) - h_inner(g, u, geom)
    du = np.diff(u, axis=0)
    dg = np.diff(g, axis=0)
    diss = np.concatenate([[0.0], np.cumsum(radius * h_norm(du, geom))])
    load = np.concatenate([[0.0], np.cumsum(h_inner(dg, u[:-1], geom))])
    return e - e[0] + diss + load


__all__ = [
    "OracleResult",
    "play_operator",
    "sweeping_catchup",
    "skorohod_1d",
    "bruteforce_resolvent",
    "oracle_energy_residual",
]
