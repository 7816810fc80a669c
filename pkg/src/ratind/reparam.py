"""Arc-length rescaling of viscous paths, its inverse, and solution checkers.

A viscous path is mapped to the clock ``tau(t) = t + int_0^t |d|_H``; the
inverse clock ``t_hat`` is piecewise linear with knots ``(tau_k, t_k)``, so on
each knot interval ``t_hat' = 1/(1+|d_k|)`` and ``|d(u_hat^d)/dtau| =
|d_k|/(1+|d_k|)``.  Jumps of the vanishing-viscosity limit appear as
plateaus of ``t_hat`` (speed_time close to 0).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .dissipation import clip_to_unit_ball, fenchel_gap, psi_hat_subgradient_residual
from .energy import b_of
from .errors import JumpDetected, NonMonotoneError
from .geometry import h_norm
from .model import ProblemSpec
from .noise import WienerPath, empirical_qv, g_apply, rescaled_noise, wiener_from_grid
from .viscous import ViscousPath

ROUNDTRIP_TOL = 1e-10
SPEED_TOL = 1e-8
LIPSCHITZ_TOL = 1e-8
EQ1_TOL = 1e-10
EQ2_TOL = 1e-10
QV_REL_TOL = 0.10
DEFAULT_DELTA = 1e-3


def _interp_cols(x, xp, fp):
    """Column-wise ``np.interp`` for ``fp`` of shape ``(len(xp), n)``."""
    fp = np.asarray(fp, float)
    return np.stack([np.interp(x, xp, fp[:, c]) for c in range(fp.shape[1])], axis=-1)


@dataclass(frozen=True, eq=False)
class ClockMap:
    """Monotone piecewise-linear clock with knots ``(tau_k, t_k)``."""

    tau_knots: np.ndarray
    t_knots: np.ndarray

    @property
    def T(self) -> float:
        return float(self.t_knots[-1])

    @property
    def T_hat(self) -> float:
        return float(self.tau_knots[-1])

    def t_hat(self, tau):
        """Inverse clock; constant ``T`` beyond ``T_hat``."""
        return np.interp(tau, self.tau_knots, self.t_knots)

    def tau_of(self, t):
        return np.interp(t, self.t_knots, self.tau_knots)


def arc_length(path: ViscousPath) -> ClockMap:
    """``tau(t_k) = t_k + sum_{j<k} |d_j| dt_j`` (left Riemann sum of the drift)."""
    tau = path.t_grid + path.arc
    return ClockMap(tau, path.t_grid)


def tau_grid_for(T_hat: float, tau_step: float) -> np.ndarray:
    """Uniform nodes below ``T_hat`` plus an endpoint exactly at ``T_hat``."""
    if not tau_step > 0:
        raise ValueError("tau_step must be positive")
    if T_hat <= 0:
        return np.zeros(1)
    n = int(np.ceil(T_hat / tau_step - 1e-9))
    grid = np.arange(n + 1) * tau_step
    grid = grid[grid < T_hat * (1 - 1e-12)]
    return np.append(grid, T_hat)


def invert_clock(tau_knots, t_knots, tau_grid) -> np.ndarray:
    """Sample ``t_hat`` on ``tau_grid`` from strictly increasing knots."""
    tau_knots = np.asarray(tau_knots, float)
    t_knots = np.asarray(t_knots, float)
    if tau_knots.shape != t_knots.shape:
        raise ValueError("tau and t knots must have equal length")
    if np.any(np.diff(tau_knots) <= 0) or not np.all(np.isfinite(tau_knots)):
        raise NonMonotoneError("clock samples must be strictly increasing")
    return np.interp(np.asarray(tau_grid, float), tau_knots, t_knots)


@dataclass(frozen=True, eq=False)
class ParametrizedPath:
    path_index: int
    epsilon: float
    tau_grid: np.ndarray
    t_hat: np.ndarray
    u_hat: np.ndarray
    u_hat_d: np.ndarray
    v_hat: np.ndarray
    z: np.ndarray              # d(u_hat^d)/dtau on [tau_j, tau_{j+1})
    speed_time: np.ndarray
    speed_state: np.ndarray
    m_hat: np.ndarray
    T_hat: float
    clock: ClockMap
    k_index: np.ndarray        # knot interval holding tau_j
    diss_hat: np.ndarray       # int_0^tau (v_hat, z) dsigma
    trace_hat: np.ndarray      # 1/2 int_0^tau Tr L t_hat' dsigma
    work_hat: np.ndarray
    defect_hat: np.ndarray
    source: ViscousPath = field(repr=False)
    wiener: WienerPath | None = field(repr=False, default=None)

    @property
    def T(self) -> float:
        return self.clock.T

    def fenchel_gaps(self, geom=None):
        zc, _ = clip_to_unit_ball(self.z, geom)
        return fenchel_gap(zc, self.v_hat, geom)

    def sample(self, tau):
        """``(t_hat, u_hat, m_hat)`` at arbitrary ``tau`` (constant beyond ``T_hat``)."""
        tau = np.asarray(tau, float)
        src = self.source
        t = self.clock.t_hat(tau)
        u = _interp_cols(tau, self.clock.tau_knots, src.u)
        m = rescaled_noise(self.wiener, t) if self.wiener is not None else np.zeros(tau.shape + (self.m_hat.shape[1],))
        return t, u, m


def _knot_index(clock: ClockMap, tau):
    K = clock.t_knots.size - 1
    if K == 0:
        return np.zeros(np.shape(tau), dtype=int)
    k = np.searchsorted(clock.tau_knots, tau, side="right") - 1
    return np.clip(k, 0, K - 1)


def rescale_path(
    path: ViscousPath,
    spec: ProblemSpec,
    wiener: WienerPath | None = None,
    tau_step: float | None = None,
) -> ParametrizedPath:
    """Compose a viscous path with the inverse arc-length clock."""
    geom = spec.geometry
    clock = arc_length(path)
    h = tau_step if tau_step else spec.default_tau_step
    tau = tau_grid_for(clock.T_hat, h)
    t_hat = invert_clock(clock.tau_knots, clock.t_knots, tau) if tau.size > 1 else np.zeros(1)
    K = path.n_steps
    k = _knot_index(clock, tau)
    if K:
        d = path.drift[k]
        dn = h_norm(d, geom)
        speed_time = 1.0 / (1.0 + dn)
        speed_state = dn / (1.0 + dn)
        z = d / (1.0 + dn)[:, None]
        v_hat = path.v[k]
    else:
        speed_time = np.ones(tau.size)
        speed_state = np.zeros(tau.size)
        z = np.zeros((tau.size, spec.dim))
        v_hat = np.repeat(path.v[:1], tau.size, axis=0)
    u_hat = _interp_cols(tau, clock.tau_knots, path.u)
    u_hat_d = _interp_cols(tau, clock.tau_knots, path.u_d)
    led = path.ledger
    at = lambda series: np.interp(tau, clock.tau_knots, series)  # noqa: E731
    if spec.noise.kind == "off":
        m_hat = np.zeros((tau.size, spec.noise.m))
    else:
        if wiener is None:
            wiener = wiener_from_grid(path.t_grid, spec.noise.m, spec.seed, path.path_index)
        m_hat = rescaled_noise(wiener, t_hat)
    arrays = (tau, t_hat, u_hat, u_hat_d, v_hat, z, speed_time, speed_state, m_hat, k)
    for a in arrays:
        a.setflags(write=False)
    return ParametrizedPath(
        path_index=path.path_index,
        epsilon=path.epsilon,
        tau_grid=tau,
        t_hat=t_hat,
        u_hat=u_hat,
        u_hat_d=u_hat_d,
        v_hat=v_hat,
        z=z,
        speed_time=speed_time,
        speed_state=speed_state,
        m_hat=m_hat,
        T_hat=clock.T_hat,
        clock=clock,
        k_index=k,
        diss_hat=at(led.dissipation_int),
        trace_hat=at(led.trace_int),
        work_hat=at(led.work_int),
        defect_hat=at(led.defect_int),
        source=path,
        wiener=wiener,
    )


# ---------------------------------------------------------------- checkers


@dataclass(frozen=True)
class ConditionResult:
    name: str
    residual: float
    tolerance: float
    passed: bool
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SolutionCheckReport:
    kind: str
    path_index: int
    conditions: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    def __getitem__(self, name) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def names(self):
        return [c.name for c in self.conditions]


def _cond(name, residual, tol, **details):
    residual = float(residual)
    return ConditionResult(name, residual, float(tol), bool(residual <= tol), details)


@dataclass(frozen=True)
class QVContext:
    """Ensemble quadratic-variation statistics at one tau checkpoint."""

    tau: float
    qv: np.ndarray           # mean empirical QV of M_hat per component
    mean_t_hat: float
    n_paths: int

    @property
    def rel_error(self) -> float:
        if self.mean_t_hat == 0:
            return float(np.max(np.abs(self.qv)))
        return float(np.max(np.abs(self.qv - self.mean_t_hat)) / self.mean_t_hat)


def qv_context(paths, tau: float, tau_step: float) -> QVContext:
    """Empirical QV of ``M_hat`` on a common uniform grid ``[0, tau]``.

    The grid should be coarser than the time step: linear interpolation of W
    inside a step has smaller quadratic variation than W itself.
    """
    paths = list(paths)
    grid = tau_grid_for(tau, tau_step)
    samples, ends = [], []
    for p in sorted(paths, key=lambda q: q.path_index):
        t, _, m = p.sample(grid)
        samples.append(m)
        ends.append(float(t[-1]))
    qv = empirical_qv(np.stack(samples))
    return QVContext(float(tau), qv, float(np.mean(ends)), len(paths))


def _noise_integral(p: ParametrizedPath, spec: ProblemSpec):
    """Left-point integral of ``G`` against ``M_hat`` at every tau node."""
    src = p.source
    n = spec.dim
    if spec.noise.kind == "off" or p.wiener is None:
        return np.zeros((p.tau_grid.size, n))
    W = p.wiener.cumulative
    t = src.t_grid
    K = t.size - 1
    if K == 0:
        return np.zeros((p.tau_grid.size, n))
    inc = g_apply(t[:-1], src.u[:-1], np.diff(W, axis=0), spec.noise)
    cum = np.zeros((K + 1, n))
    np.cumsum(inc, axis=0, out=cum[1:])
    k = p.k_index
    tail = g_apply(t[k], src.u[k], p.m_hat - W[k], spec.noise)
    return cum[k] + tail


def _stress_state(src: ViscousPath, spec: ProblemSpec):
    if not spec.midpoint_refine or src.n_steps == 0:
        return src.u
    dts = np.diff(src.t_grid)
    mid = src.u[:-1] + 0.5 * dts[:, None] * src.drift
    return np.concatenate([mid, src.u[-1:]])


def check_parametrized(p: ParametrizedPath, spec: ProblemSpec, qv: QVContext | None = None) -> SolutionCheckReport:
    """Residual of every defining condition of a parametrized solution."""
    geom = spec.geometry
    src = p.source
    tau, th = p.tau_grid, p.t_hat
    conds = []

    dtau = np.diff(tau)
    dth = np.diff(th)
    slope = dth / dtau if dtau.size else np.zeros(0)
    r_hat_t = max(
        abs(float(th[0])),
        abs(float(th[-1]) - p.T),
        float(np.max(-dth, initial=0.0)),
        float(np.max(slope - 1.0, initial=0.0)),
    )
    ud_lip = h_norm(np.diff(p.u_hat_d, axis=0), geom) / dtau if dtau.size else np.zeros(0)
    conds.append(_cond("hat_t", r_hat_t, ROUNDTRIP_TOL, max_slope=float(np.max(slope, initial=0.0))))

    sp = np.abs(p.speed_time + p.speed_state - 1.0)
    conds.append(_cond(
        "eq_hat", float(np.max(sp)), SPEED_TOL,
        min_speed_time=float(np.min(p.speed_time)),
        ud_lipschitz_excess=float(np.max(ud_lip - 1.0, initial=0.0)),
    ))

    if spec.noise.kind == "off":
        conds.append(_cond("quadratic", 0.0, QV_REL_TOL, note="noise off: both sides vanish"))
    elif qv is None:
        conds.append(ConditionResult("quadratic", float("inf"), QV_REL_TOL, False,
                                     {"note": "noise on but no ensemble QV context supplied"}))
    else:
        conds.append(_cond("quadratic", qv.rel_error, QV_REL_TOL, tau=qv.tau,
                           qv=qv.qv.tolist(), mean_t_hat=qv.mean_t_hat, n_paths=qv.n_paths))

    N = _noise_integral(p, spec)
    pred = p.u_hat_d + N
    scale = 1.0 + float(np.max(h_norm(p.u_hat, geom)))
    r1 = float(np.max(h_norm(p.u_hat - pred, geom))) / scale
    conds.append(_cond("eq1_var'", r1, EQ1_TOL, chain_rule=chain_rule_residual(p, geom)))

    k = p.k_index
    state = _stress_state(src, spec)[k]
    g_left = src.forcing[k] if src.forcing is not None else spec.forcing(src.t_grid[k])
    r2 = h_norm(p.v_hat + b_of(state, spec.potential, geom) - g_left, geom)
    r2_interp = h_norm(p.v_hat + b_of(p.u_hat, spec.potential, geom) - spec.forcing(th), geom)
    bscale = 1.0 + float(np.max(h_norm(g_left - p.v_hat, geom)))
    conds.append(_cond("eq2_var'", float(np.max(r2)) / bscale, EQ2_TOL,
                       interpolated=float(np.max(r2_interp))))

    zc, overshoot = clip_to_unit_ball(p.z, geom)
    gaps = fenchel_gap(zc, p.v_hat, geom)
    eps_res = psi_hat_subgradient_residual(zc * (1 - 1e-15), p.v_hat, p.epsilon, geom)
    moving = h_norm(zc, geom) > 0
    safe = np.where(moving, h_norm(zc, geom), 1.0)
    a_res = np.where(moving, h_norm(p.v_hat - zc / safe[:, None], geom),
                     np.maximum(h_norm(p.v_hat, geom) - 1.0, 0.0))
    conds.append(_cond(
        "incl'", float(np.max(gaps)), p.epsilon + 1e-9,
        mean_gap=float(np.mean(gaps)),
        clip_overshoot=overshoot,
        eps_inclusion_residual=float(np.max(eps_res)),
        strong_inclusion_residual=float(np.max(a_res)),
    ))
    return SolutionCheckReport("parametrized", p.path_index, tuple(conds))


def chain_rule_residual(p: ParametrizedPath, geom=None) -> float:
    """``u_hat^d`` increments against ``d(t_hat_j) * dt_hat`` on tau intervals
    that stay inside one time step."""
    if p.tau_grid.size < 2 or p.source.n_steps == 0:
        return 0.0
    k = p.k_index
    inside = k[1:] == k[:-1]
    # an interval ending exactly on the next knot is still inside one step
    inside |= np.isclose(p.tau_grid[1:], p.clock.tau_knots[np.minimum(k[:-1] + 1, p.clock.tau_knots.size - 1)], rtol=0, atol=0)
    lhs = np.diff(p.u_hat_d, axis=0)
    rhs = p.source.drift[k[:-1]] * np.diff(p.t_hat)[:, None]
    r = h_norm(lhs - rhs, geom)
    return float(np.max(r[inside], initial=0.0))


# ---------------------------------------------------------------- inversion


@dataclass(frozen=True, eq=False)
class DifferentialSolution:
    t_grid: np.ndarray
    u: np.ndarray
    u_d: np.ndarray
    v: np.ndarray
    noise_int: np.ndarray
    epsilon: float
    path_index: int
    tau_of_t: np.ndarray

    @property
    def drift(self):
        return np.diff(self.u_d, axis=0) / np.diff(self.t_grid)[:, None]


def jump_intervals(p: ParametrizedPath, delta: float = DEFAULT_DELTA):
    """Maximal tau-intervals on which ``speed_time < delta``; ``(start, end, min_speed)``."""
    slow = p.speed_time < delta
    if p.tau_grid.size > 1:
        slow = slow[:-1]  # last node repeats the final interval
    out = []
    j, J = 0, slow.size
    while j < J:
        if slow[j]:
            e = j
            while e + 1 < J and slow[e + 1]:
                e += 1
            out.append((float(p.tau_grid[j]), float(p.tau_grid[e + 1]), float(np.min(p.speed_time[j:e + 1]))))
            j = e + 1
        else:
            j += 1
    return out


def invert_parametrization(
    p: ParametrizedPath, delta: float = DEFAULT_DELTA, t_grid=None, spec: ProblemSpec | None = None
) -> DifferentialSolution:
    """Map a parametrized path back to original time.

    Possible only when ``t_hat`` is strictly increasing with speed at least
    ``delta``; otherwise JumpDetected names the first offending tau-interval.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    jumps = jump_intervals(p, delta)
    if jumps:
        a, b, s = jumps[0]
        raise JumpDetected(a, b, s, delta)
    t = p.clock.t_knots if t_grid is None else np.asarray(t_grid, float)
    if p.tau_grid.size == 1:
        tau_t = np.zeros(t.size)
    else:
        tau_t = np.interp(t, p.t_hat, p.tau_grid)
    u = _interp_cols(tau_t, p.tau_grid, p.u_hat)
    ud = _interp_cols(tau_t, p.tau_grid, p.u_hat_d)
    j = np.clip(np.searchsorted(p.tau_grid, tau_t, side="left"), 0, p.tau_grid.size - 1)
    v = p.v_hat[j]
    # the stress is defined at every time node; beyond the last step use v_K
    v = np.where((tau_t >= p.T_hat)[:, None], p.source.v[-1], v)
    n = p.u_hat.shape[1]
    if spec is not None and spec.noise.kind != "off":
        N = _interp_cols(tau_t, p.tau_grid, _noise_integral(p, spec))
    else:
        N = np.zeros((t.size, n))
    return DifferentialSolution(t, u, ud, v, N, p.epsilon, p.path_index, tau_t)


def check_differential(sol: DifferentialSolution, spec: ProblemSpec, tol: float = 1e-6) -> SolutionCheckReport:
    """Residuals of the original-time conditions.

    The inclusion is tested at the viscous level (``A_eps`` at the path's
    epsilon); the rate-independent (epsilon = 0) residual is reported
    alongside.  Stress and inclusion use left-node values, matching the
    scheme's explicit treatment of B.
    """
    geom = spec.geometry
    scale = 1.0 + float(np.max(h_norm(sol.u, geom)))
    r1 = float(np.max(h_norm(sol.u - sol.u_d - sol.noise_int, geom))) / scale
    conds = [_cond("eq1_var", r1, tol)]
    r2 = h_norm(sol.v + b_of(sol.u, spec.potential, geom) - spec.forcing(sol.t_grid), geom)
    conds.append(_cond("eq2_var", float(np.max(r2)) / scale, tol))
    if sol.t_grid.size > 1:
        d = sol.drift
        v = sol.v[:-1]
        dn = h_norm(d, geom)
        moving = dn > 1e-12
        safe = np.where(moving, dn, 1.0)
        sel = d / safe[:, None]
        res_eps = np.where(moving, h_norm(v - sol.epsilon * d - sel, geom), np.maximum(h_norm(v, geom) - 1.0, 0.0))
        res_0 = np.where(moving, h_norm(v - sel, geom), np.maximum(h_norm(v, geom) - 1.0, 0.0))
        vscale = 1.0 + float(np.max(h_norm(v, geom)))
        conds.append(_cond("incl", float(np.max(res_eps)) / vscale, tol, rate_independent_residual=float(np.max(res_0))))
    else:
        conds.append(_cond("incl", 0.0, tol))
    return SolutionCheckReport("differential", sol.path_index, tuple(conds))


def graph_hausdorff(a, b) -> float:
    """Hausdorff distance between two sampled graphs (rows are points)."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(np.max(da), np.max(db)))


def parametrized_graph(p: ParametrizedPath) -> np.ndarray:
    """Points ``(t_hat, u_hat)`` of the parametrized graph."""
    return np.column_stack([p.t_hat, p.u_hat])


__all__ = [
    "ClockMap",
    "ParametrizedPath",
    "ConditionResult",
    "SolutionCheckReport",
    "QVContext",
    "DifferentialSolution",
    "arc_length",
    "tau_grid_for",
    "invert_clock",
    "rescale_path",
    "qv_context",
    "check_parametrized",
    "chain_rule_residual",
    "jump_intervals",
    "invert_parametrization",
    "check_differential",
    "graph_hausdorff",
    "parametrized_graph",
]
