"""Semi-implicit Euler-Maruyama scheme for the viscously regularized system.

Per step the drift solves ``eps*d + A(d) + B(u_k) - g(t_k)`` containing 0 in
closed form (explicit in B, implicit in the dissipation); the noise is
evaluated at ``(t_k, u_k)`` (Ito).  Every path carries an energy ledger whose
residual is the discrete defect of the Ito energy balance.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dissipation import resolvent_shrink
from .energy import b_of, hessian, phi, trace_l
from .errors import BlowUpError
from .geometry import h_inner, h_norm, matvec, v_norm
from .model import ProblemSpec
from .noise import WienerPath, g_apply, sample_wiener, wiener_from_grid

BLOWUP_NORM = 1e8
REFINE_MAX_ITER = 10
REFINE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class EnergyLedger:
    """Running sums of the discrete energy balance, one entry per time node.

    ``residual = phi_t - phi_t[0] + dissipation_int - work_int - trace_int - mart_int``.
    ``work_int`` is the loading work ``sum (g, d) dt`` (zero without forcing).
    ``defect_int`` accumulates ``|d^T Hess d| dt^2 / 2``, the leading-order
    local defect of the explicit chain rule; it bounds the expected residual
    to first order.
    """

    phi_t: np.ndarray
    dissipation_int: np.ndarray
    work_int: np.ndarray
    trace_int: np.ndarray
    mart_int: np.ndarray
    defect_int: np.ndarray
    residual: np.ndarray


@dataclass(frozen=True, eq=False)
class ViscousPath:
    path_index: int
    epsilon: float
    t_grid: np.ndarray
    u: np.ndarray           # (K+1, n)
    u_d: np.ndarray         # (K+1, n), absolutely continuous part, u_d[0] = u0
    drift: np.ndarray       # (K, n), d_k on [t_k, t_{k+1})
    v: np.ndarray           # (K+1, n), stress v_k = g(t_k) - B(u_k) (midpoint state if refined)
    noise_inc: np.ndarray   # (K, n), G(t_k, u_k) dW_k
    arc: np.ndarray         # (K+1,), sum |d_j| dt_j
    ledger: EnergyLedger
    forcing: np.ndarray = field(repr=False, default=None)   # (K+1, n), g(t_k)
    trace_rate: np.ndarray = field(repr=False, default=None)  # (K+1,), Tr L(t_k, u_k)

    @property
    def n_steps(self) -> int:
        return self.t_grid.size - 1

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    @property
    def T_hat(self) -> float:
        return self.T + float(self.arc[-1])


def step(u_k, t_k, dW_k, spec: ProblemSpec, dt: float | None = None):
    """One scheme step; returns ``(u_next, d_k, v_k)``.  Batched over leading axes."""
    dt = spec.dt if dt is None else dt
    u_k = np.asarray(u_k, dtype=float)
    g_k = spec.forcing(t_k)
    b = b_of(u_k, spec.potential, spec.geometry)
    d = resolvent_shrink(b - g_k, spec.epsilon, spec.geometry)
    v = g_k - b
    if spec.midpoint_refine:
        d, v = _refine(u_k, g_k, d, dt, spec)
    noise = g_apply(t_k, u_k, dW_k, spec.noise) if spec.noise.kind != "off" else 0.0
    u_next = u_k + d * dt + noise
    return u_next, d, v


def _refine(u_k, g_k, d, dt, spec):
    v = g_k - b_of(u_k, spec.potential, spec.geometry)
    for _ in range(REFINE_MAX_ITER):
        b_mid = b_of(u_k + 0.5 * dt * d, spec.potential, spec.geometry)
        d_new = resolvent_shrink(b_mid - g_k, spec.epsilon, spec.geometry)
        v = g_k - b_mid
        change = float(np.max(h_norm(d_new - d, spec.geometry), initial=0.0))
        d = d_new
        if change <= REFINE_TOL:
            break
    return d, v


def simulate_path(spec: ProblemSpec, path_index: int = 0, wiener: WienerPath | None = None) -> ViscousPath:
    wieners = None if wiener is None else [wiener]
    return simulate_ensemble(spec, [path_index], wieners)[0]


def simulate_ensemble(
    spec: ProblemSpec,
    path_indices: Sequence[int] | None = None,
    wieners: Sequence[WienerPath] | None = None,
) -> list[ViscousPath]:
    """Simulate several paths at once (vectorized over paths).

    Each row is computed with batch-independent arithmetic, so results are
    bit-identical to simulating the paths one at a time.
    """
    if path_indices is None:
        path_indices = range(spec.n_paths)
    idx = [int(i) for i in path_indices]
    t = spec.time_grid()
    K = t.size - 1
    n, m = spec.dim, spec.noise.m
    P = len(idx)
    if wieners is None:
        if spec.noise.kind == "off":
            dW = np.zeros((P, K, m))
        else:
            wieners = [sample_wiener(spec, i) for i in idx]
    if wieners is not None:
        dW = np.stack([w.increments for w in wieners]) if K else np.zeros((P, 0, m))
    dts = np.diff(t)
    g_nodes = spec.forcing(t)

    u = np.empty((P, K + 1, n))
    d_all = np.zeros((P, K, n))
    v_all = np.empty((P, K + 1, n))
    noise_all = np.zeros((P, K, n))
    u[:, 0] = spec.u0
    geom, pot, eps = spec.geometry, spec.potential, spec.epsilon
    noisy = spec.noise.kind != "off"
    for k in range(K):
        uk = u[:, k]
        b = b_of(uk, pot, geom)
        gk = g_nodes[k]
        d = resolvent_shrink(b - gk, eps, geom)
        v = gk - b
        if spec.midpoint_refine:
            d, v = _refine(uk, gk, d, dts[k], spec)
        un = uk + d * dts[k]
        if noisy:
            inc = g_apply(t[k], uk, dW[:, k], spec.noise)
            noise_all[:, k] = inc
            un = un + inc
        nrm = h_norm(un, geom)
        bad = ~np.isfinite(nrm) | (nrm > BLOWUP_NORM)
        if np.any(bad):
            j = int(np.argmax(bad))
            raise BlowUpError(idx[j], k + 1, float(t[k + 1]), float(nrm[j]))
        u[:, k + 1] = un
        d_all[:, k] = d
        v_all[:, k] = v
    v_all[:, K] = g_nodes[K] - b_of(u[:, K], pot, geom)

    return [
        _assemble(spec, idx[p], t, u[p], d_all[p], v_all[p], noise_all[p], g_nodes)
        for p in range(P)
    ]


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit value, else RATIND_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("RATIND_THREADS", "").strip()
        threads = int(env) if env else 1
    return max(1, int(threads))


def run_ensemble(spec: ProblemSpec, threads: int | None = None, chunk: int = 64,
                 path_indices: Sequence[int] | None = None) -> list[ViscousPath]:
    """All paths of ``spec`` in chunks on a bounded thread pool.

    Output is ordered by path index and does not depend on the pool size.
    """
    idx = list(range(spec.n_paths)) if path_indices is None else [int(i) for i in path_indices]
    chunks = [idx[i:i + chunk] for i in range(0, len(idx), chunk)]
    n = resolve_threads(threads)
    if n == 1 or len(chunks) == 1:
        out = [p for c in chunks for p in simulate_ensemble(spec, c)]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            out = [p for res in pool.map(lambda c: simulate_ensemble(spec, c), chunks) for p in res]
    return sorted(out, key=lambda p: p.path_index)


def _cum(x):
    out = np.zeros(x.shape[0] + 1)
    np.cumsum(x, out=out[1:])
    return out


def _assemble(spec, path_index, t, u, d, v, noise, g_nodes) -> ViscousPath:
    geom, pot = spec.geometry, spec.potential
    dts = np.diff(t)
    K = dts.size
    u_d = np.empty_like(u)
    u_d[0] = spec.u0
    if K:
        np.cumsum(d * dts[:, None], axis=0, out=u_d[1:])
        u_d[1:] += spec.u0
    phi_t = phi(u, pot)
    b_nodes = b_of(u, pot, geom)
    tr = trace_l(t, u, pot, spec.noise, geom)
    dn = h_norm(d, geom)
    diss = h_inner(v[:K], d, geom) * dts
    work = h_inner(g_nodes[:K], d, geom) * dts
    trace_inc = 0.5 * tr[:K] * dts
    mart = h_inner(b_nodes[:K], noise, geom)
    hd = matvec(hessian(u[:K], pot), d) if K else np.zeros((0, u.shape[1]))
    curv = np.abs(np.sum(hd * d, axis=-1)) if K else np.zeros(0)
    defect = 0.5 * curv * dts * dts
    diss_c, work_c, trace_c, mart_c = _cum(diss), _cum(work), _cum(trace_inc), _cum(mart)
    residual = phi_t - phi_t[0] + diss_c - work_c - trace_c - mart_c
    ledger = EnergyLedger(phi_t, diss_c, work_c, trace_c, mart_c, _cum(defect), residual)
    arrays = [t, u, u_d, d, v, noise, ledger.residual]
    for a in arrays:
        a.setflags(write=False)
    return ViscousPath(
        path_index=path_index,
        epsilon=spec.epsilon,
        t_grid=t,
        u=u,
        u_d=u_d,
        drift=d,
        v=v,
        noise_inc=noise,
        arc=_cum(dn * dts),
        ledger=ledger,
        forcing=g_nodes,
        trace_rate=tr,
    )


def rebuild_path(spec: ProblemSpec, path_index: int, t, u, d, v) -> ViscousPath:
    """Reassemble a ViscousPath (ledger included) from stored trajectories.

    Noise increments are recovered from the update identity, so a stored
    path whose ``v`` column was altered keeps its states and drift intact.
    """
    t = np.asarray(t, float)
    u = np.asarray(u, float)
    d = np.asarray(d, float)
    v = np.asarray(v, float)
    dts = np.diff(t)
    if spec.noise.kind == "off":
        noise = np.zeros_like(d)
    else:
        noise = u[1:] - u[:-1] - d * dts[:, None]
    return _assemble(spec, path_index, t, u.copy(), d.copy(), v.copy(), noise, spec.forcing(t))


@dataclass(frozen=True)
class MonitorReport:
    epsilon: float
    ell: int
    groups: dict
    ka_residual: float
    n_paths: int


def estimate_monitors(paths: Sequence[ViscousPath], ell: int, spec: ProblemSpec) -> MonitorReport:
    """Empirical moments behind the epsilon-uniform a priori estimates.

    Groups: ``state`` E sup|u|_V^(p l); ``arc`` E(int |d|)^l; ``viscous``
    eps^l E(int |d|^2)^l; ``stress_B`` E(int |B(u)|^2)^l; ``stress_v``
    E(int |v|^2)^l.  ``ka_residual`` is max(|v| - eps|d| - 1), which must not
    be positive (dissipation bound with K_A = 1).
    """
    if not paths:
        raise ValueError("estimate_monitors needs a nonempty ensemble")
    if ell < 2:
        raise ValueError("ell must be >= 2")
    geom, pot = spec.geometry, spec.potential
    p = pot.p
    eps = paths[0].epsilon
    state, arc, visc, sb, sv, ka = [], [], [], [], [], []
    for path in sorted(paths, key=lambda q: q.path_index):
        dts = np.diff(path.t_grid)
        K = dts.size
        state.append(float(np.max(v_norm(path.u, geom))) ** (p * ell))
        arc.append(float(path.arc[-1]) ** ell)
        dn = h_norm(path.drift, geom)
        visc.append(eps**ell * float(np.sum(dn * dn * dts)) ** ell)
        bn = h_norm(b_of(path.u[:K], pot, geom), geom)
        sb.append(float(np.sum(bn * bn * dts)) ** ell)
        vn = h_norm(path.v[:K], geom)
        sv.append(float(np.sum(vn * vn * dts)) ** ell)
        if K:
            ka.append(float(np.max(vn - eps * dn - 1.0)))
    groups = {
        "state": float(np.mean(state)),
        "arc": float(np.mean(arc)),
        "viscous": float(np.mean(visc)),
        "stress_B": float(np.mean(sb)),
        "stress_v": float(np.mean(sv)),
    }
    return MonitorReport(eps, ell, groups, max(ka) if ka else 0.0, len(paths))


def check_monitor_uniformity(reports: Sequence[MonitorReport], factor: float = 2.0) -> dict:
    """Ratio of each group to its value at the largest epsilon; pass iff <= factor."""
    ref = max(reports, key=lambda r: r.epsilon)
    out = {}
    for name in ref.groups:
        base = ref.groups[name]
        vals = [r.groups[name] for r in reports]
        if base == 0.0:
            ratio = 0.0 if max(vals) == 0.0 else np.inf
        else:
            ratio = max(vals) / base
        out[name] = (ratio, ratio <= factor)
    return out


__all__ = [
    "EnergyLedger",
    "ViscousPath",
    "MonitorReport",
    "step",
    "simulate_path",
    "simulate_ensemble",
    "run_ensemble",
    "resolve_threads",
    "rebuild_path",
    "estimate_monitors",
    "check_monitor_uniformity",
    "wiener_from_grid",
]
