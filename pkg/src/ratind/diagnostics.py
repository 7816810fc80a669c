"""Energy-identity verification, Mosco certification and epsilon sweeps."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dissipation import big_f, mosco_gap, psi_hat_eps, psi_norm
from .energy import hessian, phi
from .errors import DomainError, EnsembleTooSmall
from .geometry import SpaceGeometry, h_norm, matvec
from .model import ProblemSpec
from .noise import holder_constant, holder_transfer_factor
from .reparam import ParametrizedPath, graph_hausdorff, parametrized_graph, rescale_path
from .viscous import ViscousPath, check_monitor_uniformity, estimate_monitors, run_ensemble

MOSCO_TOL = 1e-12
HOLDER_ALPHA = 0.4


@dataclass(frozen=True)
class Verdict:
    name: str
    residual: float
    tolerance: float
    passed: bool
    note: str = ""


def verdict(name, residual, tolerance, note="") -> Verdict:
    residual, tolerance = float(residual), float(tolerance)
    return Verdict(name, residual, tolerance, bool(residual <= tolerance), note)


# ------------------------------------------------------------------ energy


def energy_residual_pathwise(path: ViscousPath) -> float:
    return float(np.max(np.abs(path.ledger.residual)))


def pathwise_verdict(path: ViscousPath, noisy: bool) -> Verdict | None:
    """Deterministic paths: the residual is the first-order chain-rule defect,
    so it must stay below twice the accumulated local bound.  No verdict for
    noisy paths, whose pathwise residual is a random O(dt^(1/2)) quantity."""
    if noisy:
        return None
    bound = 2.0 * float(path.ledger.defect_int[-1]) + 1e-12 * (1.0 + float(np.max(np.abs(path.ledger.phi_t))))
    return verdict(f"energy_pathwise[{path.path_index}]", energy_residual_pathwise(path), bound,
                   "tolerance = 2 x accumulated local defect")


@dataclass(frozen=True)
class ExpectedEnergyRow:
    tau: float
    residual: float
    mc_se: float
    bias_bound: float
    mean_trace: float
    mart_mean: float
    mart_se: float
    n_paths: int

    @property
    def tolerance(self) -> float:
        return 3.0 * self.mc_se + self.bias_bound

    @property
    def passed(self) -> bool:
        return self.residual <= self.tolerance

    @property
    def martingale_centred(self) -> bool:
        return abs(self.mart_mean) <= 3.0 * self.mart_se + 1e-15


def default_checkpoints(paths: Sequence[ParametrizedPath]) -> list[float]:
    mean = float(np.mean([p.T_hat for p in paths]))
    tmin = float(np.min([p.T_hat for p in paths]))
    return [mean / 4, mean / 2, 3 * mean / 4, tmin]


def energy_residual_expected(
    paths: Sequence[ParametrizedPath],
    spec: ProblemSpec,
    taus: Sequence[float] | None = None,
    min_paths: int = 100,
) -> list[ExpectedEnergyRow]:
    """Ensemble form of the rescaled energy identity at each checkpoint.

    Per path, ``X = Phi(u_hat) - Phi(u0) + int (v_hat, z) - int (g, z) - 1/2 int Tr L t_hat'``;
    the residual is ``|mean X|`` with standard error ``std X / sqrt N``.  The
    scheme bias bound is the mean accumulated ``|d^T Hess d| dt^2 / 2`` plus
    ``|du^T Hess du| / 8`` for the partially covered step (linear
    interpolation of a quadratic).
    """
    paths = sorted(paths, key=lambda p: p.path_index)
    if len(paths) < min_paths:
        raise EnsembleTooSmall(f"expected-energy check needs at least {min_paths} paths, got {len(paths)}")
    taus = default_checkpoints(paths) if taus is None else list(taus)
    pot, geom = spec.potential, spec.geometry
    phi0 = float(phi(spec.u0, pot))
    rows = []
    for tau in taus:
        X, bias, trace, mart = [], [], [], []
        for p in paths:
            src = p.source
            kn = p.clock.tau_knots
            _, u, _ = p.sample(np.array([tau]))
            at = lambda series: float(np.interp(tau, kn, series))  # noqa: E731
            led = src.ledger
            X.append(float(phi(u[0], pot)) - phi0 + at(led.dissipation_int) - at(led.work_int) - at(led.trace_int))
            trace.append(at(led.trace_int))
            mart.append(at(led.mart_int))
            b = at(led.defect_int)
            K = src.n_steps
            if K and tau < p.T_hat:
                k = min(int(np.searchsorted(kn, tau, side="right")) - 1, K - 1)
                du = src.u[k + 1] - src.u[k]
                b += 0.125 * abs(float(du @ matvec(hessian(src.u[k], pot), du)))
            bias.append(b)
        X = np.asarray(X)
        N = X.size
        se = float(np.std(X, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
        mart = np.asarray(mart)
        mse = float(np.std(mart, ddof=1) / math.sqrt(N)) if N > 1 else 0.0
        rows.append(ExpectedEnergyRow(float(tau), abs(float(np.mean(X))), se, float(np.mean(bias)),
                                      float(np.mean(trace)), float(np.mean(mart)), mse, N))
    return rows


# ------------------------------------------------------------------ Mosco


@dataclass(frozen=True)
class MoscoRow:
    r: float
    epsilon: float
    gap: float        # mosco_gap
    direct: float     # Psi_hat_eps(z) - Psi(z) evaluated separately
    expected: float   # eps * F(r)

    @property
    def error(self) -> float:
        return max(abs(self.gap - self.expected), abs(self.direct - self.expected))


def mosco_table(radii: Sequence[float], eps_list: Sequence[float], geom: SpaceGeometry | None = None) -> list[MoscoRow]:
    """Gap table along the first axis, scaled so that ``|z|_H = r``; needs ``0 <= r < 1``."""
    if any(not 0.0 <= r < 1.0 for r in radii):
        raise DomainError("mosco_table radii must lie in [0, 1)")
    dim = 1 if geom is None else geom.dim
    w = 1.0 if geom is None else float(geom.h_weights[0])
    rows = []
    for r in radii:
        z = np.zeros(dim)
        z[0] = r / math.sqrt(w)
        rn = float(h_norm(z, geom))
        for eps in eps_list:
            direct = psi_hat_eps(z, eps, geom).value - psi_norm(z, geom)
            rows.append(MoscoRow(rn, float(eps), float(mosco_gap(z, eps, geom)), float(direct), float(eps * big_f(rn))))
    return rows


@dataclass(frozen=True)
class RecoveryRow:
    epsilon: float
    value: float
    closed_form: float
    target: float

    @property
    def distance(self) -> float:
        return abs(self.value - self.target)


def recovery_check(x, eps_list: Sequence[float], geom: SpaceGeometry | None = None) -> list[RecoveryRow]:
    """Recovery sequence ``x_eps = (1 - eps) x`` for a unit vector ``x``.

    ``Psi_hat_eps(x_eps) = 1 - 2 eps + eps^2 - eps ln eps`` tends to ``Psi(x) = 1``.
    """
    x = np.asarray(x, float)
    nx = float(h_norm(x, geom))
    if abs(nx - 1.0) > 1e-12:
        raise ValueError("recovery check needs |x|_H = 1")
    rows = []
    for eps in sorted(eps_list, reverse=True):
        val = psi_hat_eps((1.0 - eps) * x, eps, geom).value
        cf = 1.0 - 2.0 * eps + eps * eps - eps * math.log(eps)
        rows.append(RecoveryRow(float(eps), float(val), cf, 1.0))
    return rows


def recovery_verdict(rows: Sequence[RecoveryRow]) -> Verdict:
    """Closed form matched and distances to the target shrinking with eps."""
    err = max(abs(r.value - r.closed_form) for r in rows)
    d = [r.distance for r in rows]
    shrinking = all(b <= a for a, b in zip(d, d[1:]))
    return verdict("mosco_recovery", err if shrinking else float("inf"), MOSCO_TOL * 10,
                   f"distances {['%.3g' % x for x in d]}")


# ------------------------------------------------------------------ sweep


@dataclass(frozen=True)
class CauchyRow:
    eps_a: float
    eps_b: float
    d_t_hat: float
    d_u_hat: float
    d_m_hat: float
    graph_distance: float
    holder_ratio: float     # max over paths of |dM| / (H |dt|^alpha); <= 1 means bound holds


@dataclass(frozen=True)
class SweepTable:
    eps: tuple
    dts: tuple
    rows: tuple
    monitors: tuple
    uniformity: dict
    t_hat_max: tuple = field(default=())

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def decreasing(self, name) -> bool:
        c = self.column(name)
        return all(b <= a for a, b in zip(c, c[1:]))

    @property
    def holder_ok(self) -> bool:
        return all(r.holder_ratio <= 1.0 for r in self.rows)

    def verdicts(self) -> list[Verdict]:
        out = []
        for name in ("d_t_hat", "d_u_hat", "d_m_hat"):
            c = self.column(name)
            worst = max((b - a for a, b in zip(c, c[1:])), default=0.0)
            out.append(verdict(f"sweep_decreasing[{name}]", max(worst, 0.0), 0.0, "largest increase down the ladder"))
        out.append(verdict("sweep_holder", max((r.holder_ratio for r in self.rows), default=0.0), 1.0,
                           "max |dM| / (H |dt|^alpha)"))
        return out


def _union_grid(a: ParametrizedPath, b: ParametrizedPath, step: float):
    top = max(a.T_hat, b.T_hat)
    n = int(math.ceil(top / step)) if step > 0 and top > 0 else 0
    g = np.concatenate([a.clock.tau_knots, b.clock.tau_knots, np.arange(n + 1) * step])
    return np.unique(np.clip(g, 0.0, top))


def cauchy_distances(a: ParametrizedPath, b: ParametrizedPath, geom=None, tau_step=None, alpha=HOLDER_ALPHA):
    """Sup distances of ``t_hat``, ``u_hat``, ``M_hat`` on a common tau-grid.

    The grid contains both clocks' knots, where every compared process is
    piecewise linear, so the sup over it is the sup over all tau.
    """
    step = tau_step if tau_step else min(np.min(np.diff(a.clock.tau_knots), initial=np.inf),
                                         np.min(np.diff(b.clock.tau_knots), initial=np.inf), 1.0)
    grid = _union_grid(a, b, step)
    ta, ua, ma = a.sample(grid)
    tb, ub, mb = b.sample(grid)
    dt = np.abs(ta - tb)
    dm = np.sqrt(np.sum((ma - mb) ** 2, axis=-1))
    ratio = 0.0
    if a.wiener is not None and float(np.max(dm)) > 0:
        delta = float(np.max(dt))
        H = holder_transfer_factor(alpha) * holder_constant(a.wiener, alpha, max_lag_time=delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(dm > 0, dm / (H * dt**alpha), 0.0)
        ratio = float(np.max(r))
    return (float(np.max(dt)), float(np.max(h_norm(ua - ub, geom))), float(np.max(dm)),
            graph_hausdorff(parametrized_graph(a), parametrized_graph(b)), ratio)


def epsilon_sweep(
    spec: ProblemSpec,
    eps_list: Sequence[float],
    dt_list: Sequence[float] | None = None,
    tau_step: float | None = None,
    threads: int | None = None,
    ell: int = 2,
) -> SweepTable:
    """Run every epsilon level with the same (seed, path_index) noise and
    tabulate Cauchy differences between consecutive levels."""
    eps_list = [float(e) for e in eps_list]
    if dt_list is None or len(dt_list) == 0:
        dts = [spec.dt] * len(eps_list)
    elif len(dt_list) == 1:
        dts = [float(dt_list[0])] * len(eps_list)
    elif len(dt_list) == len(eps_list):
        dts = [float(x) for x in dt_list]
    else:
        raise ValueError("dt_list must have one entry or one per epsilon")
    levels, monitors, tmax = [], [], []
    for eps, dt in zip(eps_list, dts):
        s = spec.replace(epsilon=eps, dt=dt)
        paths = run_ensemble(s, threads)
        monitors.append(estimate_monitors(paths, ell, s))
        pp = [rescale_path(p, s, tau_step=tau_step) for p in paths]
        levels.append(pp)
        tmax.append(max(p.T_hat for p in pp))
    rows = []
    for i in range(len(levels) - 1):
        cols = np.array([cauchy_distances(a, b, spec.geometry, tau_step) for a, b in zip(levels[i], levels[i + 1])])
        m = cols.max(axis=0)
        rows.append(CauchyRow(eps_list[i], eps_list[i + 1], *map(float, m)))
    return SweepTable(tuple(eps_list), tuple(dts), tuple(rows), tuple(monitors),
                      check_monitor_uniformity(monitors), tuple(tmax))


# ------------------------------------------------------------------ report


@dataclass(frozen=True)
class DiagnosticsReport:
    energy_pathwise: dict
    energy_expected: tuple = ()
    mosco: tuple = ()
    sweep: SweepTable | None = None
    verdicts: tuple = ()

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def lines(self) -> list[str]:
        out = [f"energy_pathwise mean={self.energy_pathwise.get('mean', 0.0)!r} max={self.energy_pathwise.get('max', 0.0)!r}"]
        for r in self.energy_expected:
            out.append(f"energy_expected tau={r.tau!r} residual={r.residual!r} se={r.mc_se!r} "
                       f"bias={r.bias_bound!r} tol={r.tolerance!r} {'PASS' if r.passed else 'FAIL'}")
        for v in self.verdicts:
            out.append(f"{'PASS' if v.passed else 'FAIL'} {v.name} residual={v.residual!r} tol={v.tolerance!r}"
                       + (f" ({v.note})" if v.note else ""))
        return out


def pathwise_summary(paths: Sequence[ViscousPath]) -> dict:
    r = np.array([energy_residual_pathwise(p) for p in sorted(paths, key=lambda q: q.path_index)])
    return {"mean": float(np.mean(r)), "max": float(np.max(r)), "median": float(np.median(r)), "n_paths": int(r.size)}


__all__ = [
    "Verdict",
    "verdict",
    "energy_residual_pathwise",
    "pathwise_verdict",
    "pathwise_summary",
    "ExpectedEnergyRow",
    "default_checkpoints",
    "energy_residual_expected",
    "MoscoRow",
    "mosco_table",
    "RecoveryRow",
    "recovery_check",
    "recovery_verdict",
    "CauchyRow",
    "SweepTable",
    "cauchy_distances",
    "epsilon_sweep",
    "DiagnosticsReport",
]
