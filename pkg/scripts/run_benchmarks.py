#!/usr/bin/env python3
"""Print the benchmark tables (rates, sweeps, oracle agreement) without writing run directories."""
from __future__ import annotations

import argparse
import time
from pathlib import Path

import numpy as np

from ratind.config import load_config
from ratind.diagnostics import energy_residual_pathwise, epsilon_sweep, mosco_table
from ratind.oracles import play_operator, sweeping_catchup
from ratind.errors import JumpDetected
from ratind.reparam import invert_parametrization, rescale_path
from ratind.viscous import run_ensemble, simulate_path

CONFIGS = Path(__file__).resolve().parent / "configs"


def ledger_rate(name, dts):
    rc = load_config(CONFIGS / f"{name}.toml")
    res = [energy_residual_pathwise(simulate_path(rc.spec.replace(dt=dt))) for dt in dts]
    ratios = [a / b for a, b in zip(res, res[1:])]
    print(f"{name}: ledger residual {['%.3e' % r for r in res]}  ratios {['%.3f' % r for r in ratios]}")


def play_agreement():
    rc = load_config(CONFIGS / "play_quadratic.toml")
    p = simulate_path(rc.spec)
    ref = play_operator(p.forcing[:, 0], rc.spec.u0[0], 1.0, p.t_grid)
    print(f"play: sup |u - u_play| = {np.max(np.abs(p.u[:, 0] - ref.u_ref)):.3e}")


def sweeping_agreement():
    rc = load_config(CONFIGS / "circle_sweeping.toml")
    p = simulate_path(rc.spec)
    ref = sweeping_catchup(p.forcing, rc.spec.u0, t_grid=p.t_grid)
    print(f"sweeping: sup |u - u_catchup| = {np.max(np.linalg.norm(p.u - ref.u_ref, axis=1)):.3e}")


def jump_report():
    rc = load_config(CONFIGS / "double_well_jump.toml")
    pp = rescale_path(simulate_path(rc.spec), rc.spec)
    try:
        invert_parametrization(pp)
        print("double well: no jump detected")
    except JumpDetected as e:
        print(f"double well: {e}")


def sweep(threads):
    rc = load_config(CONFIGS / "sweep_quadratic.toml")
    tab = epsilon_sweep(rc.spec, rc.sweep.eps_list, rc.sweep.dt_list, rc.spec.tau_step, threads)
    print("eps_a      eps_b      d_t_hat     d_u_hat     d_m_hat     holder")
    for r in tab.rows:
        print(f"{r.eps_a:<10.3g} {r.eps_b:<10.3g} {r.d_t_hat:<11.3e} {r.d_u_hat:<11.3e} {r.d_m_hat:<11.3e} "
              f"{r.holder_ratio:.3f}")
    for v in tab.verdicts():
        print(f"  {'PASS' if v.passed else 'FAIL'} {v.name}")


def mosco():
    rows = mosco_table([0.0, 0.5, 0.9, 0.99], [1e-1, 1e-2, 1e-3])
    print(f"mosco: max |gap - eps F(r)| = {max(r.error for r in rows):.2e} over {len(rows)} cells")


def ensemble_timing(threads):
    rc = load_config(CONFIGS / "additive_quadratic.toml")
    t0 = time.perf_counter()
    paths = run_ensemble(rc.spec, threads)
    print(f"additive ensemble: {len(paths)} paths in {time.perf_counter() - t0:.2f} s ({threads or 1} thread(s))")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--skip-sweep", action="store_true")
    a = ap.parse_args()
    ledger_rate("play_quadratic", [1e-3, 5e-4, 2.5e-4])
    ledger_rate("smooth_quadratic", [1e-3, 5e-4, 2.5e-4])
    play_agreement()
    sweeping_agreement()
    jump_report()
    mosco()
    ensemble_timing(a.threads)
    if not a.skip_sweep:
        sweep(a.threads)


if __name__ == "__main__":
    main()
