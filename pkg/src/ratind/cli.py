"""Command-line entry point: simulate, reparam, verify, sweep, oracle.

Exit codes: 0 success, 1 a verdict failed, 2 bad configuration or missing
input, 3 numerical blow-up.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import build_spec, config_digest, load_config
from .diagnostics import (
    energy_residual_expected,
    epsilon_sweep,
    pathwise_summary,
    pathwise_verdict,
)
from .errors import BlowUpError, ConfigError, EnsembleTooSmall, RatindError
from .io import (
    now_utc,
    read_viscous_csv,
    write_manifest,
    write_oracle_csv,
    write_param_csv,
    write_rows,
    write_svg,
    write_viscous_csv,
    write_wiener_csv,
)
from .noise import wiener_from_grid
from .oracles import bruteforce_resolvent, play_operator, skorohod_1d, sweeping_catchup
from .reparam import check_parametrized, qv_context, rescale_path
from .viscous import rebuild_path, run_ensemble

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_BLOWUP = 0, 1, 2, 3
SVG_PATHS = 4


class InputError(Exception):
    pass


def _path_name(i: int) -> str:
    return f"path_{i:05d}.csv"


def _load(args):
    overrides = list(args.set or [])
    if getattr(args, "paths", None) is not None:
        overrides.append(f"run.n_paths={int(args.paths)}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"run.seed={int(args.seed)}")
    return load_config(Path(args.config), overrides)


def _write_config(out: Path, data: dict) -> Path:
    p = out / "config.json"
    p.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return p


def _read_run(run_dir: Path):
    cfg = run_dir / "config.json"
    if not cfg.is_file():
        raise InputError(f"run directory {run_dir} has no config.json")
    data = json.loads(cfg.read_text())
    spec = build_spec(data)
    files = sorted((run_dir / "paths").glob("path_*.csv"))
    if not files:
        raise InputError(f"run directory {run_dir} has no path CSVs")
    paths = []
    for f in files:
        idx = int(f.stem.split("_")[1])
        tab = read_viscous_csv(f)
        paths.append(rebuild_path(spec, idx, tab["t"], tab["u"], tab["d"], tab["v"]))
    return data, spec, paths


def _rescale_all(spec, paths, tau_step):
    out = []
    for p in paths:
        w = None
        if spec.noise.kind != "off":
            w = wiener_from_grid(p.t_grid, spec.noise.m, spec.seed, p.path_index)
        out.append(rescale_path(p, spec, w, tau_step))
    return out


# ------------------------------------------------------------------ commands


def cmd_simulate(args) -> int:
    started = now_utc()
    rc = _load(args)
    spec = rc.spec
    out = Path(args.out)
    (out / "paths").mkdir(parents=True, exist_ok=True)
    paths = run_ensemble(spec, args.threads)
    files = [_write_config(out, rc.data)]
    for p in paths:
        files.append(write_viscous_csv(out / "paths" / _path_name(p.path_index), p))
    rows = [[p.path_index, p.T, p.T_hat, float(p.arc[-1]), float(np.max(np.abs(p.ledger.residual)))]
            + [float(x) for x in p.u[-1]] for p in paths]
    files.append(write_rows(out / "summary.csv",
                            ["path", "T", "T_hat", "arc", "max_abs_residual"] + [f"u_T_{i + 1}" for i in range(spec.dim)],
                            rows))
    if args.dump_noise and spec.noise.kind != "off":
        ws = [wiener_from_grid(p.t_grid, spec.noise.m, spec.seed, p.path_index) for p in paths]
        files.append(write_wiener_csv(out / "noise.csv", ws))
    if args.svg:
        colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"]
        series = [(p.t_grid, p.u[:, 0], colours[i % 4]) for i, p in enumerate(paths[:SVG_PATHS])]
        files.append(write_svg(out / "paths.svg", series, "u_1 against t"))
    write_manifest(out, command="simulate", config_digest=rc.digest, seed=spec.seed, overrides=rc.overrides,
                   files=files, started=started)
    s = pathwise_summary(paths)
    print(f"simulated {len(paths)} path(s), K={spec.n_steps}, max ledger residual {s['max']!r} -> {out}")
    return EXIT_OK


def cmd_reparam(args) -> int:
    started = now_utc()
    run = Path(args.run)
    data, spec, paths = _read_run(run)
    out = Path(args.out) if args.out else run / "param"
    out.mkdir(parents=True, exist_ok=True)
    pps = _rescale_all(spec, paths, args.tau_step)
    files = [write_param_csv(out / f"param_{p.path_index:05d}.csv", p, spec.geometry) for p in pps]
    if args.svg:
        series = [(p.t_hat, p.u_hat[:, 0], "#1f77b4") for p in pps[:SVG_PATHS]]
        files.append(write_svg(out / "graph.svg", series, "parametrized graph", xlabel="t_hat", ylabel="u_hat_1"))
    write_manifest(out, command="reparam", config_digest=config_digest(data), seed=spec.seed, overrides=(),
                   files=files, started=started, extra={"tau_step": args.tau_step or spec.default_tau_step})
    print(f"rescaled {len(pps)} path(s); min speed_time {min(float(np.min(p.speed_time)) for p in pps)!r} -> {out}")
    return EXIT_OK


def _verify_run(run: Path, args, lines: list, rows: list) -> bool:
    data, spec, paths = _read_run(run)
    pps = _rescale_all(spec, paths, args.tau_step)
    noisy = spec.noise.kind != "off"
    ctx = None
    if noisy and len(pps) >= 2:
        tau = float(np.mean([p.T_hat for p in pps])) / 2
        ctx = qv_context(pps, tau, args.qv_step or 50 * spec.dt)
    ok = True
    for p in pps:
        rep = check_parametrized(p, spec, ctx)
        for c in rep.conditions:
            rows.append([str(run), p.path_index, c.name, c.residual, c.tolerance, "PASS" if c.passed else "FAIL"])
            if not c.passed:
                lines.append(f"FAIL {run} path {p.path_index} ({c.name}) residual={c.residual!r} tol={c.tolerance!r}")
        ok &= rep.passed
    for p in paths:
        v = pathwise_verdict(p, noisy)
        if v is not None:
            rows.append([str(run), p.path_index, v.name, v.residual, v.tolerance, "PASS" if v.passed else "FAIL"])
            if not v.passed:
                lines.append(f"FAIL {run} {v.name} residual={v.residual!r} tol={v.tolerance!r}")
            ok &= v.passed
    s = pathwise_summary(paths)
    lines.append(f"{run}: {len(paths)} path(s), pathwise ledger residual mean={s['mean']!r} max={s['max']!r}")
    if len(pps) >= args.min_paths:
        for r in energy_residual_expected(pps, spec, min_paths=args.min_paths):
            tag = "PASS" if r.passed else "FAIL"
            rows.append([str(run), -1, f"energy_expected[tau={r.tau!r}]", r.residual, r.tolerance, tag])
            lines.append(f"{tag} {run} energy_expected tau={r.tau!r} residual={r.residual!r} "
                         f"3se+bias={r.tolerance!r} martingale mean {r.mart_mean!r} (se {r.mart_se!r})")
            ok &= r.passed
    else:
        lines.append(f"{run}: expected-energy check skipped (needs >= {args.min_paths} paths)")
    return ok


def cmd_verify(args) -> int:
    lines, rows = [], []
    ok = True
    for run in args.run:
        ok &= _verify_run(Path(run), args, lines, rows)
    out = Path(args.out) if args.out else Path(args.run[0])
    out.mkdir(parents=True, exist_ok=True)
    write_rows(out / "verdicts.csv", ["run", "path", "condition", "residual", "tolerance", "verdict"], rows)
    lines.append("ALL PASS" if ok else "VERDICT FAILURE")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK if ok else EXIT_FAIL


def _float_list(text):
    return [float(x) for x in text.replace(" ", "").split(",") if x]


def cmd_sweep(args) -> int:
    started = now_utc()
    rc = _load(args)
    spec = rc.spec
    eps = _float_list(args.eps_list) if args.eps_list else list(rc.sweep.eps_list)
    dts = _float_list(args.dt_list) if args.dt_list else list(rc.sweep.dt_list)
    if len(eps) < 2:
        raise InputError("sweep needs at least two epsilon values (--eps-list or [sweep].eps_list)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tab = epsilon_sweep(spec, eps, dts or None, args.tau_step, args.threads)
    files = [_write_config(out, rc.data)]
    files.append(write_rows(out / "sweep.csv",
                            ["eps_a", "eps_b", "d_t_hat", "d_u_hat", "d_m_hat", "graph_distance", "holder_ratio"],
                            [[r.eps_a, r.eps_b, r.d_t_hat, r.d_u_hat, r.d_m_hat, r.graph_distance, r.holder_ratio]
                             for r in tab.rows]))
    mrows = [[m.epsilon, g, val] for m in tab.monitors for g, val in m.groups.items()]
    files.append(write_rows(out / "monitors.csv", ["epsilon", "group", "value"], mrows))
    write_manifest(out, command="sweep", config_digest=rc.digest, seed=spec.seed, overrides=rc.overrides,
                   files=files, started=started, extra={"eps_list": eps, "dt_list": list(tab.dts)})
    vs = tab.verdicts()
    for r in tab.rows:
        print(f"eps {r.eps_a!r} -> {r.eps_b!r}: t_hat {r.d_t_hat!r}  u_hat {r.d_u_hat!r}  M_hat {r.d_m_hat!r}  "
              f"holder ratio {r.holder_ratio!r}")
    for v in vs:
        print(f"{'PASS' if v.passed else 'FAIL'} {v.name} residual={v.residual!r} tol={v.tolerance!r}")
    for g, (ratio, good) in tab.uniformity.items():
        print(f"{'ok  ' if good else 'WARN'} monitor {g}: max/largest-eps ratio {ratio!r} (bound 2)")
    return EXIT_OK if all(v.passed for v in vs) else EXIT_FAIL


def cmd_oracle(args) -> int:
    started = now_utc()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    if args.kind == "resolvent":
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        from .dissipation import resolvent_shrink
        rows = []
        for case in range(args.cases):
            n = int(rng.integers(1, 5))
            g = rng.normal(size=n) * 2.0
            eps = float(10 ** rng.uniform(-3, 0))
            err = float(np.linalg.norm(bruteforce_resolvent(g, eps) - resolvent_shrink(g, eps)))
            rows.append([case, n, eps, err, "bruteforce_resolvent"])
        files.append(write_rows(out / "oracle_resolvent.csv", ["case", "n", "epsilon", "error", "method"], rows))
        print(f"max resolvent error over {args.cases} cases: {max(r[3] for r in rows)!r}")
        digest, seed, overrides = "", args.seed or 0, ()
    else:
        if not args.config:
            raise InputError(f"oracle {args.kind} needs --config")
        rc = _load(args)
        spec = rc.spec
        t = spec.time_grid()
        g = spec.forcing(t)
        if args.kind == "play":
            res = play_operator(g[:, 0], spec.u0[0], 1.0, t)
        elif args.kind == "sweeping":
            res = sweeping_catchup(g, spec.u0, spec.potential.stiffness, spec.geometry, t)
        else:
            w = wiener_from_grid(t, spec.noise.m, spec.seed, 0)
            sig = float(spec.noise.sigma[0, 0]) if spec.noise.kind != "off" else 0.0
            res = skorohod_1d(g[:, 0] + sig * w.cumulative[:, 0], -1.0, 1.0, spec.u0[0], t)
        files.append(write_oracle_csv(out / f"oracle_{args.kind}.csv", res))
        files.append(_write_config(out, rc.data))
        digest, seed, overrides = rc.digest, spec.seed, rc.overrides
        print(f"{res.method}: {len(t)} nodes -> {out}")
    write_manifest(out, command=f"oracle {args.kind}", config_digest=digest, seed=seed, overrides=overrides,
                   files=files, started=started)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ratind", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"ratind {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="TOML configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override, e.g. run.epsilon=0.01")
        p.add_argument("--paths", type=int, help="number of paths (run.n_paths)")
        p.add_argument("--seed", type=int, help="master seed (run.seed)")
        p.add_argument("--threads", type=int, help="worker threads (default: RATIND_THREADS or 1)")

    p = sub.add_parser("simulate", help="simulate the viscous problem")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--svg", action="store_true")
    p.add_argument("--dump-noise", action="store_true", help="also write the Wiener paths")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reparam", help="arc-length rescaling of a simulated run")
    p.add_argument("--run", required=True)
    p.add_argument("--out")
    p.add_argument("--tau-step", type=float)
    p.add_argument("--svg", action="store_true")
    p.set_defaults(func=cmd_reparam)

    p = sub.add_parser("verify", help="check identities on one or more runs")
    p.add_argument("--run", required=True, action="append")
    p.add_argument("--out")
    p.add_argument("--tau-step", type=float)
    p.add_argument("--qv-step", type=float, help="tau step for the QV estimate (default 50 dt)")
    p.add_argument("--min-paths", type=int, default=100, help="ensemble size needed for the expected-energy check")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="epsilon sweep with common noise")
    common(p)
    p.add_argument("--out", required=True)
    p.add_argument("--eps-list")
    p.add_argument("--dt-list")
    p.add_argument("--tau-step", type=float)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="run a reference solver")
    p.add_argument("kind", choices=("play", "sweeping", "skorohod", "resolvent"))
    common(p, config_required=False)
    p.add_argument("--out", required=True)
    p.add_argument("--cases", type=int, default=200)
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        where = f" (line {e.line}, column {e.column})" if e.line is not None else ""
        key = f" [key: {e.key}]" if e.key else ""
        print(f"error: {e}{key}{where}", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, FileNotFoundError, EnsembleTooSmall) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except BlowUpError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BLOWUP
    except RatindError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
