"""CSV schemas, run manifests and minimal SVG output.

Floats are written with ``repr`` (shortest round-trip form), so reading a
file back reproduces the arrays bit for bit and reruns give equal bytes.
"""
from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    return repr(float(x))


def viscous_header(n: int) -> list[str]:
    cols = ["k", "t"]
    for name in ("u", "ud", "d", "v"):
        cols += [f"{name}_{i + 1}" for i in range(n)]
    return cols + ["arc", "phi", "residual"]


def write_viscous_csv(path, vp) -> Path:
    """One row per time node; the drift columns are blank on the last row."""
    path = Path(path)
    K = vp.n_steps
    n = vp.u.shape[1]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(viscous_header(n))
        for k in range(K + 1):
            row = [str(k), fmt(vp.t_grid[k])]
            row += [fmt(x) for x in vp.u[k]]
            row += [fmt(x) for x in vp.u_d[k]]
            row += [fmt(x) for x in vp.drift[k]] if k < K else [""] * n
            row += [fmt(x) for x in vp.v[k]]
            row += [fmt(vp.arc[k]), fmt(vp.ledger.phi_t[k]), fmt(vp.ledger.residual[k])]
            w.writerow(row)
    return path


def read_viscous_csv(path) -> dict:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    n = sum(1 for c in header if c.startswith("u_"))
    col = {c: i for i, c in enumerate(header)}

    def block(name, upto=None):
        sl = body if upto is None else body[:upto]
        return np.array([[float(r[col[f"{name}_{i + 1}"]]) for i in range(n)] for r in sl]).reshape(len(sl), n)

    K = len(body) - 1
    return {
        "k": np.array([int(r[col["k"]]) for r in body]),
        "t": np.array([float(r[col["t"]]) for r in body]),
        "u": block("u"),
        "ud": block("ud"),
        "d": block("d", K),
        "v": block("v"),
        "arc": np.array([float(r[col["arc"]]) for r in body]),
        "phi": np.array([float(r[col["phi"]]) for r in body]),
        "residual": np.array([float(r[col["residual"]]) for r in body]),
    }


def param_header(n: int) -> list[str]:
    return (["j", "tau", "t_hat", "speed_time", "speed_state"]
            + [f"u_hat_{i + 1}" for i in range(n)] + [f"v_hat_{i + 1}" for i in range(n)] + ["fenchel_gap"])


def write_param_csv(path, pp, geom=None) -> Path:
    path = Path(path)
    n = pp.u_hat.shape[1]
    gaps = np.atleast_1d(pp.fenchel_gaps(geom))
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(param_header(n))
        for j in range(pp.tau_grid.size):
            w.writerow([str(j), fmt(pp.tau_grid[j]), fmt(pp.t_hat[j]), fmt(pp.speed_time[j]), fmt(pp.speed_state[j])]
                       + [fmt(x) for x in pp.u_hat[j]] + [fmt(x) for x in pp.v_hat[j]] + [fmt(gaps[j])])
    return path


def read_table(path) -> dict:
    """Generic numeric CSV reader: column name -> float array (blanks as nan)."""
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    out = {}
    for i, c in enumerate(header):
        try:
            out[c] = np.array([float(r[i]) if r[i] != "" else np.nan for r in body])
        except ValueError:
            out[c] = [r[i] for r in body]
    return out


def write_wiener_csv(path, wieners) -> Path:
    path = Path(path)
    m = wieners[0].cumulative.shape[1] if wieners else 1
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "k", "t"] + [f"W_{c + 1}" for c in range(m)])
        for wp in wieners:
            for k in range(wp.t_grid.size):
                w.writerow([str(wp.path_index), str(k), fmt(wp.t_grid[k])] + [fmt(x) for x in wp.cumulative[k]])
    return path


def write_oracle_csv(path, res) -> Path:
    path = Path(path)
    u = np.asarray(res.u_ref, float)
    if u.ndim == 1:
        u = u[:, None]
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t"] + [f"u_{i + 1}" for i in range(u.shape[1])] + ["method"])
        for k in range(u.shape[0]):
            w.writerow([str(k), fmt(res.t_grid[k])] + [fmt(x) for x in u[k]] + [res.method])
    return path


def write_rows(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else str(x) for x in r])
    return path


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def now_utc() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out_dir, *, command, config_digest, seed, overrides, files, started, extra=None) -> Path:
    out_dir = Path(out_dir)
    inventory = {str(Path(f).relative_to(out_dir)): sha256_file(f) for f in sorted(map(str, files))}
    doc = {
        "tool": "ratind",
        "version": __version__,
        "command": command,
        "config_digest": config_digest,
        "seed": seed,
        "overrides": list(overrides),
        "started": started,
        "finished": now_utc(),
        "outputs": inventory,
    }
    if extra:
        doc.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def write_svg(path, series, title="", xlabel="t", ylabel="u", width=640, height=400) -> Path:
    """Polylines with a box and axis labels; ``series`` is a list of (x, y, colour)."""
    path = Path(path)
    xs = np.concatenate([np.asarray(s[0], float) for s in series])
    ys = np.concatenate([np.asarray(s[1], float) for s in series])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    x1 = x1 if x1 > x0 else x0 + 1.0
    y1 = y1 if y1 > y0 else y0 + 1.0
    m = 40
    sx = lambda x: m + (x - x0) / (x1 - x0) * (width - 2 * m)  # noqa: E731
    sy = lambda y: height - m - (y - y0) / (y1 - y0) * (height - 2 * m)  # noqa: E731
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" fill="none" stroke="#888"/>',
        f'<text x="{width / 2}" y="{m / 2}" text-anchor="middle" font-size="14">{title}</text>',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">{xlabel} [{x0:.3g}, {x1:.3g}]</text>',
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})">{ylabel} [{y0:.3g}, {y1:.3g}]</text>',
    ]
    for x, y, colour in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        step = max(1, x.size // 4000)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x[::step], y[::step]))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.2" points="{pts}"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
