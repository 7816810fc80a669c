"""TOML configuration: schema, dotted overrides, and ProblemSpec construction."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:  # Python < 3.11
    import tomli

from .energy import PotentialSpec
from .errors import ConfigError
from .geometry import SpaceGeometry
from .model import Forcing, ProblemSpec
from .noise import NoiseSpec

SCHEMA: dict[str, tuple[str, ...]] = {
    "geometry": ("dim", "h_weights", "v_weights", "p"),
    "potential": ("kind", "stiffness", "well_param", "coeffs", "c_B", "C_B", "c_B_prime"),
    "noise": ("kind", "sigma", "lip_u", "holder_t", "nu", "modulation_amp", "modulation_freq"),
    "forcing": ("kind", "offset", "rate", "coeffs", "radius", "freq", "ramp_time"),
    "run": ("u0", "T", "epsilon", "dt", "n_paths", "seed", "midpoint_refine", "tau_step"),
    "sweep": ("eps_list", "dt_list"),
}
REQUIRED_RUN = ("u0", "T", "epsilon", "dt")


@dataclass(frozen=True)
class SweepConfig:
    eps_list: tuple = ()
    dt_list: tuple = ()


@dataclass(frozen=True, eq=False)
class RunConfig:
    spec: ProblemSpec
    sweep: SweepConfig
    data: dict
    overrides: tuple = ()
    source: str | None = None
    raw_sha256: str | None = None

    @property
    def digest(self) -> str:
        return config_digest(self.data)


def config_digest(data: dict) -> str:
    text = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def parse_toml(text: str) -> dict:
    try:
        return tomli.loads(text)
    except tomli.TOMLDecodeError as e:
        raise ConfigError(f"config parse error: {e}", line=getattr(e, "lineno", None),
                          column=getattr(e, "colno", None)) from e


def validate_keys(data: dict) -> None:
    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"unknown config section {section!r}", key=section)
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a table", key=section)
        for k in body:
            if k not in SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{k}", key=f"{section}.{k}")


def _parse_value(text: str):
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def resolve_key(key: str) -> tuple[str, str]:
    """``section.key`` or a bare key that belongs to exactly one section."""
    if "." in key:
        section, name = key.split(".", 1)
        if section not in SCHEMA or name not in SCHEMA[section]:
            raise ConfigError(f"unknown config key {key}", key=key)
        return section, name
    owners = [s for s, keys in SCHEMA.items() if key in keys]
    if len(owners) != 1:
        why = "unknown" if not owners else f"ambiguous (in {', '.join(owners)})"
        raise ConfigError(f"{why} config key {key}", key=key)
    return owners[0], key


def apply_overrides(data: dict, overrides) -> dict:
    out = {s: dict(b) for s, b in data.items()}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", key=item)
        key, value = item.split("=", 1)
        section, name = resolve_key(key.strip())
        out.setdefault(section, {})[name] = _parse_value(value.strip())
    return out


def _vec(x, n, what):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full(n, float(a))
    if a.shape != (n,):
        raise ConfigError(f"{what} must have {n} entries", key=what)
    return a


def _square(x, n, what):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        return float(a) * np.eye(n)
    if a.ndim == 1 and a.size == n:
        return np.diag(a)
    if a.shape != (n, n):
        raise ConfigError(f"{what} must be a scalar, a length-{n} diagonal or an {n}x{n} matrix", key=what)
    return a


def build_spec(data: dict) -> ProblemSpec:
    validate_keys(data)
    run = data.get("run", {})
    for k in REQUIRED_RUN:
        if k not in run:
            raise ConfigError(f"missing required key run.{k}", key=f"run.{k}")
    u0 = np.atleast_1d(np.asarray(run["u0"], dtype=float))
    geo = data.get("geometry", {})
    n = int(geo.get("dim", u0.size))
    if u0.size == 1 and n > 1:
        u0 = np.full(n, float(u0[0]))
    try:
        geom = SpaceGeometry(
            n,
            None if "h_weights" not in geo else _vec(geo["h_weights"], n, "geometry.h_weights"),
            None if "v_weights" not in geo else _vec(geo["v_weights"], n, "geometry.v_weights"),
            float(geo.get("p", 2.0)),
        )
    except ValueError as e:
        if isinstance(e, ConfigError):
            raise
        raise ConfigError(str(e), key="geometry") from e

    pot = data.get("potential", {"kind": "quadratic"})
    kind = pot.get("kind", "quadratic")
    if kind == "quadratic":
        potential = PotentialSpec("quadratic", n, stiffness=_square(pot.get("stiffness", 1.0), n, "potential.stiffness"),
                                  c_B=pot.get("c_B"), C_B=pot.get("C_B"))
    elif kind == "double_well":
        potential = PotentialSpec("double_well", n, well_param=float(pot.get("well_param", 1.0)),
                                  c_B=pot.get("c_B"), C_B=pot.get("C_B"), c_B_prime=pot.get("c_B_prime"))
    else:
        potential = PotentialSpec(kind, n, coeffs=pot.get("coeffs"), c_B=pot.get("c_B"), C_B=pot.get("C_B"),
                                  c_B_prime=pot.get("c_B_prime"))

    nz = data.get("noise", {"kind": "off"})
    nkind = nz.get("kind", "off")
    if nkind == "off":
        noise = NoiseSpec.off(n, 1)
    else:
        sigma = np.asarray(nz.get("sigma", 1.0), dtype=float)
        if sigma.ndim < 2:
            sigma = _square(sigma, n, "noise.sigma")
        default_lip = float(np.linalg.norm(sigma))
        noise = NoiseSpec(nkind, sigma, lip_u=float(nz.get("lip_u", default_lip)),
                          holder_t=float(nz.get("holder_t", 1.0)), nu=float(nz.get("nu", 1.0)),
                          modulation_amp=float(nz.get("modulation_amp", 0.0)),
                          modulation_freq=float(nz.get("modulation_freq", 1.0)))

    fc = data.get("forcing", {"kind": "none"})
    fkind = fc.get("kind", "none")
    forcing = Forcing(
        fkind, n,
        offset=None if "offset" not in fc else _vec(fc["offset"], n, "forcing.offset"),
        rate=None if "rate" not in fc else _vec(fc["rate"], n, "forcing.rate"),
        coeffs=fc.get("coeffs"),
        radius=float(fc.get("radius", 1.0)), freq=float(fc.get("freq", 1.0)),
        ramp_time=float(fc.get("ramp_time", 0.0)),
    ) if fkind != "none" else None
    return ProblemSpec(
        geometry=geom, potential=potential, noise=noise, u0=u0,
        T=float(run["T"]), epsilon=float(run["epsilon"]), dt=float(run["dt"]),
        forcing=forcing, n_paths=int(run.get("n_paths", 1)), seed=int(run.get("seed", 0)),
        midpoint_refine=bool(run.get("midpoint_refine", False)),
        tau_step=float(run["tau_step"]) if "tau_step" in run else None,
    )


def load_config(source, overrides=()) -> RunConfig:
    """Load from a path or a TOML string (anything containing a newline or '=')."""
    path = None
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and "=" not in source):
        path = Path(source)
        if not path.is_file():
            raise FileNotFoundError(f"config file not found: {path}")
        text = path.read_text()
    else:
        text = str(source)
    data = parse_toml(text)
    validate_keys(data)
    data = apply_overrides(data, overrides)
    spec = build_spec(data)
    sw = data.get("sweep", {})
    sweep = SweepConfig(tuple(float(x) for x in sw.get("eps_list", ())), tuple(float(x) for x in sw.get("dt_list", ())))
    return RunConfig(spec, sweep, data, tuple(overrides or ()), str(path) if path else None,
                     hashlib.sha256(text.encode()).hexdigest())


__all__ = ["SCHEMA", "RunConfig", "SweepConfig", "load_config", "build_spec", "apply_overrides",
           "resolve_key", "parse_toml", "config_digest"]
