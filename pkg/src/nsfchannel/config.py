"""TOML run configuration: parsing, validation, and data assembly.

Sections (all optional, every key defaulted):

    [domain]    length, dim
    [grid]      n = [n1, n2]
    [params]    mu, lam, alpha, kappa, L
    [pressure]  model = "ideal" | "theta_corrected" | "custom", p0, T0 (+
                b for theta_corrected, pi/e expressions for custom)
    [data]      scale, f, rho_in, and per-face profile tables b, d, g, T1
    [iteration] tol, max_iter, p, inner_tol, rho_floor

Face-profile tables accept the face names plus the grouped selectors
``walls`` (bottom/top), ``ends`` (in/out), and ``all``; a more specific
selector wins.  Every datum is the background value plus ``scale`` times
the profile, so halving ``scale`` halves the perturbation data exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ImportError:  # py310
    import tomli as tomllib

import numpy as np

from .constitutive import FlowParams, GasModel
from .data import ProblemData
from .grid import Channel, Grid
from .profiles import Profile, ProfileError, face_values, parse_profile, \
    volume_vector_values

__all__ = ["ConfigError", "DataSpec", "RunConfig", "load_config",
           "build_problem_data"]

_SECTIONS = {
    "domain": {"length", "dim"},
    "grid": {"n"},
    "params": {"mu", "lam", "alpha", "kappa", "L"},
    "pressure": {"model", "p0", "T0", "b", "pi", "e"},
    "data": {"scale", "f", "rho_in", "b", "d", "g", "T1"},
    "iteration": {"tol", "max_iter", "p", "inner_tol", "rho_floor"},
}

_FACE_SELECTORS = ("in", "out", "bottom", "top", "walls", "ends", "all")
_GROUPS = {"walls": ("bottom", "top"), "ends": ("in", "out"),
           "all": ("in", "out", "bottom", "top")}


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


def _check_keys(section: str, table: dict) -> None:
    extra = set(table) - _SECTIONS[section]
    if extra:
        raise ConfigError(
            f"[{section}] has unknown keys: {', '.join(sorted(extra))}")


def _face_table(name: str, table) -> dict[str, Profile]:
    if not isinstance(table, dict):
        raise ConfigError(f"[data.{name}] must be a table of face = profile")
    out = {}
    for key, text in table.items():
        if key not in _FACE_SELECTORS:
            raise ConfigError(
                f"[data.{name}] selector {key!r} is not one of "
                f"{_FACE_SELECTORS}")
        if not isinstance(text, str):
            raise ConfigError(f"[data.{name}.{key}] must be a profile string")
        try:
            out[key] = parse_profile(text)
        except ProfileError as exc:
            raise ConfigError(f"[data.{name}.{key}]: {exc}") from exc
    return out


def _resolve_face(table: dict[str, Profile], face_name: str) -> Profile:
    if face_name in table:
        return table[face_name]
    for group, members in _GROUPS.items():
        if group == "all":
            continue
        if face_name in members and group in table:
            return table[group]
    return table.get("all", Profile("zero"))


@dataclass(frozen=True)
class DataSpec:
    scale: float
    f: Profile
    rho_in: Profile
    b: dict[str, Profile]
    d: dict[str, Profile]
    g: dict[str, Profile]
    T1: dict[str, Profile]


@dataclass(frozen=True)
class RunConfig:
    channel: Channel
    n: tuple[int, ...]
    params: FlowParams
    gas: GasModel
    data: DataSpec
    tol: float
    max_iter: int
    p: float
    inner_tol: float
    rho_floor: float
    raw: dict


def _gas_from(table: dict) -> GasModel:
    model = table.get("model", "ideal")
    p0 = float(table.get("p0", 1.0))
    T0 = float(table.get("T0", 1.0))
    try:
        if model == "ideal":
            return GasModel.ideal(p0=p0, T0=T0)
        if model == "theta_corrected":
            return GasModel.theta_corrected(p0=p0, T0=T0,
                                            b=float(table.get("b", 0.1)))
        if model == "custom":
            if "pi" not in table or "e" not in table:
                raise ConfigError(
                    "[pressure] model='custom' needs pi and e expressions")
            return GasModel.from_expressions(table["pi"], table["e"],
                                             p0=p0, T0=T0)
    except ValueError as exc:
        raise ConfigError(f"[pressure]: {exc}") from exc
    raise ConfigError(f"[pressure] unknown model {model!r}")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc

    unknown = set(raw) - set(_SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    for section in raw:
        _check_keys(section, raw[section])

    dom = raw.get("domain", {})
    length = float(dom.get("length", 2.0))
    dim = int(dom.get("dim", 2))
    if dim != 2:
        raise ConfigError(f"the solver runs planar channels; dim = {dim}")
    if length <= 0:
        raise ConfigError(f"channel length must be positive, got {length}")

    n = raw.get("grid", {}).get("n", [32, 16])
    if (not isinstance(n, list) or len(n) != dim
            or not all(isinstance(k, int) and k >= 2 for k in n)):
        raise ConfigError(f"[grid] n must be {dim} integers >= 2, got {n!r}")

    par = raw.get("params", {})
    try:
        params = FlowParams(mu=float(par.get("mu", 1.0)),
                            lam=float(par.get("lam", 0.0)),
                            alpha=float(par.get("alpha", 10.0)),
                            kappa=float(par.get("kappa", 50.0)),
                            L=float(par.get("L", 50.0)))
    except ValueError as exc:
        raise ConfigError(f"[params]: {exc}") from exc

    gas = _gas_from(raw.get("pressure", {}))

    it = raw.get("iteration", {})
    p = float(it.get("p", 4.0))
    if p <= 3.0:
        raise ConfigError(
            f"the norm exponent must satisfy p > 3, got p = {p}")
    max_iter = int(it.get("max_iter", 50))
    if max_iter < 1:
        raise ConfigError(f"max_iter must be >= 1, got {max_iter}")

    dat = raw.get("data", {})
    try:
        f_prof = parse_profile(dat.get("f", "zero"))
        rho_prof = parse_profile(dat.get("rho_in", "zero"))
    except ProfileError as exc:
        raise ConfigError(f"[data]: {exc}") from exc
    spec = DataSpec(
        scale=float(dat.get("scale", 1e-3)),
        f=f_prof,
        rho_in=rho_prof,
        b=_face_table("b", dat.get("b", {})),
        d=_face_table("d", dat.get("d", {})),
        g=_face_table("g", dat.get("g", {})),
        T1=_face_table("T1", dat.get("T1", {})),
    )

    return RunConfig(
        channel=Channel(length, dim),
        n=tuple(n),
        params=params,
        gas=gas,
        data=spec,
        tol=float(it.get("tol", 1e-10)),
        max_iter=max_iter,
        p=p,
        inner_tol=float(it.get("inner_tol", 1e-11)),
        rho_floor=float(it.get("rho_floor", 0.1)),
        raw=raw,
    )


def build_problem_data(cfg: RunConfig, grid: Grid) -> ProblemData:
    """Background data plus the configured scaled perturbation profiles."""
    spec = cfg.data
    base = ProblemData.background(grid, cfg.params)
    s = spec.scale

    b = {}
    d = {}
    g = {}
    T1 = {}
    for face in grid.faces:
        name = face.name
        b[name] = tuple(
            datum + s * face_values(_resolve_face(spec.b, name), grid, face)
            for datum in base.b[name])
        d[name] = base.d[name] \
            + s * face_values(_resolve_face(spec.d, name), grid, face)
        g[name] = base.g[name] \
            + s * face_values(_resolve_face(spec.g, name), grid, face)
        T1[name] = base.T1[name] \
            + s * face_values(_resolve_face(spec.T1, name), grid, face)

    try:
        f = s * volume_vector_values(spec.f, grid)
    except ProfileError as exc:
        raise ConfigError(f"[data] f: {exc}") from exc
    rho_in = base.rho_in + s * face_values(spec.rho_in, grid, "in")
    return ProblemData(f=f, b=b, d=d, rho_in=rho_in, g=g, T1=T1)
