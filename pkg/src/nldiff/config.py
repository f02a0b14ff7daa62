"""Run configuration: schema, loading, overrides and object construction."""
from __future__ import annotations

import copy
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

from .evolution import SolverConfig
from .geometry import build_geometry
from .kernel import KernelSpec, build_kernel
from .operator import BoundaryData, Field
from .stochastic import McConfig
from .viscous import ViscousConfig


class ConfigError(ValueError):
    pass


# section -> key -> default (None means "unset")
SCHEMA: dict[str, Any] = {
    "command": None,
    "output_dir": "out",
    "format": "csv",
    "kernel": {"family": "box", "a": -1.0, "b": 1.0, "sigma": None, "tail_tol": 1e-10,
               "table_path": None},
    "domain": {"xl": -1.0, "xr": 1.0},
    "grid": {"h": 0.01},
    "initial": {"kind": "bump", "center": 0.0, "halfwidth": 0.5, "amplitude": 1.0,
                "slope": 0.0, "intercept": 0.0, "value": 0.0, "normalize": False},
    "boundary": {"kind": "zero", "value": 0.0, "slope": 0.0, "intercept": 0.0},
    "solver": {"mode": "explicit", "dt": 0.01, "T": 1.0, "picard_window": 0.25,
               "picard_tol": 1e-10, "picard_max_iter": 200, "picard_quadrature": "left",
               "store_every": 1, "method": "auto"},
    "viscous": {"epsilons": [0.1, 0.01, 0.001], "dt": None, "T": None, "store_every": None},
    "mc": {"particles": 100000, "seed": 0, "mode": "dirichlet", "t_final": None,
           "reflect_jumps": False, "workers": None, "solver_dt": None},
    "analysis": {"etas": [0.05, 0.1], "tol_quad": None, "tol_pos": 1e-12, "max_drift": None,
                 "picard_sup_diff": 1e-6, "picard_ratio": None, "mc_l1_max": None},
}

# value kinds; a leading "?" allows None
TYPES: dict[str, Any] = {
    "command": "?str", "output_dir": "str", "format": "str",
    "kernel": {"family": "str", "a": "num", "b": "num", "sigma": "?num", "tail_tol": "num",
               "table_path": "?str"},
    "domain": {"xl": "num", "xr": "num"},
    "grid": {"h": "num"},
    "initial": {"kind": "str", "center": "num", "halfwidth": "num", "amplitude": "num",
                "slope": "num", "intercept": "num", "value": "num", "normalize": "bool"},
    "boundary": {"kind": "str", "value": "num", "slope": "num", "intercept": "num"},
    "solver": {"mode": "str", "dt": "num", "T": "num", "picard_window": "num",
               "picard_tol": "num", "picard_max_iter": "int", "picard_quadrature": "str",
               "store_every": "int", "method": "str"},
    "viscous": {"epsilons": "list", "dt": "?num", "T": "?num", "store_every": "?int"},
    "mc": {"particles": "int", "seed": "int", "mode": "str", "t_final": "?num",
           "reflect_jumps": "bool", "workers": "?int", "solver_dt": "?num"},
    "analysis": {"etas": "list", "tol_quad": "?num", "tol_pos": "num", "max_drift": "?num",
                 "picard_sup_diff": "num", "picard_ratio": "?num", "mc_l1_max": "?num"},
}


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


_CHECKS = {
    "num": _is_num,
    "int": lambda v: isinstance(v, int) and not isinstance(v, bool),
    "bool": lambda v: isinstance(v, bool),
    "str": lambda v: isinstance(v, str),
    "list": lambda v: isinstance(v, list) and bool(v) and all(_is_num(x) for x in v),
}


def check_types(cfg: dict, types: dict = TYPES, where: str = "") -> None:
    for key, kind in types.items():
        val = cfg[key]
        if isinstance(kind, dict):
            check_types(val, kind, where + key + ".")
            continue
        if kind.startswith("?"):
            if val is None:
                continue
            kind = kind[1:]
        if not _CHECKS[kind](val):
            raise ConfigError(f"config key {where + key!r} must be {kind}, got {val!r}")


COMMANDS = ("solve", "viscous", "mc", "lambda-gamma", "moduli", "positivity",
            "compare mc", "compare picard", "compare viscous")

PRESETS = ("stationary-linear", "gaussian-regularizing", "concentrated-lambda1",
           "offcenter-counterexample", "boundary-layer", "mc-dirichlet", "picard-vs-explicit")


def defaults() -> dict:
    return copy.deepcopy(SCHEMA)


def merge(base: dict, update: dict, where: str = "") -> dict:
    """Overlay ``update`` on ``base``, rejecting keys the schema does not know."""
    out = copy.deepcopy(base)
    for key, val in update.items():
        if key not in out:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(out[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"config key {where + key!r} must be a table")
            out[key] = merge(out[key], val, where + key + ".")
        else:
            if isinstance(val, dict):
                raise ConfigError(f"config key {where + key!r} is not a table")
            out[key] = val
    return out


def read_file(path) -> dict:
    """Load TOML or JSON; an emitted ``manifest.json`` yields its ``config`` block."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    text = p.read_bytes()
    try:
        if p.suffix == ".json":
            data = json.loads(text)
        else:
            data = tomllib.loads(text.decode())
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse {p}: {exc}") from exc
    if isinstance(data, dict) and "config" in data and "hashes" in data:
        data = data["config"]
    if not isinstance(data, dict):
        raise ConfigError(f"{p} does not hold a table")
    return data


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return resources.files("nldiff").joinpath("presets", f"{name}.toml").read_text()


def read_preset(name: str) -> dict:
    return tomllib.loads(preset_text(name))


def parse_value(raw: str):
    try:
        return json.loads(raw)
    except ValueError:
        return raw


def apply_overrides(cfg: dict, pairs) -> dict:
    """Apply ``section.key=value`` strings; values parse as JSON when they can."""
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        patch: dict = {}
        cur = patch
        for p in parts[:-1]:
            cur = cur.setdefault(p, {})
        cur[parts[-1]] = parse_value(raw)
        cfg = merge(cfg, patch)
    return cfg


def resolve(cfg: dict) -> dict:
    """Fill derived defaults and check the cheap invariants."""
    cfg = copy.deepcopy(cfg)
    check_types(cfg)
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be 'csv' or 'json'")
    if cfg["command"] is not None and cfg["command"] not in COMMANDS:
        raise ConfigError(f"unknown command {cfg['command']!r}")
    v, s, mc = cfg["viscous"], cfg["solver"], cfg["mc"]
    for key in ("dt", "T", "store_every"):
        if v[key] is None:
            v[key] = s[key]
    if mc["t_final"] is None:
        mc["t_final"] = s["T"]
    if mc["solver_dt"] is None:
        mc["solver_dt"] = s["dt"]
    return cfg


def kernel_spec(cfg: dict) -> KernelSpec:
    kc = cfg["kernel"]
    fam, tol = kc["family"], float(kc["tail_tol"])
    if fam in ("box", "indicator"):
        return KernelSpec(fam, a=float(kc["a"]), b=float(kc["b"]), tail_tol=tol)
    if fam == "gaussian":
        if kc["sigma"] is None:
            raise ConfigError("kernel.sigma is required for the gaussian family")
        return KernelSpec.gaussian(float(kc["sigma"]), tail_tol=tol)
    if fam == "tabulated":
        if not kc["table_path"]:
            raise ConfigError("kernel.table_path is required for the tabulated family")
        if not Path(kc["table_path"]).exists():
            raise ConfigError(f"kernel table {kc['table_path']} does not exist")
        return KernelSpec.from_table(kc["table_path"], tail_tol=tol)
    raise ConfigError(f"unknown kernel family {fam!r}")


def initial_function(ic: dict):
    kind = ic["kind"]
    if kind == "bump":
        c, w, a = float(ic["center"]), float(ic["halfwidth"]), float(ic["amplitude"])
        if not w > 0:
            raise ConfigError("initial.halfwidth must be positive")
        return lambda x: np.where(np.abs(x - c) < w, a * np.cos(0.5 * math.pi * (x - c) / w) ** 2, 0.0)
    if kind == "linear":
        s, b = float(ic["slope"]), float(ic["intercept"])
        return lambda x: s * x + b
    if kind == "constant":
        v = float(ic["value"])
        return lambda x: np.full_like(x, v)
    if kind == "zero":
        return lambda x: np.zeros_like(x)
    raise ConfigError(f"unknown initial.kind {kind!r}")


def boundary_data(bc: dict) -> BoundaryData:
    kind = bc["kind"]
    if kind == "zero":
        return BoundaryData.zero()
    if kind == "constant":
        return BoundaryData.constant(float(bc["value"]))
    if kind == "affine":
        return BoundaryData.affine(float(bc["slope"]), float(bc["intercept"]))
    raise ConfigError(f"unknown boundary.kind {kind!r}")


class Problem:
    """Objects built from a resolved config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.spec = kernel_spec(cfg)
        self.kernel = build_kernel(self.spec, float(cfg["grid"]["h"]))
        self.geometry = build_geometry((float(cfg["domain"]["xl"]), float(cfg["domain"]["xr"])),
                                       self.kernel)
        u0 = Field.from_function(self.geometry, initial_function(cfg["initial"]))
        if cfg["initial"]["normalize"]:
            mass = u0.closure_values.sum() * self.geometry.h
            if not mass > 0:
                raise ConfigError("cannot normalise initial data without positive mass")
            u0 = Field(self.geometry, u0.values / mass)
        self.u0 = u0
        self.phi = boundary_data(cfg["boundary"])

    def solver_config(self, **changes) -> SolverConfig:
        s = dict(self.cfg["solver"])
        s.update(changes)
        return SolverConfig(dt=float(s["dt"]), T=float(s["T"]), mode=s["mode"],
                            picard_window=float(s["picard_window"]),
                            picard_tol=float(s["picard_tol"]),
                            picard_max_iter=int(s["picard_max_iter"]),
                            picard_quadrature=s["picard_quadrature"],
                            store_every=int(s["store_every"]), method=s["method"])

    def viscous_config(self, epsilon: float) -> ViscousConfig:
        v = self.cfg["viscous"]
        return ViscousConfig(float(epsilon), dt=float(v["dt"]), T=float(v["T"]),
                             store_every=int(v["store_every"]), method=self.cfg["solver"]["method"])

    def mc_config(self) -> McConfig:
        m = self.cfg["mc"]
        return McConfig(particles=int(m["particles"]), t_final=float(m["t_final"]),
                        seed=int(m["seed"]), mode=m["mode"], reflect_jumps=bool(m["reflect_jumps"]),
                        workers=None if m["workers"] is None else int(m["workers"]))
