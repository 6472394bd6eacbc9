"""Experiment configuration: JSON schema, validation, and parsed handles.

A configuration is a flat JSON object; expressions are strings in the
expression grammar.  Parsing is eager so validation errors surface before any
computation starts.  The canonical serialization (sorted keys, no whitespace)
is hashed into every output artifact.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import nonlinearity as nl
from .expressions import HoldAll, parse
from .functionals import DistributedIntegrand, ObjectiveSpec, box_region, disk_region

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "config_hash"]


class ConfigError(ValueError):
    pass


_BETA_KINDS = {
    "zero": lambda p: nl.zero(),
    "linear": lambda p: nl.linear(p.get("a", 1.0)),
    "relu": lambda p: nl.relu(p.get("c", 0.0)),
    "pwl": lambda p: nl.pwl(p["breakpoints"], p["slopes"]),
    "cubic": lambda p: nl.cubic(),
}


def _parse_region(obj, what):
    try:
        if obj["kind"] == "disk":
            return disk_region(obj["center"], obj["radius"])
        if obj["kind"] == "box":
            return box_region(obj["bounds"])
    except KeyError as exc:
        raise ConfigError(f"{what}: missing field {exc}") from None
    raise ConfigError(f"{what}: unknown region kind {obj.get('kind')!r}")


@dataclass
class ExperimentConfig:
    raw: dict
    g: object
    h: object
    f: object
    beta: object
    grid_n: int
    box: HoldAll
    lambdas: list
    r_list: list
    omega: dict | None
    objective: ObjectiveSpec | None
    directions: dict
    gates: dict
    tolerances: dict
    out_dir: str

    @property
    def sha(self):
        return config_hash(self.raw)


def config_hash(raw):
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def load_config(obj):
    """Validate and parse a configuration dict (or JSON file path)."""
    if isinstance(obj, (str,)):
        with open(obj, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ConfigError("configuration must be a JSON object")
    raw = obj

    def need(key):
        if key not in raw:
            raise ConfigError(f"missing required field {key!r}")
        return raw[key]

    try:
        g = parse(need("g"), label="g", require_smooth=True)
        h = parse(need("h"), label="h", require_smooth=True)
        f = parse(raw.get("f", "0"), label="f")
    except Exception as exc:
        raise ConfigError(f"expression error: {exc}") from exc

    beta_obj = raw.get("beta", {"kind": "relu", "c": 0.0})
    kind = beta_obj.get("kind")
    if kind not in _BETA_KINDS:
        raise ConfigError(f"unknown beta kind {kind!r}")
    try:
        beta = _BETA_KINDS[kind](beta_obj)
    except Exception as exc:
        raise ConfigError(f"beta: {exc}") from exc

    grid_n = int(raw.get("grid_n", 129))
    if grid_n < 16:
        raise ConfigError("grid_n must be at least 16")
    box_vals = raw.get("box", [-2.0, 2.0, -2.0, 2.0])
    if len(box_vals) != 4:
        raise ConfigError("box must be [xmin, xmax, ymin, ymax]")
    try:
        box = HoldAll(*map(float, box_vals))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    lambdas = [float(x) for x in raw.get("lambdas", [0.08, 0.04, 0.02, 0.01])]
    if any(x <= 0 for x in lambdas):
        raise ConfigError("lambdas must be positive")
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ConfigError("lambdas must be strictly decreasing")

    r_list = [float(r) for r in raw.get("r_list", [1, 2, 4])]
    if any(r < 1 for r in r_list):
        raise ConfigError("r_list entries must be >= 1")

    omega = raw.get("omega")
    if omega is not None:
        _parse_region(omega, "omega")  # validates shape

    objective = None
    if "objective" in raw:
        o = raw["objective"]
        okind = o.get("kind")
        if okind == "tracking_h2":
            objective = ObjectiveSpec(
                kind="tracking_h2",
                E=_parse_region(o["E"], "objective.E"),
                y_d=parse(o.get("y_d", "0"), label="y_d"),
                obs_points=np.asarray(o.get("obs_points", []), dtype=float).reshape(-1, 2),
            )
        elif okind == "distributed":
            jo = o.get("J", {"kind": "zero"})
            objective = ObjectiveSpec(
                kind="distributed",
                J=DistributedIntegrand(jo.get("kind", "zero"), float(jo.get("y_d", 0.0))),
                psi=parse(o.get("psi", "0"), label="psi"),
            )
        else:
            raise ConfigError(f"unknown objective kind {okind!r}")

    directions = {"count": 8, "seed": 0}
    directions.update(raw.get("directions", {}))
    gates = {"kind": "slopes", "slope_min": 0.9, "m_ratio_max": 0.1}
    gates.update(raw.get("gates", {}))
    if gates["kind"] not in ("slopes", "monotone"):
        raise ConfigError(f"unknown gates kind {gates['kind']!r}")
    tolerances = {"trace_tol": 1e-9, "solver_tol": 1e-10, "admissibility_n": 256}
    tolerances.update(raw.get("tolerances", {}))

    return ExperimentConfig(
        raw=raw, g=g, h=h, f=f, beta=beta, grid_n=grid_n, box=box,
        lambdas=lambdas, r_list=r_list, omega=omega, objective=objective,
        directions=directions, gates=gates, tolerances=tolerances,
        out_dir=raw.get("out_dir", "out"),
    )
