"""Run configuration: JSON schema, defaults and dot-path overrides."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .model import ModelParams, TimeGrid, TraderType, TypeDistribution, make_grid
from .simulator import MEASURES, SimConfig
from .verification import SuiteSettings

FIGURES = ("fig1", "fig2", "fig3", "fig4")

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_INT_POS = {"type": "integer", "minimum": 1}

_TYPE_SCHEMA = {
    "type": "object",
    "properties": {"k_I": _POS, "sigma_I": _NONNEG, "a_I": _POS, "phi_I": _POS},
    "required": ["k_I", "sigma_I", "a_I", "phi_I"],
    "additionalProperties": False,
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "k_alpha": _NUM, "sigma_alpha": _NUM, "sigma_S": _NUM, "b": _NUM,
                "eta_I": _NUM, "eta_B": _NUM, "a_B": _NUM, "phi_B": _NUM,
                "a_bar": _NUM, "phi_bar": _NUM, "T": _NUM, "S0": _NUM, "alpha0": _NUM,
            },
        },
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"T": _POS, "M": {"type": "integer", "minimum": 2}},
        },
        "sim": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_paths": _INT_POS,
                "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
                "measure": {"enum": sorted(MEASURES)},
                "record_every": _INT_POS,
                "n_full": {"type": "integer", "minimum": 0},
                "N": {"oneOf": [_INT_POS, {"type": "null"}]},
                "feedback": {"enum": ["theoretical", "empirical"]},
            },
        },
        "trader_types": {"type": "array", "items": _TYPE_SCHEMA, "minItems": 1},
        "type_distribution": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["point-mass", "lognormal"]},
                        "mean_k": _POS, "mean_sigma": _NONNEG, "mean_a": _POS, "mean_phi": _POS,
                        "scale_k": _NONNEG, "scale_sigma": _NONNEG,
                        "scale_a": _NONNEG, "scale_phi": _NONNEG,
                    },
                },
            ]
        },
        "verify": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "gateaux_paths": {"type": "integer", "minimum": 2},
                "negative_control_paths": {"type": "integer", "minimum": 2},
                "concavity_pairs": _INT_POS,
                "fbsde_paths": _INT_POS,
                "negative_control": {"type": "boolean"},
            },
        },
        "outputs": {"type": "string", "minLength": 1},
        "figures": {"type": "array", "items": {"enum": list(FIGURES)}, "uniqueItems": True},
    },
}


def default_config() -> dict:
    p = ModelParams()
    return {
        "model": p.to_dict(),
        "grid": {"T": p.T, "M": 10_000},
        "sim": {"n_paths": 10_000, "seed": 0, "measure": "broker", "record_every": 100,
                "n_full": 10, "N": None, "feedback": "theoretical"},
        "trader_types": [p.representative_type().to_dict()],
        "type_distribution": None,
        "verify": {"gateaux_paths": 10_000, "negative_control_paths": 2500,
                   "concavity_pairs": 1000, "fbsde_paths": 16, "negative_control": True},
        "outputs": "out",
        "figures": list(FIGURES),
    }


class ConfigError(ValueError):
    """The configuration is malformed or violates a model assumption."""


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_value(text: str):
    """JSON literal if it parses as one, otherwise the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def set_path(cfg: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    node = cfg
    for k in keys[:-1]:
        if not isinstance(node.get(k), dict):
            raise ConfigError(f"unknown config section in {dotted!r}")
        node = node[k]
    node[keys[-1]] = value


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> dict:
    """Defaults, then the JSON file, then dot-path overrides; validated.

    Setting ``model.T`` without ``grid.T`` (or the reverse) carries the
    horizon over to the other section.
    """
    cfg = default_config()
    user: dict = {}
    if path is not None:
        with open(path) as fh:
            user = json.load(fh)
        if not isinstance(user, dict):
            raise ConfigError("config file must hold a JSON object")
        cfg = _merge(cfg, user)
    overrides = overrides or {}
    for dotted, value in overrides.items():
        set_path(cfg, dotted, value)
    keys = set(overrides) | {f"{s}.T" for s in ("model", "grid") if "T" in user.get(s, {})}
    if "model.T" in keys and "grid.T" not in keys:
        cfg["grid"]["T"] = cfg["model"]["T"]
    elif "grid.T" in keys and "model.T" not in keys:
        cfg["model"]["T"] = cfg["grid"]["T"]
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = ".".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    if cfg["grid"]["T"] != cfg["model"]["T"]:
        raise ConfigError("grid.T must equal model.T")
    if cfg["grid"]["M"] % cfg["sim"]["record_every"]:
        raise ConfigError("sim.record_every must divide grid.M")


@dataclass(frozen=True)
class RunConfig:
    params: ModelParams
    grid: TimeGrid
    sim: SimConfig
    trader_types: tuple
    type_distribution: TypeDistribution | None
    verify: SuiteSettings
    outputs: Path
    figures: tuple
    raw: dict

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        validate_config(cfg)
        p = ModelParams(**cfg["model"])
        grid = make_grid(cfg["grid"]["T"], cfg["grid"]["M"])
        dist = cfg.get("type_distribution")
        dist = TypeDistribution(**dist) if dist else None
        s = cfg["sim"]
        sim = SimConfig(n_paths=s["n_paths"], grid=grid, seed=s["seed"], measure=s["measure"],
                        record_every=s["record_every"], n_full=s["n_full"], N=s["N"],
                        type_dist=dist, feedback=s["feedback"])
        v = cfg["verify"]
        suite = SuiteSettings(M=grid.M, seed=s["seed"], gateaux_paths=v["gateaux_paths"],
                              concavity_pairs=v["concavity_pairs"], fbsde_paths=v["fbsde_paths"],
                              negative_control=v["negative_control"],
                              negative_control_paths=v["negative_control_paths"])
        types = tuple(TraderType(**t) for t in cfg["trader_types"])
        return cls(p, grid, sim, types, dist, suite, Path(cfg["outputs"]),
                   tuple(cfg["figures"]), copy.deepcopy(cfg))
