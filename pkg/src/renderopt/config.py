"""Experiment configuration: one JSON tree, module-scoped sections.

An empty file (or missing keys) yields the documented defaults below; unknown
keys are rejected with a nearest-key suggestion; range violations name the
full key path. The normalized tree serializes canonically, so its digest is
stable across platforms.
"""

from __future__ import annotations

import difflib
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "runs",
    "game": {
        "nodes": [
            {"id": "edge-0", "alpha": 2.0, "beta": 0.5, "demand_max": 2.0},
            {"id": "edge-1", "alpha": 1.5, "beta": 0.3, "demand_max": 2.0},
        ],
        "cloud": {"unit_cost": 0.3, "price_min": 0.35, "price_max": 1.8, "capacity": 8.0},
        "solver": {
            "br_tolerance": 1e-6,
            "br_max_iters": 10_000,
            "price_step_frac": 0.1,
            "fd_epsilon_frac": 1e-4,
            "price_max_iters": 500,
        },
    },
    "prerender": {
        "width": 20,
        "height": 20,
        "spacing": 0.02,
        "region_side": 5,
        "diagonal": False,
        "steps": 500,
        "panorama_work": 100.0,
        "timing": {
            "t_request": 1.0,
            "render_throughput": 20.0,
            "bandwidth": 8000.0,
            "avatar_speed": 1.0,
        },
        "encoding": {"base_i_size": 100_000.0, "ratio_floor": 0.1, "decay": 4.0},
    },
    "diffusion": {
        "steps": 700,
        "beta_start": 0.0001,
        "beta_end": 0.04,
        "d_model": 64,
        "heads": 4,
        "learning_rate": 0.0001,
        "batch_size": 32,
        "epochs": 20,
        "patience": 5,
        "seq_len": 16,
        "dataset_users": 256,
        "stride": 35,
        "infer_noise_step": 140,
    },
    "bench": {
        "scenes": 20,
        "frames_per_scene": 3600,
        "fps": 60,
        "regions_per_scene": 40,
        "interest_fraction": 0.3,
        "lod_high": 1.0,
        "lod_low": 0.25,
        "throughput": 1.0125,
        "mdp_discount": 0.95,
        "mdp_cost_weight": 0.55,
        "ro_samples": 21,
        "stride": 35,
        "t_noise": 140,
        "focus_quantile": None,
        "train": {
            "learning_rate": 0.003,
            "batch_size": 32,
            "epochs": 20,
            "patience": 5,
            "users": 256,
        },
    },
}

# key path -> (predicate, requirement text); checked after merging
_RULES: dict[str, tuple] = {
    "seed": (lambda v: isinstance(v, int) and v >= 0, "a non-negative integer"),
    "out_dir": (lambda v: isinstance(v, str) and v, "a non-empty string"),
    "game.cloud.capacity": (lambda v: _pos(v), "a positive number"),
    "game.solver.br_tolerance": (lambda v: _pos(v), "a positive number"),
    "game.solver.br_max_iters": (lambda v: isinstance(v, int) and v > 0, "a positive integer"),
    "game.solver.price_step_frac": (lambda v: _pos(v), "a positive number"),
    "game.solver.fd_epsilon_frac": (lambda v: _pos(v), "a positive number"),
    "game.solver.price_max_iters": (lambda v: isinstance(v, int) and v > 0, "a positive integer"),
    "prerender.width": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "prerender.height": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "prerender.spacing": (lambda v: _pos(v), "a positive number"),
    "prerender.region_side": (lambda v: isinstance(v, int) and v >= 1 and v % 2 == 1,
                              "an odd integer >= 1"),
    "prerender.diagonal": (lambda v: isinstance(v, bool), "a boolean"),
    "prerender.steps": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "prerender.panorama_work": (lambda v: _pos(v), "a positive number"),
    "prerender.timing.t_request": (lambda v: _pos(v), "a positive number"),
    "prerender.timing.render_throughput": (lambda v: _pos(v), "a positive number"),
    "prerender.timing.bandwidth": (lambda v: _pos(v), "a positive number"),
    "prerender.timing.avatar_speed": (lambda v: _pos(v), "a positive number"),
    "prerender.encoding.base_i_size": (lambda v: _pos(v), "a positive number"),
    "prerender.encoding.ratio_floor": (lambda v: _num(v) and 0 < v <= 1, "in (0, 1]"),
    "prerender.encoding.decay": (lambda v: _pos(v), "a positive number"),
    "diffusion.steps": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "diffusion.beta_start": (lambda v: _num(v) and 0 < v < 1, "in (0, 1)"),
    "diffusion.beta_end": (lambda v: _num(v) and 0 < v < 1, "in (0, 1)"),
    "diffusion.d_model": (lambda v: isinstance(v, int) and v >= 2 and v % 2 == 0,
                          "an even integer >= 2"),
    "diffusion.heads": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "diffusion.learning_rate": (lambda v: _pos(v), "a positive number"),
    "diffusion.batch_size": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "diffusion.epochs": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "diffusion.patience": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "diffusion.seq_len": (lambda v: isinstance(v, int) and v >= 2 and v % 2 == 0,
                          "an even integer >= 2"),
    "diffusion.dataset_users": (lambda v: isinstance(v, int) and v >= 2, "an integer >= 2"),
    "diffusion.stride": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "diffusion.infer_noise_step": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.scenes": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.frames_per_scene": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.fps": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.regions_per_scene": (lambda v: isinstance(v, int) and v >= 2, "an integer >= 2"),
    "bench.interest_fraction": (lambda v: _num(v) and 0 < v < 1, "in (0, 1)"),
    "bench.lod_high": (lambda v: _pos(v), "a positive number"),
    "bench.lod_low": (lambda v: _pos(v), "a positive number"),
    "bench.throughput": (lambda v: _pos(v), "a positive number"),
    "bench.mdp_discount": (lambda v: _num(v) and 0 < v < 1, "in (0, 1)"),
    "bench.mdp_cost_weight": (lambda v: _pos(v), "a positive number"),
    "bench.ro_samples": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.stride": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.t_noise": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.focus_quantile": (lambda v: v is None or (_num(v) and 0 < v < 1),
                             "null or in (0, 1)"),
    "bench.train.learning_rate": (lambda v: _pos(v), "a positive number"),
    "bench.train.batch_size": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.train.epochs": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.train.patience": (lambda v: isinstance(v, int) and v >= 1, "an integer >= 1"),
    "bench.train.users": (lambda v: isinstance(v, int) and v >= 2, "an integer >= 2"),
}

_NODE_FIELDS = {"id": str, "alpha": (int, float), "beta": (int, float),
                "demand_max": (int, float)}
_CLOUD_FIELDS = {"unit_cost": (int, float), "price_min": (int, float),
                 "price_max": (int, float), "capacity": (int, float)}


def _num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _pos(v) -> bool:
    return _num(v) and v > 0


def _suggest(key: str, known) -> str:
    matches = difflib.get_close_matches(key, list(known), n=1)
    return f"; did you mean {matches[0]!r}?" if matches else ""


def _merge(defaults, user, path: str):
    if isinstance(defaults, dict):
        if not isinstance(user, dict):
            raise ConfigError(f"{path or 'config'}: expected an object, got {type(user).__name__}")
        out = {}
        for key, uval in user.items():
            if key not in defaults:
                raise ConfigError(
                    f"{path + '.' if path else ''}{key}: unknown key"
                    f"{_suggest(key, defaults)}"
                )
        for key, dval in defaults.items():
            sub = f"{path}.{key}" if path else key
            out[key] = _merge(dval, user[key], sub) if key in user else _copy(dval)
        return out
    return user


def _copy(value):
    return json.loads(json.dumps(value))


def _validate_nodes(nodes, path: str):
    if not isinstance(nodes, list) or not nodes:
        raise ConfigError(f"{path}: expected a non-empty list of node objects")
    for i, node in enumerate(nodes):
        if not isinstance(node, dict):
            raise ConfigError(f"{path}[{i}]: expected an object")
        for key in node:
            if key not in _NODE_FIELDS:
                raise ConfigError(f"{path}[{i}].{key}: unknown key{_suggest(key, _NODE_FIELDS)}")
        for key, typ in _NODE_FIELDS.items():
            if key not in node:
                raise ConfigError(f"{path}[{i}].{key}: missing")
            if isinstance(node[key], bool) or not isinstance(node[key], typ):
                raise ConfigError(f"{path}[{i}].{key}: wrong type")
        if not node["alpha"] > 0:
            raise ConfigError(f"{path}[{i}].alpha: must be > 0")
        if node["beta"] < 0:
            raise ConfigError(f"{path}[{i}].beta: must be >= 0")
        if not node["demand_max"] > 0:
            raise ConfigError(f"{path}[{i}].demand_max: must be > 0")


def _validate_cloud(cloud, path: str):
    for key in cloud:
        if key not in _CLOUD_FIELDS:
            raise ConfigError(f"{path}.{key}: unknown key{_suggest(key, _CLOUD_FIELDS)}")
    if not (0 < cloud["unit_cost"] <= cloud["price_min"] < cloud["price_max"]):
        raise ConfigError(
            f"{path}: require 0 < unit_cost <= price_min < price_max"
        )
    if not cloud["capacity"] > 0:
        raise ConfigError(f"{path}.capacity: must be > 0")


def _walk_rules(tree: dict):
    for path, (pred, requirement) in _RULES.items():
        node = tree
        for part in path.split("."):
            node = node[part]
        if not pred(node):
            raise ConfigError(f"{path}: must be {requirement}, got {node!r}")
    _validate_nodes(tree["game"]["nodes"], "game.nodes")
    _validate_cloud(tree["game"]["cloud"], "game.cloud")
    if not tree["diffusion"]["beta_start"] < tree["diffusion"]["beta_end"]:
        raise ConfigError("diffusion.beta_start: must be below diffusion.beta_end")
    d, h = tree["diffusion"]["d_model"], tree["diffusion"]["heads"]
    if d % h != 0:
        raise ConfigError(f"diffusion.d_model: {d} not divisible by diffusion.heads {h}")
    if tree["bench"]["frames_per_scene"] != tree["bench"]["fps"] * 60:
        raise ConfigError(
            "bench.frames_per_scene: must equal bench.fps * 60 (one-minute scenes)"
        )
    if not tree["bench"]["lod_low"] < tree["bench"]["lod_high"]:
        raise ConfigError("bench.lod_low: must be below bench.lod_high")
    if tree["diffusion"]["infer_noise_step"] > tree["diffusion"]["steps"]:
        raise ConfigError("diffusion.infer_noise_step: must be <= diffusion.steps")
    if tree["diffusion"]["infer_noise_step"] % tree["diffusion"]["stride"] != 0:
        raise ConfigError(
            "diffusion.stride: must divide diffusion.infer_noise_step"
        )
    if tree["bench"]["t_noise"] % tree["bench"]["stride"] != 0:
        raise ConfigError("bench.stride: must divide bench.t_noise")


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated, defaults-filled configuration tree."""

    data: dict

    def section(self, name: str) -> dict:
        return self.data[name]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def out_dir(self) -> str:
        return self.data["out_dir"]

    def serialize(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"

    def digest(self) -> str:
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def parse_config(text: str) -> ExperimentConfig:
    if not text.strip():
        user: dict = {}
    else:
        try:
            user = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config parse error: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("config root must be a JSON object")
    tree = _merge(DEFAULTS, user, "")
    _walk_rules(tree)
    return ExperimentConfig(data=tree)


def load_config(path: str | Path | None) -> ExperimentConfig:
    """Load and validate a config file; None loads the pure defaults."""
    if path is None:
        return parse_config("")
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    return parse_config(p.read_text())
