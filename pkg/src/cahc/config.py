"""Run configuration: flat key/value settings, named presets and JSON schemas."""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Any

from .cluster import ABLATIONS, TrainConfig
from .synth import SynthSpec

__all__ = [
    "ConfigError",
    "DEFAULTS",
    "PRESETS",
    "resolve_config",
    "train_config",
    "synth_spec",
    "CONFIG_SCHEMA",
    "METRICS_SCHEMA",
    "RUN_SCHEMA",
    "schemas",
]


class ConfigError(ValueError):
    """Invalid or unknown configuration."""


DEFAULTS: dict[str, Any] = {
    # dataset
    "edges": None,
    "features": None,
    "labels": None,
    "synth": None,
    "remove_isolated": True,
    # augmentation
    "p_f": 0.2,
    "p_m": 0.2,
    "neg_replacements": 1,
    "neg_source": "original",
    # encoder
    "layers": 1,
    "heads": 4,
    "head_dim": 128,
    "embedding_dim": None,
    "leaky_slope": 0.2,
    "edge_repr": "z",
    # objectives
    "tau_n": 0.5,
    "tau_c": 0.5,
    "w_hyper": 1.0,
    "w_node": 1.0,
    "w_clus": 1.0,
    # training
    "t1": 100,
    "t2": 50,
    "lr": 1e-3,
    "ass_lr": 1e-3,
    "weight_decay": 0.0,
    "k": None,
    "seed": 0,
    "repeats": 5,
    "ablate": [],
    "hyper_on": "views",
    "refresh_period": 0,
    "kmeans_restarts": 10,
}

_FIXED = {"layers": 1, "heads": 4, "head_dim": 128, "tau_n": 0.5, "tau_c": 0.5}


def _preset(p_f, p_m, d, lr, ass_lr, wd, t1, t2) -> dict[str, Any]:
    return {
        **_FIXED,
        "p_f": p_f,
        "p_m": p_m,
        "embedding_dim": d,
        "lr": lr,
        "ass_lr": ass_lr,
        "weight_decay": wd,
        "t1": t1,
        "t2": t2,
    }


# Per-dataset settings: p_f, p_m, D, LR, Ass.LR, WD, pre-training epochs, assignment epochs.
PRESETS: dict[str, dict[str, Any]] = {
    "cora_c": _preset(0.4, 0.4, 512, 5e-4, 5e-4, 5e-4, 180, 120),
    "citeseer": _preset(0.4, 0.4, 2048, 1e-4, 1e-5, 5e-5, 200, 80),
    "pubmed": _preset(0.1, 0.4, 1024, 5e-5, 5e-5, 5e-5, 150, 60),
    "cora_a": _preset(0.3, 0.2, 768, 1e-4, 1e-5, 1e-5, 100, 140),
    "dblp": _preset(0.4, 0.2, 256, 8e-4, 8e-4, 5e-5, 260, 100),
    "news20": _preset(0.1, 0.2, 512, 1e-3, 1e-4, 5e-4, 80, 30),
    "mushroom": _preset(0.4, 0.2, 128, 1e-4, 1e-4, 5e-4, 120, 80),
    "ntu2012": _preset(0.4, 0.2, 512, 1e-5, 1e-5, 5e-5, 60, 40),
}

_NUMBER = {"type": "number"}
_INT = {"type": "integer"}
_PROB = {"type": "number", "minimum": 0, "maximum": 1}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NONNEG = {"type": "number", "minimum": 0}
_NONNEG_INT = {"type": "integer", "minimum": 0}
_POS_INT = {"type": "integer", "minimum": 1}
_PATH = {"type": ["string", "null"]}

_SYNTH_SCHEMA = {
    "type": ["object", "null"],
    "additionalProperties": False,
    "properties": {
        "n_nodes": _POS_INT,
        "k_blocks": {"type": "integer", "minimum": 2},
        "edges_per_block": _POS_INT,
        "edge_size": {"type": "integer", "minimum": 2},
        "noise_rate": _PROB,
        "feature_dim": _POS_INT,
        "feature_signal": _NUMBER,
        "seed": _INT,
    },
}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cahc run config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "edges": _PATH,
        "features": _PATH,
        "labels": _PATH,
        "synth": _SYNTH_SCHEMA,
        "remove_isolated": {"type": "boolean"},
        "p_f": _PROB,
        "p_m": _PROB,
        "neg_replacements": _POS_INT,
        "neg_source": {"enum": ["original", "view"]},
        "layers": _POS_INT,
        "heads": _POS_INT,
        "head_dim": _POS_INT,
        "embedding_dim": {"type": ["integer", "null"], "minimum": 1},
        "leaky_slope": _NUMBER,
        "edge_repr": {"enum": ["z", "z_proj", "q"]},
        "tau_n": _POS,
        "tau_c": _POS,
        "w_hyper": _NONNEG,
        "w_node": _NONNEG,
        "w_clus": _NONNEG,
        "t1": _NONNEG_INT,
        "t2": _NONNEG_INT,
        "lr": _POS,
        "ass_lr": _POS,
        "weight_decay": _NONNEG,
        "k": {"type": ["integer", "null"], "minimum": 1},
        "seed": _INT,
        "repeats": _POS_INT,
        "ablate": {"type": "array", "items": {"enum": list(ABLATIONS)}, "uniqueItems": True},
        "hyper_on": {"enum": ["views", "original"]},
        "refresh_period": _NONNEG_INT,
        "kmeans_restarts": _POS_INT,
    },
}

_METRIC_FIELDS = ("acc", "f1_macro", "nmi", "ari", "silhouette")

METRICS_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["acc", "f1_macro", "nmi", "ari", "silhouette", "n", "k_true", "k_pred", "seed"],
    "properties": {
        "acc": {"type": "number", "minimum": 0, "maximum": 1},
        "f1_macro": {"type": "number", "minimum": 0, "maximum": 1},
        "nmi": {"type": "number", "minimum": 0, "maximum": 1},
        "ari": {"type": "number", "minimum": -1, "maximum": 1},
        "silhouette": {"type": ["number", "null"], "minimum": -1, "maximum": 1},
        "n": _NONNEG_INT,
        "k_true": _NONNEG_INT,
        "k_pred": _NONNEG_INT,
        "seed": {"type": ["integer", "null"]},
    },
}

_SUMMARY = {
    "type": "object",
    "properties": {f: {"type": ["number", "null"]} for f in _METRIC_FIELDS},
    "required": list(_METRIC_FIELDS),
}

RUN_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "cahc train result",
    "type": "object",
    "required": ["config", "per_seed", "mean", "std", "n_nodes", "n_edges"],
    "properties": {
        "config": {"type": "object"},
        "n_nodes": _NONNEG_INT,
        "n_edges": _NONNEG_INT,
        "per_seed": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["seed", "metrics", "runtime_s", "files"],
                "properties": {
                    "seed": _INT,
                    "metrics": {"oneOf": [METRICS_SCHEMA, {"type": "null"}]},
                    "runtime_s": _NONNEG,
                    "files": {"type": "object"},
                },
            },
        },
        "mean": {"oneOf": [_SUMMARY, {"type": "null"}]},
        "std": {"oneOf": [_SUMMARY, {"type": "null"}]},
    },
}


def schemas() -> dict[str, Any]:
    return {"config": CONFIG_SCHEMA, "train_result": RUN_SCHEMA, "metrics": METRICS_SCHEMA}


def _validate(cfg: dict[str, Any]) -> None:
    import jsonschema

    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def resolve_config(
    path: str | Path | None = None,
    preset: str | None = None,
    overrides: dict[str, Any] | None = None,
) -> dict[str, Any]:
    """Merge defaults < preset < config file < overrides and validate.

    Relative dataset paths in a config file resolve against the file's directory.
    """
    cfg = dict(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg.update(PRESETS[preset])
    if path is not None:
        path = Path(path)
        try:
            loaded = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a JSON object")
        unknown = sorted(set(loaded) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        for key in ("edges", "features", "labels"):
            if loaded.get(key) is not None and not Path(loaded[key]).is_absolute():
                loaded[key] = str(path.parent / loaded[key])
        cfg.update(loaded)
    if overrides:
        unknown = sorted(set(overrides) - set(DEFAULTS))
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        cfg.update(overrides)
    _validate(cfg)
    if cfg["synth"] is not None and cfg["edges"] is not None:
        raise ConfigError("give either dataset paths or a synth spec, not both")
    if (cfg["edges"] is None) != (cfg["features"] is None):
        raise ConfigError("'edges' and 'features' must be given together")
    return cfg


_TRAIN_KEYS = {f.name for f in fields(TrainConfig)}


def train_config(cfg: dict[str, Any], seed: int | None = None, **changes) -> TrainConfig:
    values = {k: v for k, v in cfg.items() if k in _TRAIN_KEYS}
    values["ablate"] = tuple(values.get("ablate", ()))
    if seed is not None:
        values["seed"] = seed
    values.update(changes)
    try:
        return TrainConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def synth_spec(values: dict[str, Any] | None) -> SynthSpec:
    try:
        return SynthSpec(**(values or {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"synth spec: {exc}") from None
