"""Flat `key = value` run configuration with a published schema.

A config file is plain text: one `key = value` per line, `#` comments, blank
lines ignored, keys dotted by section (`loss.r = 3`).  List values are comma
separated.  The same loader also accepts JSON: either a plain object of
dotted keys or a manifest written by the command line front end (whose
resolved config sits under its "config" key), so a manifest can be re-fed as
the config of a new run and reproduces it exactly.

`SCHEMA` is the single source of truth for keys, types and defaults; unknown
keys and ill-typed values are rejected by name.
"""

from __future__ import annotations

import json

from .data import GenSpec
from .encoder import SgdConfig
from .errors import ConfigError, ParseError
from .losses import LossConfig
from .similarity import SimilarityKind
from .trainer import TrainConfig

# key -> (type tag, default). Tags: int, float, bool, str, floats, ints, strs.
# A None default means "unset"; resolution may substitute another key's value
# (data.seed falls back to seed) or leave it None for optional inputs.
SCHEMA = {
    "seed": ("int", 0),
    "data.family": ("str", "gaussian_blobs"),
    "data.num_classes": ("int", 16),
    "data.samples_per_class": ("int", 200),
    "data.input_dim": ("int", 32),
    "data.noise_scale": ("float", 1.0),
    "data.seed": ("int", None),
    "data.csv": ("str", None),
    "loss.variant": ("str", "simple_final"),
    "loss.r": ("float", 3.0),
    "loss.alpha": ("float", 0.001),
    "loss.b": ("float", 0.0),
    "loss.b_learnable": ("bool", True),
    "similarity.kind": ("str", "generalized_inner"),
    "similarity.b_theta": ("float", 0.3),
    "similarity.b_theta_learnable": ("bool", False),
    "sgd.lr": ("float", 0.05),
    "sgd.momentum": ("float", 0.9),
    "sgd.weight_decay": ("float", 5e-4),
    "train.method": ("str", "simple"),
    "train.batch_size": ("int", 32),
    "train.queue_capacity": ("int", 256),
    "train.eta": ("float", 0.99),
    "train.epochs": ("int", 100),
    "train.eval_every": ("int", 10),
    "train.feature_dim": ("int", 32),
    "train.hidden_dims": ("ints", (64, 64)),
    "train.activation": ("str", "tanh"),
    "train.normalize_features": ("bool", False),
    "train.lr_warmup_steps": ("int", 100),
    "train.lr_decay_at": ("floats", (0.6, 0.8)),
    "train.lr_decay_factor": ("float", 0.1),
    "train.val_fraction": ("float", 0.2),
    "train.contrastive_margin": ("float", 0.5),
    "train.triplet_margin": ("float", 0.2),
    "train.proxy_margin": ("float", 0.0),
    "train.normalize_proxies": ("bool", False),
    "eval.num_pos": ("int", 2000),
    "eval.num_neg": ("int", 2000),
    "eval.far_targets": ("floats", (0.1, 0.01)),
    "eval.checkpoint": ("str", None),
    "eval.threshold": ("float", None),
    "grid.r": ("floats", None),
    "grid.alpha": ("floats", None),
    "grid.b_theta": ("floats", None),
    "plot.reports": ("strs", None),
    "plot.names": ("strs", None),
}


def _coerce_text(key: str, kind: str, raw: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "false"):
                return low == "true"
            raise ValueError(raw)
        if kind == "str":
            return raw
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if kind == "floats":
            return tuple(float(p) for p in parts)
        if kind == "ints":
            return tuple(int(p) for p in parts)
        return tuple(parts)  # strs
    except ValueError:
        raise ConfigError(f"config key {key!r} expects {kind}, got {raw!r}") from None


def _coerce_json(key: str, kind: str, val):
    def fail():
        raise ConfigError(f"config key {key!r} expects {kind}, got {val!r}")

    if kind == "int":
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            fail()
        if float(val) != int(val):
            fail()
        return int(val)
    if kind == "float":
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            fail()
        return float(val)
    if kind == "bool":
        if not isinstance(val, bool):
            fail()
        return val
    if kind == "str":
        if not isinstance(val, str):
            fail()
        return val
    if not isinstance(val, (list, tuple)):
        val = [val]
    if kind == "floats":
        return tuple(_coerce_json(key, "float", v) for v in val)
    if kind == "ints":
        return tuple(_coerce_json(key, "int", v) for v in val)
    return tuple(_coerce_json(key, "str", v) for v in val)


def parse_config_text(text: str) -> dict:
    """`key = value` lines to a typed override dict; errors carry line numbers."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParseError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate config key {key!r}")
        out[key] = _coerce_text(key, SCHEMA[key][0], raw)
    return out


def parse_config_json(doc) -> dict:
    """A JSON object (or a manifest with a "config" member) to overrides."""
    if not isinstance(doc, dict):
        raise ConfigError("JSON config must be an object of config keys")
    if "config" in doc and "command" in doc:
        doc = doc["config"]
        if not isinstance(doc, dict):
            raise ConfigError("manifest 'config' member must be an object")
    out = {}
    for key, val in doc.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        if val is None:
            continue
        out[key] = _coerce_json(key, SCHEMA[key][0], val)
    return out


def load_config(path) -> dict:
    """Read overrides from a config file, sniffing JSON versus flat text."""
    with open(path, "r") as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
        return parse_config_json(doc)
    return parse_config_text(text)


def resolve(overrides: dict) -> dict:
    """Full config: schema defaults, then overrides, then cross-key fallbacks."""
    unknown = set(overrides) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    conf = {key: default for key, (_, default) in SCHEMA.items()}
    conf.update(overrides)
    if conf["data.seed"] is None:
        conf["data.seed"] = conf["seed"]
    return conf


def to_genspec(conf: dict) -> GenSpec:
    return GenSpec(
        family=conf["data.family"],
        num_classes=conf["data.num_classes"],
        samples_per_class=conf["data.samples_per_class"],
        input_dim=conf["data.input_dim"],
        noise_scale=conf["data.noise_scale"],
        seed=conf["data.seed"],
    )


def to_similarity(conf: dict) -> SimilarityKind:
    return SimilarityKind(
        kind=conf["similarity.kind"],
        b_theta=conf["similarity.b_theta"],
        b_theta_learnable=conf["similarity.b_theta_learnable"],
    )


def to_train_config(conf: dict) -> TrainConfig:
    loss = LossConfig(
        variant=conf["loss.variant"],
        r=conf["loss.r"],
        alpha=conf["loss.alpha"],
        b=conf["loss.b"],
        b_learnable=conf["loss.b_learnable"],
        similarity=to_similarity(conf),
    )
    sgd = SgdConfig(
        lr=conf["sgd.lr"],
        momentum=conf["sgd.momentum"],
        weight_decay=conf["sgd.weight_decay"],
    )
    return TrainConfig(
        loss=loss,
        sgd=sgd,
        method=conf["train.method"],
        batch_size=conf["train.batch_size"],
        queue_capacity=conf["train.queue_capacity"],
        eta=conf["train.eta"],
        epochs=conf["train.epochs"],
        eval_every=conf["train.eval_every"],
        seed=conf["seed"],
        feature_dim=conf["train.feature_dim"],
        hidden_dims=tuple(conf["train.hidden_dims"]),
        activation=conf["train.activation"],
        normalize_features=conf["train.normalize_features"],
        lr_warmup_steps=conf["train.lr_warmup_steps"],
        lr_decay_at=tuple(conf["train.lr_decay_at"]),
        lr_decay_factor=conf["train.lr_decay_factor"],
        val_fraction=conf["train.val_fraction"],
        eval_num_pos=conf["eval.num_pos"],
        eval_num_neg=conf["eval.num_neg"],
        far_targets=tuple(conf["eval.far_targets"]),
        contrastive_margin=conf["train.contrastive_margin"],
        triplet_margin=conf["train.triplet_margin"],
        proxy_margin=conf["train.proxy_margin"],
        normalize_proxies=conf["train.normalize_proxies"],
    )


def manifest_json(command: str, conf: dict) -> str:
    """The manifest written by every command: full resolved config, sorted."""
    doc = {"command": command, "config": {k: conf[k] for k in sorted(conf)}}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"
