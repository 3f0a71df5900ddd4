"""Single JSON config document with sections {data, model, loss, optim,
train, eval}. Every field has a documented default; unknown keys are
rejected with their dotted path. The fully resolved document is echoed into
training logs and checkpoints.
"""

from __future__ import annotations

import copy
import json
from pathlib import Path

from .data import SyntheticConfig
from .errors import ConfigError
from .evaluate import ProbeConfig
from .losses import LossConfig

DEFAULTS: dict = {
    "data": {
        "n_samples": 480,
        "n_classes": 8,
        "seed": 42,
        "t_video": 12,
        "d_video": 24,
        "t_audio": 12,
        "d_audio": 20,
        "l_text": 8,
        "vocab": 64,
        "p_available": 0.625,
        "sigma_video": 0.0625,
        "template_scale_video": 0.125,
        "mean_signal_video": 0.01,
        "offset_sigma_video": 0.0,
        "sigma_audio": 0.5,
        "text_informativeness": 0.9,
        "independent_availability": False,
    },
    "model": {
        "d_model": 64,
        "n_heads": 4,
        "n_layers": 2,
        "d_ff": None,           # None -> 2 * d_model
        "d_proj": 32,
        "audio_hidden": None,   # None -> d_model
        "max_text_len": 128,
    },
    "loss": {
        "tau": 0.07,
        "terms": ["av", "vt", "avt"],
        "weights": {"av": 1.0, "vt": 1.0, "avt": 1.0},
    },
    "optim": {
        "lr_max": 1e-3,
        "lr_min": 0.0,
        "warmup_steps": 0,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps": 1e-8,
        "grad_clip": 0.0,
    },
    "train": {
        "epochs": 25,
        "batch_size": 32,
        "seed": None,           # must be provided (config or --seed): determinism contract
        "checkpoint_every": 0,  # epochs between intermediate checkpoints; 0 = final only
        "augment_sigma_audio": 0.25,
    },
    "eval": {
        "clips_per_video": 4,
        "probe_lr": 1e-4,
        "probe_batch_size": 32,
        "probe_epochs": 300,
        "probe_seed": 7,
        "eval_seed": 1234,
    },
}

_NUMERIC = (int, float)


def _check_unknown(user: dict, defaults: dict, prefix: str = "") -> None:
    for key, value in user.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigError(f"unknown config key {path!r}")
        if isinstance(defaults[key], dict) and not isinstance(value, dict):
            raise ConfigError(f"config key {path!r} must be an object")
        if isinstance(defaults[key], dict):
            _check_unknown(value, defaults[key], path + ".")


def _merge(base: dict, extra: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require_number(cfg: dict, section: str, key: str, positive=False, nonneg=False) -> None:
    v = cfg[section][key]
    if isinstance(v, bool) or not isinstance(v, _NUMERIC):
        raise ConfigError(f"{section}.{key} must be a number, got {v!r}")
    if positive and not v > 0:
        raise ConfigError(f"{section}.{key} must be > 0")
    if nonneg and v < 0:
        raise ConfigError(f"{section}.{key} must be >= 0")


def validate(cfg: dict) -> dict:
    _check_unknown(cfg, DEFAULTS)
    cfg = _merge(DEFAULTS, cfg)

    for key in ("n_samples", "n_classes", "t_video", "d_video", "t_audio", "d_audio",
                "l_text", "vocab"):
        _require_number(cfg, "data", key, positive=True)
    _require_number(cfg, "data", "p_available", nonneg=True)
    _require_number(cfg, "data", "sigma_video", nonneg=True)
    _require_number(cfg, "data", "offset_sigma_video", nonneg=True)
    _require_number(cfg, "data", "template_scale_video", nonneg=True)
    _require_number(cfg, "data", "mean_signal_video", nonneg=True)
    _require_number(cfg, "data", "sigma_audio", nonneg=True)
    if not (0.0 <= cfg["data"]["p_available"] <= 1.0):
        raise ConfigError("data.p_available must lie in [0, 1]")
    if not (0.0 <= cfg["data"]["text_informativeness"] <= 1.0):
        raise ConfigError("data.text_informativeness must lie in [0, 1]")

    for key in ("d_model", "n_heads", "d_proj", "max_text_len"):
        _require_number(cfg, "model", key, positive=True)
    if not isinstance(cfg["model"]["n_layers"], int) or cfg["model"]["n_layers"] < 0:
        raise ConfigError("model.n_layers must be an integer >= 0")
    if cfg["model"]["d_model"] % cfg["model"]["n_heads"] != 0:
        raise ConfigError("model.d_model must be divisible by model.n_heads")

    _require_number(cfg, "loss", "tau", positive=True)
    terms = cfg["loss"]["terms"]
    if (not isinstance(terms, list) or not terms
            or any(t not in ("av", "vt", "avt") for t in terms)):
        raise ConfigError("loss.terms must be a nonempty subset of ['av', 'vt', 'avt']")

    _require_number(cfg, "optim", "lr_max", nonneg=True)
    _require_number(cfg, "optim", "lr_min", nonneg=True)
    if cfg["optim"]["lr_max"] < cfg["optim"]["lr_min"]:
        raise ConfigError("optim.lr_max must be >= optim.lr_min")

    if cfg["train"]["seed"] is not None and not isinstance(cfg["train"]["seed"], int):
        raise ConfigError("train.seed must be an integer")
    _require_number(cfg, "train", "epochs", positive=True)
    if not isinstance(cfg["train"]["batch_size"], int) or cfg["train"]["batch_size"] < 2:
        raise ConfigError("train.batch_size must be an integer >= 2")
    _require_number(cfg, "train", "augment_sigma_audio", nonneg=True)

    _require_number(cfg, "eval", "clips_per_video", positive=True)
    _require_number(cfg, "eval", "probe_lr", positive=True)
    _require_number(cfg, "eval", "probe_epochs", positive=True)
    return cfg


def load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return doc


def resolve_config(path=None, overrides: dict | None = None) -> dict:
    """Load, merge (file then overrides) and validate; returns the full document."""
    doc = load_config_file(path) if path else {}
    if overrides:
        _check_unknown(overrides, DEFAULTS)
        doc = _merge(doc, overrides)
    return validate(doc)


def synthetic_config(cfg: dict) -> SyntheticConfig:
    return SyntheticConfig(**cfg["data"])


def loss_config(cfg: dict) -> LossConfig:
    return LossConfig(tau=cfg["loss"]["tau"], enabled_terms=tuple(cfg["loss"]["terms"]),
                      term_weights=dict(cfg["loss"]["weights"]))


def probe_config(cfg: dict) -> ProbeConfig:
    e = cfg["eval"]
    return ProbeConfig(lr=e["probe_lr"], batch_size=e["probe_batch_size"],
                       epochs=int(e["probe_epochs"]), seed=int(e["probe_seed"]))
