"""Run configuration: file + flag merging, per-system defaults, validation."""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from pathlib import Path

import yaml

from .ppo import TrainConfig

SYSTEMS = ("meanfield", "quantum")

# Per-system defaults for the fields left unset by the user.
_SYSTEM_DEFAULTS = {
    "meanfield": {"dt": 0.05, "steps": 100, "hidden": (32, 16)},
    "quantum": {"dt": 0.1, "steps": 200, "hidden": (64, 32)},
}


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending field."""


@dataclass
class RunConfig:
    """Fully resolved run description (environment + training)."""

    system: str = "meanfield"
    n_atoms: int = 10
    c2: float = -1.0
    q_min: float = -6.0
    q_max: float = 6.0
    dt: float | None = None
    steps: int | None = None
    substeps: int = 5
    reward: str = "log"
    init: str = "fixed"
    hidden: tuple | None = None
    gamma: float = 0.999
    lr_actor: float = 3e-4
    lr_critic: float = 1e-3
    target_kl: float = 0.01
    clip_ratio: float = 0.2
    gae_lambda: float = 0.97
    epochs_per_update: int = 80
    episodes_per_epoch: int = 4
    total_epochs: int | None = None
    seed: int = 0
    workers: int = 1


_FIELDS = set(RunConfig.__dataclass_fields__)


def _fail(field: str, message: str):
    raise ConfigError(f"config field '{field}': {message}")


def resolve(file_values: dict | None = None, overrides: dict | None = None) -> RunConfig:
    """Merge defaults < file < overrides, fill per-system defaults, validate."""
    merged: dict = {}
    for source in (file_values or {}), (overrides or {}):
        for key, value in source.items():
            if value is None:
                continue
            if key not in _FIELDS:
                _fail(key, "unknown field")
            merged[key] = value

    system = merged.get("system", RunConfig.system)
    if system not in SYSTEMS:
        _fail("system", f"must be one of {SYSTEMS}, got {system!r}")
    defaults = _SYSTEM_DEFAULTS[system]
    merged.setdefault("dt", defaults["dt"])
    merged.setdefault("steps", defaults["steps"])
    merged.setdefault("hidden", defaults["hidden"])
    if "total_epochs" not in merged:
        if system == "meanfield":
            merged["total_epochs"] = 200
        else:
            merged["total_epochs"] = 200 if merged.get("n_atoms", 10) <= 2 else 1000

    cfg = RunConfig(**merged)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.system == "quantum":
        n = cfg.n_atoms
        if not isinstance(n, int) or n <= 0 or n % 2 != 0:
            _fail("n_atoms", f"must be a positive even integer, got {n}")
        if not -1e12 < cfg.c2 < 1e12:
            _fail("c2", f"must be finite, got {cfg.c2}")
    else:
        if cfg.c2 >= 0:
            _fail("c2", f"must be negative for the mean-field system, got {cfg.c2}")
        if cfg.substeps < 1:
            _fail("substeps", f"must be >= 1, got {cfg.substeps}")
    if cfg.q_min >= cfg.q_max:
        _fail("q_min", f"must be below q_max, got [{cfg.q_min}, {cfg.q_max}]")
    if cfg.dt <= 0:
        _fail("dt", f"must be positive, got {cfg.dt}")
    if cfg.steps < 1:
        _fail("steps", f"must be >= 1, got {cfg.steps}")
    if cfg.reward not in ("log", "delta"):
        _fail("reward", f"must be 'log' or 'delta', got {cfg.reward!r}")
    if cfg.init not in ("fixed", "random"):
        _fail("init", f"must be 'fixed' or 'random', got {cfg.init!r}")
    if not 0.0 <= cfg.gamma <= 1.0:
        _fail("gamma", f"must be in [0, 1], got {cfg.gamma}")
    if not 0.0 <= cfg.gae_lambda <= 1.0:
        _fail("gae_lambda", f"must be in [0, 1], got {cfg.gae_lambda}")
    if not 0.0 < cfg.clip_ratio < 1.0:
        _fail("clip_ratio", f"must be in (0, 1), got {cfg.clip_ratio}")
    if cfg.target_kl < 0:
        _fail("target_kl", f"must be >= 0, got {cfg.target_kl}")
    if cfg.lr_actor <= 0:
        _fail("lr_actor", f"must be positive, got {cfg.lr_actor}")
    if cfg.lr_critic <= 0:
        _fail("lr_critic", f"must be positive, got {cfg.lr_critic}")
    for name in ("epochs_per_update", "episodes_per_epoch", "total_epochs", "workers"):
        if getattr(cfg, name) < 1:
            _fail(name, f"must be >= 1, got {getattr(cfg, name)}")
    try:
        hidden = tuple(int(h) for h in cfg.hidden)
    except (TypeError, ValueError):
        _fail("hidden", f"must be a list of integers, got {cfg.hidden!r}")
    if not hidden or any(h < 1 for h in hidden):
        _fail("hidden", f"sizes must be positive, got {cfg.hidden!r}")
    cfg.hidden = hidden


def load_file(path) -> dict:
    """Read a YAML or JSON config file into a flat dict."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        values = json.loads(text)
    else:
        values = yaml.safe_load(text)
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must hold a mapping")
    return values


def env_spec(cfg: RunConfig) -> dict:
    """The environment block consumed by envs.make_env (and checkpoints)."""
    spec = {
        "system": cfg.system,
        "c2": cfg.c2,
        "q_min": cfg.q_min,
        "q_max": cfg.q_max,
        "dt": cfg.dt,
        "steps": cfg.steps,
        "reward": cfg.reward,
        "init": cfg.init,
        "seed": cfg.seed,
    }
    if cfg.system == "meanfield":
        spec["substeps"] = cfg.substeps
    else:
        spec["n_atoms"] = cfg.n_atoms
    return spec


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        hidden=tuple(cfg.hidden),
        gamma=cfg.gamma,
        lr_actor=cfg.lr_actor,
        lr_critic=cfg.lr_critic,
        target_kl=cfg.target_kl,
        clip_ratio=cfg.clip_ratio,
        gae_lambda=cfg.gae_lambda,
        epochs_per_update=cfg.epochs_per_update,
        episodes_per_epoch=cfg.episodes_per_epoch,
        total_epochs=cfg.total_epochs,
        seed=cfg.seed,
        workers=cfg.workers,
    )


def to_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["hidden"] = list(cfg.hidden)
    return d
