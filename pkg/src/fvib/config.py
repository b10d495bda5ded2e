"""Run configuration: one YAML (or JSON) file with ``data``, ``model``, ``train`` and ``eval``.

Two base profiles exist. ``desk`` (the default) is sized for a laptop and CI;
``full`` holds the MNIST-scale settings (two hidden layers of 1024, 200
epochs, lr 1e-4 decayed by 0.97 every 2 epochs, kappa 256 for the per-beta
baselines, 30 samples for calibration and 1 for accuracy). The ``standard``
beta grid is 1e-6 ... 1e-2 by decades, then 0.1 ... 1.0 in steps of 0.1.
Keys given in the file override the chosen profile.
"""

import copy
import json
from pathlib import Path

import yaml

from .errors import ConfigError
from .net import TrainConfig

STANDARD_BETA_GRID = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2] + [round(0.1 * k, 1) for k in range(1, 11)]

METHODS = ("fvib", "vib", "taylor", "ce")
SOURCES = ("synth", "csv", "idx")

DESK = {
    "data": {
        "source": "synth",
        "d": 3,
        "per_class": 100,
        "dim": 4,
        "spread": 0.5,
        "seed": 0,
        "path": None,
        "label_column": "label",
        "images": None,
        "labels": None,
        "test_images": None,
        "test_labels": None,
        "fractions": [0.6, 0.2, 0.2],
        "split_seed": 0,
        "strict_balance": True,
    },
    "model": {
        "method": "fvib",
        "hidden": [128, 128],
        "kappa": None,
        "beta": None,
        "ct": True,
        "confidence": 0.997,
    },
    "train": {
        "epochs": 100,
        "batch_size": 50,
        "lr": 1e-3,
        "lr_decay": 0.97,
        "lr_decay_every": 2,
        "seed": 0,
    },
    "eval": {
        "samples": 30,
        "accuracy_samples": 1,
        "bins": 15,
        "beta_grid": "standard",
        "seed": 0,
        "workers": 1,
    },
}

FULL = copy.deepcopy(DESK)
FULL["model"].update({"hidden": [1024, 1024], "kappa": 256})
FULL["train"].update({"epochs": 200, "batch_size": 100, "lr": 1e-4,
                       "lr_decay": 0.97, "lr_decay_every": 2})

PROFILES = {"desk": DESK, "full": FULL}


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def beta_grid(spec):
    if spec == "standard":
        return list(STANDARD_BETA_GRID)
    if isinstance(spec, str):
        spec = [s for s in spec.replace(" ", "").split(",") if s]
        try:
            spec = [float(s) for s in spec]
        except ValueError:
            raise ConfigError(f"eval.beta_grid: cannot parse {spec!r}") from None
    grid = sorted(float(b) for b in spec)
    bad = [b for b in grid if not 0.0 <= b <= 1.0]
    if bad or not grid:
        raise ConfigError(f"eval.beta_grid: values must lie in [0, 1], got {bad or 'empty grid'}")
    return grid


def validate(cfg):
    """Check every key; raise :class:`ConfigError` listing all problems at once."""
    problems = []
    for section, keys in cfg.items():
        if section not in DESK:
            problems.append(f"unknown section {section!r}")
            continue
        for key in keys:
            if key not in DESK[section]:
                problems.append(f"{section}.{key}: unknown key")
    data, model, ev = cfg.get("data", {}), cfg.get("model", {}), cfg.get("eval", {})

    if data.get("source") not in SOURCES:
        problems.append(f"data.source must be one of {SOURCES} (got {data.get('source')!r})")
    if data.get("source") == "synth":
        if not (_is_int(data.get("d")) and data["d"] >= 2):
            problems.append(f"data.d must be an integer >= 2 (got {data.get('d')!r})")
        if not (_is_int(data.get("per_class")) and data["per_class"] >= 1):
            problems.append(f"data.per_class must be an integer >= 1 (got {data.get('per_class')!r})")
        if not (_is_int(data.get("dim")) and _is_int(data.get("d")) and data["dim"] >= data["d"] - 1):
            problems.append(f"data.dim must be an integer >= d - 1 (got {data.get('dim')!r})")
        if not (_is_num(data.get("spread")) and data["spread"] >= 0):
            problems.append(f"data.spread must be >= 0 (got {data.get('spread')!r})")
    elif data.get("source") == "csv" and not data.get("path"):
        problems.append("data.path is required for source 'csv'")
    elif data.get("source") == "idx":
        for key in ("images", "labels"):
            if not data.get(key):
                problems.append(f"data.{key} is required for source 'idx'")
        if bool(data.get("test_images")) != bool(data.get("test_labels")):
            problems.append("data.test_images and data.test_labels must be given together")
    fr = data.get("fractions")
    held_out = data.get("source") == "idx" and bool(data.get("test_images"))
    if not (isinstance(fr, (list, tuple)) and len(fr) == 3 and all(_is_num(f) for f in fr)
            and fr[0] > 0 and all(f >= 0 for f in fr)):
        problems.append(f"data.fractions must be three nonnegative numbers with a positive "
                        f"train share (got {fr!r})")
    elif held_out and abs(fr[1] + fr[2] - 1) > 1e-9:
        # the training file is used whole; val and test split the held-out file
        problems.append(f"data.fractions: with separate test files the val and test shares "
                        f"must sum to 1 (got {fr!r})")
    elif not held_out and abs(sum(fr) - 1) > 1e-9:
        problems.append(f"data.fractions must sum to 1 (got {fr!r})")

    method = model.get("method")
    if method not in METHODS:
        problems.append(f"model.method must be one of {METHODS} (got {method!r})")
    if method in ("vib", "taylor"):
        beta = model.get("beta")
        if beta is None:
            problems.append(f"model.beta is required for method {method!r}")
        elif not (_is_num(beta) and 0 <= beta <= 1):
            problems.append(f"model.beta must lie in [0, 1] (got {beta!r})")
    hidden = model.get("hidden")
    if not (isinstance(hidden, (list, tuple)) and all(_is_int(h) and h >= 1 for h in hidden)):
        problems.append(f"model.hidden must be a list of positive integers (got {hidden!r})")
    kappa = model.get("kappa")
    if kappa is not None and not (_is_int(kappa) and kappa >= 1):
        problems.append(f"model.kappa must be a positive integer or null (got {kappa!r})")
    if not isinstance(model.get("ct"), bool):
        problems.append(f"model.ct must be true or false (got {model.get('ct')!r})")
    c = model.get("confidence")
    if not (_is_num(c) and 0 < c < 1):
        problems.append(f"model.confidence must lie in (0, 1) (got {c!r})")

    try:
        TrainConfig(**cfg.get("train", {}))
    except ConfigError as exc:
        problems.extend(exc.problems)
    except TypeError as exc:
        problems.append(f"train: {exc}")

    for key in ("samples", "accuracy_samples", "bins", "workers"):
        if not (_is_int(ev.get(key)) and ev[key] >= 1):
            problems.append(f"eval.{key} must be an integer >= 1 (got {ev.get(key)!r})")
    if not _is_int(ev.get("seed")):
        problems.append(f"eval.seed must be an integer (got {ev.get('seed')!r})")
    try:
        beta_grid(ev.get("beta_grid"))
    except ConfigError as exc:
        problems.extend(exc.problems)
    except (TypeError, ValueError):
        problems.append(f"eval.beta_grid: cannot parse {ev.get('beta_grid')!r}")
    if problems:
        raise ConfigError(problems)
    return cfg


def merge(overrides, profile="desk"):
    if profile not in PROFILES:
        raise ConfigError(f"profile must be one of {sorted(PROFILES)} (got {profile!r})")
    cfg = copy.deepcopy(PROFILES[profile])
    for section, values in (overrides or {}).items():
        if not isinstance(values, dict):
            cfg[section] = values
            continue
        cfg.setdefault(section, {}).update(values)
    return cfg


def load(path, overrides=None):
    """Read a config file (YAML or JSON), merge it onto its profile and validate it.

    ``overrides`` (``{section: {key: value}}``) is applied before validation.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    profile = raw.pop("profile", "desk")
    bad = [f"{s}: must be a mapping" for s, v in raw.items() if not isinstance(v, dict)]
    if bad:
        raise ConfigError(bad)
    cfg = merge(raw, profile)
    for section, values in (overrides or {}).items():
        cfg.setdefault(section, {}).update(values)
    return validate(cfg)


def dump(cfg):
    return json.dumps(cfg, indent=2, sort_keys=True)
