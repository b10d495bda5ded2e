"""Training runs, beta sweeps (IB curves), calibration comparisons and accuracy evaluation."""

import csv
import io
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import checkpoint as ckpt
from .baseline import ce_train, taylor_train, vib_train
from .calibration import DEFAULT_BINS, optimize_beta, optimize_temperature, report
from .config import STANDARD_BETA_GRID
from .data import load_csv, load_idx, split, synth_blobs
from .errors import ConfigError, DataError
from .net import TrainConfig
from .objectives import ib_bounds
from .trainer import train

log = logging.getLogger(__name__)

SWEEP_HEADER = "# fvib-sweep v1"
SWEEP_COLUMNS = ("beta", "prediction_bound_train", "compression_bound_train",
                 "prediction_bound_test", "compression_bound_test",
                 "accuracy_test", "nll_test", "ece_test")


@dataclass
class Splits:
    train: object
    val: object = None
    test: object = None


def _split_named(ds, fractions, seed, names):
    keep = [(f, n) for f, n in zip(fractions, names) if f > 0]
    if len(keep) == 1:
        return {keep[0][1]: ds}
    if not keep:
        return {}
    total = sum(f for f, _ in keep)
    parts = split(ds, [f / total for f, _ in keep], seed, [n for _, n in keep])
    return dict(zip([n for _, n in keep], parts))


def load_splits(data_cfg):
    """Build the train/val/test splits described by a ``data`` config section."""
    src = data_cfg["source"]
    fractions = data_cfg["fractions"]
    seed = data_cfg["split_seed"]
    if src == "synth":
        pool = synth_blobs(data_cfg["d"], data_cfg["per_class"], data_cfg["dim"],
                           data_cfg["spread"], data_cfg["seed"])
    elif src == "csv":
        pool = load_csv(data_cfg["path"], data_cfg["label_column"])
    elif src == "idx":
        pool = load_idx(data_cfg["images"], data_cfg["labels"])
        if data_cfg.get("test_images"):
            held = load_idx(data_cfg["test_images"], data_cfg["test_labels"])
            if held.d != pool.d:
                raise DataError("train and test IDX files have different class sets")
            parts = _split_named(held, [0.0, fractions[1], fractions[2]], seed,
                                 ("train", "val", "test"))
            return Splits(pool, parts.get("val"), parts.get("test"))
    else:
        raise ConfigError(f"data.source: unknown source {src!r}")
    parts = _split_named(pool, fractions, seed, ("train", "val", "test"))
    return Splits(parts["train"], parts.get("val"), parts.get("test"))


def run_train(cfg):
    """Train the configured method. Returns ``(checkpoint_doc, log_header, log_rows)``."""
    splits = load_splits(cfg["data"])
    tc = TrainConfig(**cfg["train"])
    model_cfg = cfg["model"]
    method = model_cfg["method"]
    hidden = tuple(model_cfg["hidden"])
    ds = splits.train
    if method == "fvib":
        net, targets, hist = train(ds, tc, hidden, strict=cfg["data"]["strict_balance"])
        doc = ckpt.fvib_checkpoint(net, targets, tc, cfg["data"], model_cfg,
                                   cfg["eval"]["samples"])
        return doc, ("epoch", "loss", "j_fvib"), hist.rows()
    if method in ("vib", "taylor"):
        trainer = vib_train if method == "vib" else taylor_train
        enc, hist = trainer(ds, model_cfg["beta"], tc, model_cfg["kappa"], hidden)
        doc = ckpt.encoder_checkpoint(enc, tc, cfg["data"], model_cfg)
        return doc, ("epoch", "taylor_objective"), list(enumerate(hist.objective))
    if method == "ce":
        model, losses = ce_train(ds, tc, hidden)
        doc = ckpt.ce_checkpoint(model, tc, cfg["data"], model_cfg)
        return doc, ("epoch", "loss"), list(enumerate(losses, start=1))
    raise ConfigError(f"model.method: unknown method {method!r}")


@dataclass
class SweepResult:
    rows: list
    meta: dict = field(default_factory=dict)

    def to_csv(self):
        buf = io.StringIO()
        buf.write(SWEEP_HEADER + "\n")
        buf.write("# " + " ".join(f"{k}={self.meta[k]}" for k in sorted(self.meta)) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for row in self.rows:
            w.writerow([repr(float(row[c])) for c in SWEEP_COLUMNS])
        return buf.getvalue()


def sweep_row(model, beta, h_train, y_train, h_test, y_test, samples, seed, bins):
    m = model.at(beta)
    clf = m.classifier()
    pred_tr, comp_tr = ib_bounds(m.encode(h=h_train), y_train, clf, samples, seed)
    pred_te, comp_te = ib_bounds(m.encode(h=h_test), y_test, clf, samples, seed)
    rep = report(m.predict(h=h_test, seed=seed, samples=samples), y_test, bins)
    return {"beta": beta, "prediction_bound_train": pred_tr, "compression_bound_train": comp_tr,
            "prediction_bound_test": pred_te, "compression_bound_test": comp_te,
            "accuracy_test": rep.accuracy, "nll_test": rep.nll, "ece_test": rep.ece}


def sweep(doc, grid=None, samples=30, seed=0, ct=None, bins=DEFAULT_BINS, workers=1,
          splits=None):
    """Evaluate one trained FVIB checkpoint across a beta grid; no training happens."""
    if doc["kind"] != "fvib":
        raise ConfigError(f"sweep needs an fvib checkpoint, got kind {doc['kind']!r}")
    grid = sorted(STANDARD_BETA_GRID if grid is None else grid)
    bad = [b for b in grid if not 0.0 <= b <= 1.0]
    if bad:
        raise ConfigError(f"beta grid values outside [0, 1]: {bad}")
    model = ckpt.load_model(doc, ct=ct, samples=samples)
    splits = splits or load_splits(doc["data"])
    if splits.test is None:
        raise DataError("sweep needs a test split (data.fractions[2] > 0)")
    h_train = model.net(splits.train.features)
    h_test = model.net(splits.test.features)
    args = (h_train, splits.train.labels, h_test, splits.test.labels, samples, seed, bins)

    def one(beta):
        return sweep_row(model, beta, *args)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(one, grid))
    else:
        rows = [one(b) for b in grid]
    meta = {"samples": samples, "seed": seed, "ct": "on" if model.ct_enabled else "off",
            "d": model.d}
    return SweepResult(rows, meta)


def select_discrete_beta(model, h_val, y_val, grid, samples, seed, bins=DEFAULT_BINS,
                         min_accuracy=0.5):
    """Grid beta minimizing validation ECE among models above ``min_accuracy``."""
    best = None
    for beta in sorted(grid):
        rep = report(model.at(beta).predict(h=h_val, seed=seed, samples=samples), y_val, bins)
        if rep.accuracy <= min_accuracy:
            continue
        if best is None or rep.ece < best[1]:
            best = (beta, rep.ece)
    if best is None:
        warnings.warn("no grid beta exceeds the accuracy filter; using beta=0", stacklevel=2)
        return 0.0
    return best[0]


CALIBRATION_METHODS = ("beta0", "discrete", "continuous", "ts")


def calibrate(doc, methods=("beta0", "discrete", "continuous"), samples=30, seed=0,
              bins=DEFAULT_BINS, grid=None, baseline_doc=None, splits=None):
    """Compare calibration strategies; choices use the val split, reports use test."""
    methods = list(methods)
    if not methods:
        raise ConfigError("at least one calibration method is required")
    unknown = [m for m in methods if m not in CALIBRATION_METHODS]
    if unknown:
        raise ConfigError(f"unknown calibration methods {unknown}; "
                          f"choose from {CALIBRATION_METHODS}")
    if "ts" in methods and baseline_doc is None:
        raise ConfigError("method 'ts' needs a cross-entropy baseline checkpoint (--baseline)")
    splits = splits or load_splits(doc["data"])
    if splits.val is None:
        raise DataError("calibration needs a validation split (data.fractions[1] > 0)")
    if splits.test is None:
        raise DataError("calibration needs a test split (data.fractions[2] > 0)")
    x_val, y_val = splits.val.features, splits.val.labels
    x_test, y_test = splits.test.features, splits.test.labels
    reports = []
    model = None
    if any(m != "ts" for m in methods):
        model = ckpt.load_model(doc, samples=samples)
        h_val, h_test = model.net(x_val), model.net(x_test)

    def fvib_report(beta, tag, **extra):
        probs = model.at(beta).predict(h=h_test, seed=seed, samples=samples)
        return report(probs, y_test, bins, method=tag, beta=float(beta), **extra)

    for method in methods:
        if method == "beta0":
            reports.append(fvib_report(0.0, "fvib-beta0"))
        elif method == "discrete":
            beta = select_discrete_beta(model, h_val, y_val, grid or STANDARD_BETA_GRID,
                                        samples, seed, bins)
            reports.append(fvib_report(beta, "fvib-discrete"))
        elif method == "continuous":
            beta, val_rep = optimize_beta(model, x_val, y_val, samples, seed, bins=bins)
            reports.append(fvib_report(beta, "fvib-continuous", val_nll=val_rep.nll))
        elif method == "ts":
            base = ckpt.load_model(baseline_doc)
            t_star = optimize_temperature(base.logits(x_val), y_val)
            reports.append(report(base.predict(x_test, 1.0), y_test, bins,
                                  method="ce-baseline", temperature=1.0))
            reports.append(report(base.predict(x_test, t_star), y_test, bins,
                                  method="ce-ts", temperature=t_star))
    return reports


def comparison_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["method", "beta", "temperature", "ece", "nll", "accuracy"])
    for r in reports:
        w.writerow([r.method, "" if r.beta is None else repr(r.beta),
                    "" if r.temperature is None else repr(r.temperature),
                    repr(r.ece), repr(r.nll), repr(r.accuracy)])
    return buf.getvalue()


def evaluate(doc, beta=None, samples=1, seed=0, bins=DEFAULT_BINS, split_name="test",
             splits=None):
    """Accuracy, NLL and ECE of a checkpoint on one split (``samples=1`` by default)."""
    splits = splits or load_splits(doc["data"])
    ds = getattr(splits, split_name)
    if ds is None:
        raise DataError(f"no {split_name} split in this data configuration")
    kind = doc["kind"]
    model = ckpt.load_model(doc, beta=beta, samples=samples)
    if kind == "fvib":
        probs = model.predict(ds.features, seed=seed, samples=samples)
        used_beta = model.beta
    elif kind == "ce":
        probs = model.predict(ds.features)
        used_beta = None
    else:
        probs = model.predict(ds.features, seed=seed, samples=samples)
        used_beta = model.beta
    return report(probs, ds.labels, bins, method=f"{kind}-eval", beta=used_beta,
                  samples=samples, split=split_name)
