"""JSON checkpoints for trained models.

Every checkpoint carries the network (``layer_dims``, row-major ``weights``
and ``biases``, ``seed``), the ``train_config`` and the run's ``data`` and
``model`` config sections, so the evaluation splits can be rebuilt from the
file alone. Floats are written with ``repr`` and therefore round-trip exactly.
"""

import hashlib
import json
from pathlib import Path

from .baseline import CrossEntropyModel, VibEncoder
from .errors import DataError
from .net import CHECKPOINT_SCHEMA, DenseNet, TrainConfig
from .simplex import build_target_matrix
from .trainer import instantiate


def encode(kind, net, train_config, data_cfg, model_cfg, **fields):
    doc = {"schema_version": CHECKPOINT_SCHEMA, "kind": kind,
           "train_config": train_config.to_dict(), "data": data_cfg, "model": model_cfg}
    doc.update(net.to_dict())
    doc.update(fields)
    return doc


def fvib_checkpoint(net, targets, train_config, data_cfg, model_cfg, default_samples):
    return encode("fvib", net, train_config, data_cfg, model_cfg,
                  target_matrix_d=targets.d, d=targets.d,
                  ct_enabled=bool(model_cfg.get("ct", True)),
                  c=float(model_cfg.get("confidence", 0.997)),
                  default_S=int(default_samples))


def encoder_checkpoint(enc, train_config, data_cfg, model_cfg):
    return encode(enc.method, enc.net, train_config, data_cfg, model_cfg,
                  classifier=enc.weights.tolist(), beta=enc.beta, kappa=enc.kappa,
                  d=enc.d)


def ce_checkpoint(model, train_config, data_cfg, model_cfg):
    return encode("ce", model.net, train_config, data_cfg, model_cfg,
                  d=model.d, temperature=model.temperature)


def dumps(doc):
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def save(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc))
    return path


def read(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"checkpoint not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not a valid checkpoint ({exc})") from None
    if doc.get("schema_version") != CHECKPOINT_SCHEMA:
        raise DataError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    return doc


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_model(doc, beta=None, ct=None, samples=None):
    """Rebuild the model stored in ``doc``.

    FVIB checkpoints need ``beta`` (default 0) since beta is an evaluation
    argument; baseline checkpoints carry their trained beta.
    """
    net = DenseNet.from_dict(doc)
    kind = doc["kind"]
    if kind == "fvib":
        targets = build_target_matrix(doc["target_matrix_d"])
        return instantiate(net, targets, 0.0 if beta is None else beta,
                           doc["ct_enabled"] if ct is None else ct, doc["c"],
                           doc["default_S"] if samples is None else samples)
    if kind in ("vib", "taylor"):
        return VibEncoder.from_dict({"net": doc, "classifier": doc["classifier"],
                                     "beta": doc["beta"], "method": kind})
    if kind == "ce":
        return CrossEntropyModel(net, doc.get("temperature", 1.0))
    raise DataError(f"unknown checkpoint kind {kind!r}")


def train_config(doc):
    return TrainConfig(**doc["train_config"])
