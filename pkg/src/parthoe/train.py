"""Minibatch AdamW training loop, checkpoints and metric history."""

import csv
import json
import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from ._rng import derive_rng
from .circular import DEFAULT_SIGMA, acc_at, circular_gaussian_batch, deg_to_bin, mae
from .errors import InvalidInputError, TrainingDivergedError
from .model import (
    ModelConfig,
    ModelParams,
    backward,
    heatmap_targets,
    init_params,
    predict,
    update_lambda,
)
from .skeleton import DEFAULT_HEATMAP_SIGMA, DEFAULT_HEATMAP_SIZE, N_JOINTS, clean_joints

log = logging.getLogger(__name__)

HISTORY_FIELDS = ("epoch", "l_p_prime", "l_c", "l_kpt", "lambda", "total", "val_acc30", "val_mae")


@dataclass
class TrainConfig:
    hidden: tuple = (128, 128)
    lr: float = 0.001
    weight_decay: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    epochs: int = 80
    batch_size: int = 64
    sigma: float = DEFAULT_SIGMA
    lambda_init: float = 0.1
    lambda_budget: float = 0.3
    lambda_gamma: float = 0.01
    n_joints: int = N_JOINTS
    hm_size: int = DEFAULT_HEATMAP_SIZE
    hm_sigma: float = DEFAULT_HEATMAP_SIGMA
    val_fraction: float = 0.1
    seed: int = 0

    def model_config(self):
        return ModelConfig(
            hidden=tuple(self.hidden), n_joints=self.n_joints,
            hm_width=self.hm_size, hm_height=self.hm_size, hm_sigma=self.hm_sigma,
        )

    def to_dict(self):
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InvalidInputError(f"unknown training options: {sorted(unknown)}")
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(int(h) for h in d["hidden"])
        return cls(**d)


class AdamW:
    """Adam moments with decoupled weight decay on weight matrices only."""

    def __init__(self, params, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-4):
        self.lr, self.beta1, self.beta2, self.eps, self.wd = lr, beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(v) for k, v in params.layers.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.layers.items()}
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, w in params.layers.items():
            g = grads[name]
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.wd and name.endswith(".weight"):
                w -= self.lr * self.wd * w
            w -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def split_validation(dataset, fraction, seed):
    """Deterministic (train, val) split; ``fraction`` 0 returns (dataset, None)."""
    n = len(dataset)
    n_val = int(round(n * fraction))
    if n_val == 0 or n_val >= n:
        return dataset, None
    perm = derive_rng(seed, "val-split").permutation(n)
    return dataset[np.sort(perm[n_val:])], dataset[np.sort(perm[:n_val])]


def evaluate(params, dataset):
    pred, conf = predict(params, dataset.joints)
    return {
        "acc30": acc_at(pred, dataset.theta_deg, 30.0),
        "mae": mae(pred, dataset.theta_deg),
        "mean_conf": float(np.mean(conf)),
    }


def train(dataset, config=None, val=None, callback=None):
    """Train from scratch; returns ``(params, history)``.

    ``history`` holds one dict per epoch with the sample-weighted mean loss
    components, lambda at the end of the epoch and validation Acc(30)/MAE.
    When ``val`` is None, ``config.val_fraction`` of the data is held out.
    """
    config = config or TrainConfig()
    if len(dataset) == 0:
        raise InvalidInputError("training set is empty")
    if config.epochs < 0 or config.batch_size <= 0:
        raise InvalidInputError("epochs must be >= 0 and batch_size > 0")
    if val is None:
        dataset, val = split_validation(dataset, config.val_fraction, config.seed)

    mcfg = config.model_config()
    params = init_params(mcfg, config.seed)
    opt = AdamW(params, config.lr, config.beta1, config.beta2, config.adam_eps, config.weight_decay)
    lam = config.lambda_init

    p_all = circular_gaussian_batch(deg_to_bin(dataset.theta_deg), config.sigma)
    full_all = clean_joints(dataset.theta_deg)
    order_rng = derive_rng(config.seed, "batch-order")
    n = len(dataset)

    history = []
    for epoch in range(1, config.epochs + 1):
        order = order_rng.permutation(n)
        sums = np.zeros(4)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            h = heatmap_targets(full_all[idx], mcfg)
            with np.errstate(over="ignore", invalid="ignore"):
                parts, grads = backward(params, dataset.joints[idx], p_all[idx], h, lam)
            if not np.isfinite(parts.total):
                raise TrainingDivergedError(epoch)
            sums += len(idx) * np.array([parts.l_p_prime, parts.l_c, parts.l_kpt, parts.total])
            opt.step(params, grads)
            lam = update_lambda(lam, parts.l_c, config.lambda_budget, config.lambda_gamma)
        if not params.all_finite():
            raise TrainingDivergedError(epoch, f"training diverged at epoch {epoch}: non-finite parameters")
        l_p, l_c, l_k, total = sums / n
        row = {"epoch": epoch, "l_p_prime": l_p, "l_c": l_c, "l_kpt": l_k, "lambda": lam, "total": total}
        if val is not None:
            metrics = evaluate(params, val)
            row["val_acc30"], row["val_mae"] = metrics["acc30"], metrics["mae"]
        else:
            row["val_acc30"], row["val_mae"] = float("nan"), float("nan")
        history.append(row)
        log.info("epoch %d total %.5f lambda %.4f val acc30 %.3f mae %.2f",
                 epoch, total, lam, row["val_acc30"], row["val_mae"])
        if callback is not None:
            callback(row)
    return params, history


def save_checkpoint(path, params, config=None):
    doc = {
        "version": params.version,
        "config": {"model": params.config.to_dict(), "train": config.to_dict() if config else None},
        "layers": [
            {"name": name, "rows": int(w.shape[0]), "cols": int(w.shape[1]), "data": w.ravel().tolist()}
            for name, w in params.layers.items()
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Returns ``(params, train_config_or_None)``."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    mcfg = ModelConfig.from_dict(doc["config"]["model"])
    layers = {
        layer["name"]: np.asarray(layer["data"], dtype=float).reshape(layer["rows"], layer["cols"])
        for layer in doc["layers"]
    }
    tcfg = doc["config"].get("train")
    return ModelParams(mcfg, layers, int(doc["version"])), (TrainConfig.from_dict(tcfg) if tcfg else None)


def write_history(path, history):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=HISTORY_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in history:
            writer.writerow({k: repr(float(row[k])) if k != "epoch" else row[k] for k in HISTORY_FIELDS})
