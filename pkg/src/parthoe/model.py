"""Fully connected orientation / confidence / heatmap network and its losses.

Architecture: ``3 * n_joints`` inputs -> tanh trunk -> three linear heads

* orientation: 72 logits, softmax -> ``p_hat``
* confidence: 1 logit, sigmoid clamped to ``[eps, 1 - eps]`` -> ``c``
* heatmaps: ``n_joints * H * W`` values -> ``h_hat``

Training loss for one sample, averaged over a batch::

    L = sum_i (p'_i - p_i)^2 + lam * (-log c) + L_kpt
    p' = c * p_hat + (1 - c) * p

with ``L_kpt`` the mean squared heatmap error over joints and pixels.
"""

from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_rng
from .circular import DEFAULT_SIGMA, N_BINS, circular_gaussian_batch, decode_orientation, deg_to_bin
from .errors import InvalidInputError, ModelConfigError
from .skeleton import (
    DEFAULT_HEATMAP_SIGMA,
    DEFAULT_HEATMAP_SIZE,
    N_JOINTS,
    clean_joints,
    make_heatmaps,
)

CONF_EPS = 1e-7
PARAMS_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    hidden: tuple = (128, 128)
    n_joints: int = N_JOINTS
    hm_width: int = DEFAULT_HEATMAP_SIZE
    hm_height: int = DEFAULT_HEATMAP_SIZE
    hm_sigma: float = DEFAULT_HEATMAP_SIGMA

    @property
    def n_inputs(self):
        return 3 * self.n_joints

    @property
    def n_heat(self):
        return self.n_joints * self.hm_width * self.hm_height

    def layer_shapes(self):
        shapes = {}
        prev = self.n_inputs
        for k, width in enumerate(self.hidden):
            shapes[f"trunk{k}.weight"] = (prev, width)
            shapes[f"trunk{k}.bias"] = (1, width)
            prev = width
        shapes["orient.weight"] = (prev, N_BINS)
        shapes["orient.bias"] = (1, N_BINS)
        shapes["conf.weight"] = (prev, 1)
        shapes["conf.bias"] = (1, 1)
        shapes["heat.weight"] = (prev, self.n_heat)
        shapes["heat.bias"] = (1, self.n_heat)
        return shapes

    def to_dict(self):
        return {
            "hidden": list(self.hidden),
            "n_joints": self.n_joints,
            "hm_width": self.hm_width,
            "hm_height": self.hm_height,
            "hm_sigma": self.hm_sigma,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            hidden=tuple(int(h) for h in d["hidden"]),
            n_joints=int(d["n_joints"]),
            hm_width=int(d["hm_width"]),
            hm_height=int(d["hm_height"]),
            hm_sigma=float(d["hm_sigma"]),
        )


@dataclass
class ModelParams:
    config: ModelConfig
    layers: dict = field(default_factory=dict)
    version: int = PARAMS_VERSION

    def __post_init__(self):
        expected = self.config.layer_shapes()
        if set(expected) != set(self.layers):
            raise ModelConfigError(
                f"layer names {sorted(self.layers)} do not match config {sorted(expected)}"
            )
        for name, shape in expected.items():
            if self.layers[name].shape != shape:
                raise ModelConfigError(f"{name}: shape {self.layers[name].shape}, expected {shape}")

    def copy(self):
        return ModelParams(self.config, {k: v.copy() for k, v in self.layers.items()}, self.version)

    def all_finite(self):
        return all(np.all(np.isfinite(v)) for v in self.layers.values())


def init_params(config=ModelConfig(), seed=0):
    """Glorot-normal weights, zero biases."""
    rng = derive_rng(seed, "init")
    layers = {}
    for name, (rows, cols) in config.layer_shapes().items():
        if name.endswith(".bias"):
            layers[name] = np.zeros((rows, cols))
        else:
            layers[name] = rng.normal(0.0, np.sqrt(2.0 / (rows + cols)), size=(rows, cols))
    return ModelParams(config, layers)


def zero_params(config=ModelConfig()):
    return ModelParams(config, {k: np.zeros(s) for k, s in config.layer_shapes().items()})


@dataclass
class LossBreakdown:
    l_p_prime: float
    l_c: float
    l_kpt: float
    lam: float
    total: float

    def as_dict(self):
        return {
            "l_p_prime": self.l_p_prime,
            "l_c": self.l_c,
            "l_kpt": self.l_kpt,
            "lambda": self.lam,
            "total": self.total,
        }


@dataclass
class ForwardResult:
    p_hat: np.ndarray
    c: np.ndarray
    h_hat: np.ndarray
    activations: list
    conf_clamped: np.ndarray


def encode_inputs(joints, n_joints=N_JOINTS):
    """(B, 23, 3) skeletons -> (B, 3 * n_joints) inputs with invisible joints zeroed."""
    joints = np.asarray(joints, dtype=float)[:, :n_joints]
    vis = (joints[..., 2] > 0).astype(float)
    x = np.stack([joints[..., 0] * vis, joints[..., 1] * vis, vis], axis=-1)
    return x.reshape(len(joints), -1)


def softmax(z):
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _as_batch(joints):
    joints = np.asarray(joints, dtype=float)
    if joints.ndim == 2:
        return joints[None], True
    if joints.ndim != 3 or joints.shape[-1] != 3:
        raise InvalidInputError(f"expected (B, J, 3) skeletons, got shape {joints.shape}")
    return joints, False


def _forward_batch(params, joints):
    cfg = params.config
    if joints.shape[1] < cfg.n_joints:
        raise ModelConfigError(f"model expects {cfg.n_joints} joints, input has {joints.shape[1]}")
    L = params.layers
    a = encode_inputs(joints, cfg.n_joints)
    acts = [a]
    for k in range(len(cfg.hidden)):
        a = np.tanh(a @ L[f"trunk{k}.weight"] + L[f"trunk{k}.bias"])
        acts.append(a)
    p_hat = softmax(a @ L["orient.weight"] + L["orient.bias"])
    raw_c = _sigmoid(a @ L["conf.weight"] + L["conf.bias"])[:, 0]
    c = np.clip(raw_c, CONF_EPS, 1.0 - CONF_EPS)
    clamped = c != raw_c
    h_hat = (a @ L["heat.weight"] + L["heat.bias"]).reshape(
        len(joints), cfg.n_joints, cfg.hm_height, cfg.hm_width
    )
    return ForwardResult(p_hat, c, h_hat, acts, clamped)


def forward(params, joints):
    """Run the network on one skeleton (J, 3) or a batch (B, J, 3).

    Returns ``(p_hat, c, h_hat)``; for a single skeleton the batch axis is
    dropped and ``c`` is a float.
    """
    batch, single = _as_batch(joints)
    out = _forward_batch(params, batch)
    if single:
        return out.p_hat[0], float(out.c[0]), out.h_hat[0]
    return out.p_hat, out.c, out.h_hat


def predict(params, joints):
    """Decoded orientation in degrees and confidence."""
    p_hat, c, _ = forward(params, joints)
    return decode_orientation(p_hat), c


def interp_dist(p_hat, p, c):
    c = np.asarray(c, dtype=float)
    if c.ndim:
        c = c[..., None]
    return c * np.asarray(p_hat) + (1.0 - c) * np.asarray(p)


def loss_orientation(p_prime, p):
    """Squared distance between two distributions (per row for batches)."""
    return np.sum((np.asarray(p_prime) - np.asarray(p)) ** 2, axis=-1)


def loss_conf(c):
    return -np.log(c)


def loss_kpt(h_hat, h):
    """Mean over joints and pixels of the squared heatmap error.

    Shapes are (J, H, W), or (B, J, H, W) which gives one value per sample.
    """
    h_hat = np.asarray(h_hat, dtype=float)
    h = np.asarray(h, dtype=float)
    if h_hat.shape != h.shape:
        raise InvalidInputError(f"heatmap shapes differ: {h_hat.shape} vs {h.shape}")
    return np.mean((h_hat - h) ** 2, axis=(-3, -2, -1))


def update_lambda(lam, l_c_mean, beta=0.3, gamma=0.01, lo=1e-4, hi=10.0):
    """Grow lambda while confidence is too low on average, shrink it otherwise."""
    lam = lam * (1.0 + gamma) if l_c_mean > beta else lam / (1.0 + gamma)
    return min(max(lam, lo), hi)


def make_targets(theta_deg, config, sigma=DEFAULT_SIGMA):
    """Orientation targets (B, 72) and heatmap targets (B, J, H, W) for yaws."""
    theta_deg = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    p = circular_gaussian_batch(deg_to_bin(theta_deg), sigma)
    h = heatmap_targets(clean_joints(theta_deg), config)
    return p, h


def heatmap_targets(full_joints, config):
    return make_heatmaps(full_joints[:, : config.n_joints], config.hm_width, config.hm_height, config.hm_sigma)


def _breakdown(out, p, h, lam):
    lp = loss_orientation(interp_dist(out.p_hat, p, out.c), p)
    lc = loss_conf(out.c)
    lk = loss_kpt(out.h_hat, h)
    l_p, l_c, l_k = float(np.mean(lp)), float(np.mean(lc)), float(np.mean(lk))
    return LossBreakdown(l_p, l_c, l_k, float(lam), l_p + lam * l_c + l_k)


def total_loss(params, joints, p, h, lam):
    """Batch-mean loss for given targets ``p`` (B, 72) and ``h`` (B, J, H, W)."""
    batch, single = _as_batch(joints)
    if single:
        p, h = np.asarray(p)[None], np.asarray(h)[None]
    return _breakdown(_forward_batch(params, batch), p, h, lam)


def backward(params, joints, p, h, lam):
    """Loss breakdown and gradient of the batch-mean total loss for every layer."""
    batch, single = _as_batch(joints)
    if single:
        p, h = np.asarray(p)[None], np.asarray(h)[None]
    cfg = params.config
    L = params.layers
    out = _forward_batch(params, batch)
    n = len(batch)
    feat = out.activations[-1]

    diff = out.p_hat - p
    dist = np.sum(diff ** 2, axis=-1)
    c = out.c

    # L_p' = c^2 * |p_hat - p|^2
    g_p = (2.0 * (c ** 2)[:, None] * diff) / n
    g_logits = out.p_hat * (g_p - np.sum(g_p * out.p_hat, axis=-1, keepdims=True))

    g_c = (2.0 * c * dist - lam / c) / n
    g_zc = np.where(out.conf_clamped, 0.0, g_c * c * (1.0 - c))[:, None]

    g_h = (2.0 * (out.h_hat - h) / (cfg.n_joints * cfg.hm_height * cfg.hm_width) / n).reshape(n, -1)

    grads = {
        "orient.weight": feat.T @ g_logits,
        "orient.bias": g_logits.sum(axis=0, keepdims=True),
        "conf.weight": feat.T @ g_zc,
        "conf.bias": g_zc.sum(axis=0, keepdims=True),
        "heat.weight": feat.T @ g_h,
        "heat.bias": g_h.sum(axis=0, keepdims=True),
    }
    g_a = g_logits @ L["orient.weight"].T + g_zc @ L["conf.weight"].T + g_h @ L["heat.weight"].T
    for k in reversed(range(len(cfg.hidden))):
        a = out.activations[k + 1]
        g_z = g_a * (1.0 - a ** 2)
        grads[f"trunk{k}.weight"] = out.activations[k].T @ g_z
        grads[f"trunk{k}.bias"] = g_z.sum(axis=0, keepdims=True)
        if k:
            g_a = g_z @ L[f"trunk{k}.weight"].T

    return _breakdown(out, p, h, lam), grads


def sample_loss(params, joints, theta_deg, lam, sigma=DEFAULT_SIGMA):
    """:func:`total_loss` with targets built from the ground-truth yaw(s)."""
    batch, _ = _as_batch(joints)
    p, h = make_targets(theta_deg, params.config, sigma)
    return total_loss(params, batch, p, h, lam)


def sample_gradient(params, joints, theta_deg, lam, sigma=DEFAULT_SIGMA):
    batch, _ = _as_batch(joints)
    p, h = make_targets(theta_deg, params.config, sigma)
    return backward(params, batch, p, h, lam)
