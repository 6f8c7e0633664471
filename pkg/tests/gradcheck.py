"""Central-difference gradient checks shared by the model and acceptance tests."""

import numpy as np

from parthoe.model import backward, make_targets, total_loss


def numeric_gradient(params, joints, p, h, lam, name, idx, eps=1e-5):
    w = params.layers[name]
    old = w[idx]
    w[idx] = old + eps
    up = total_loss(params, joints, p, h, lam).total
    w[idx] = old - eps
    down = total_loss(params, joints, p, h, lam).total
    w[idx] = old
    return (up - down) / (2 * eps)


def gradient_check(params, joints, theta, lam, max_per_layer=None, rng=None):
    """Worst per-layer relative error between analytic and central-difference gradients."""
    p, h = make_targets(theta, params.config)
    parts, grads = backward(params, joints, p, h, lam)
    worst = 0.0
    for name, g in grads.items():
        idxs = list(np.ndindex(g.shape))
        if max_per_layer is not None and len(idxs) > max_per_layer:
            pick = rng.choice(len(idxs), size=max_per_layer, replace=False)
            idxs = [idxs[i] for i in pick]
        num = np.array([numeric_gradient(params, joints, p, h, lam, name, i) for i in idxs])
        ana = np.array([g[i] for i in idxs])
        scale = max(np.linalg.norm(ana), np.linalg.norm(num), 1e-10)
        worst = max(worst, np.linalg.norm(ana - num) / scale)
    return worst, parts
