"""Circular angle arithmetic and the 72-bin orientation encoding.

Angles are yaw in degrees, 0 = facing the camera, increasing counter-clockwise
seen from above. Bin ``i`` covers ``[5i - 2.5, 5i + 2.5)``.
"""

import numpy as np

from .errors import InvalidAngleError, InvalidInputError

N_BINS = 72
BIN_WIDTH = 360.0 / N_BINS
DEFAULT_SIGMA = 3.0


def normalize_deg(raw):
    """Map an angle (scalar or array) into [0, 360)."""
    arr = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidAngleError(f"angle must be finite, got {raw!r}")
    out = np.mod(arr, 360.0)
    # tiny negatives round up to exactly 360.0
    out = np.where(out >= 360.0, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


def deg_to_bin(theta):
    theta = normalize_deg(theta)
    idx = np.floor((np.asarray(theta) + BIN_WIDTH / 2) / BIN_WIDTH).astype(int) % N_BINS
    if idx.ndim == 0:
        return int(idx)
    return idx


def bin_to_deg(i):
    i = np.asarray(i)
    if np.any((i < 0) | (i >= N_BINS)):
        raise InvalidInputError(f"bin index out of range: {i}")
    out = i * BIN_WIDTH
    if out.ndim == 0:
        return float(out)
    return out.astype(float)


def circ_diff(a, b):
    """Smallest absolute angular difference, in [0, 180]."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), 360.0)
    out = np.minimum(d, 360.0 - d)
    if out.ndim == 0:
        return float(out)
    return out


def circ_bin_dist(i, l):
    d = np.abs(np.asarray(i) - np.asarray(l)) % N_BINS
    out = np.minimum(d, N_BINS - d)
    if out.ndim == 0:
        return int(out)
    return out


def _gaussian_profile(sigma):
    if not sigma > 0:
        raise InvalidInputError(f"sigma must be positive, got {sigma}")
    d = np.arange(N_BINS // 2 + 1, dtype=float)
    w = np.exp(-(d ** 2) / (2.0 * sigma ** 2))
    # summed in distance order, independent of the label, so rotated targets
    # are bit-identical
    total = w[0] + w[N_BINS // 2] + 2.0 * np.sum(w[1:N_BINS // 2])
    return w / total


def circular_gaussian(l_gt, sigma=DEFAULT_SIGMA):
    """72-bin Gaussian target centred on ``l_gt`` with wrap-around distance.

    The closed form is renormalized so the entries sum to one; the
    ``1/(sqrt(2 pi) sigma)`` prefactor cancels in the normalization.
    """
    if not 0 <= int(l_gt) < N_BINS:
        raise InvalidInputError(f"label out of range: {l_gt}")
    profile = _gaussian_profile(sigma)
    return profile[circ_bin_dist(np.arange(N_BINS), int(l_gt))]


def circular_gaussian_batch(labels, sigma=DEFAULT_SIGMA):
    labels = np.asarray(labels, dtype=int)
    profile = _gaussian_profile(sigma)
    return profile[circ_bin_dist(np.arange(N_BINS)[None, :], labels[:, None])]


def decode_orientation(dist):
    """Degrees of the most probable bin; ties go to the lowest index.

    Accepts a single 72-vector or a (n, 72) batch.
    """
    dist = np.asarray(dist)
    idx = np.argmax(dist, axis=-1)
    return bin_to_deg(idx)


def _check_pairs(pred, gt):
    pred = np.atleast_1d(np.asarray(pred, dtype=float))
    gt = np.atleast_1d(np.asarray(gt, dtype=float))
    if pred.size == 0 or gt.size == 0:
        raise InvalidInputError("prediction and ground-truth lists must be non-empty")
    if pred.shape != gt.shape:
        raise InvalidInputError(f"length mismatch: {pred.shape} vs {gt.shape}")
    return pred, gt


def acc_at(pred, gt, n):
    """Fraction of predictions whose circular error is strictly below ``n`` degrees."""
    pred, gt = _check_pairs(pred, gt)
    return float(np.mean(circ_diff(pred, gt) < n))


def mae(pred, gt):
    pred, gt = _check_pairs(pred, gt)
    return float(np.mean(circ_diff(pred, gt)))


def orientation_metrics(pred, gt):
    """Acc(5), Acc(15), Acc(30) and MAE as a dict."""
    return {
        "acc5": acc_at(pred, gt, 5.0),
        "acc15": acc_at(pred, gt, 15.0),
        "acc30": acc_at(pred, gt, 30.0),
        "mae": mae(pred, gt),
    }
