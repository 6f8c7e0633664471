"""Synthetic 23-joint skeletons at known yaw, occlusion modes and heatmap targets.

Joint order is COCO-17 followed by six foot joints::

    0 nose, 1-2 eyes, 3-4 ears, 5-6 shoulders, 7-8 elbows, 9-10 wrists,
    11-12 hips, 13-14 knees, 15-16 ankles,
    17 left big toe, 18 left small toe, 19 left heel,
    20 right big toe, 21 right small toe, 22 right heel

(left before right within each pair). A skeleton is a ``(23, 3)`` float array
of ``(x, y, visible)`` rows with image-normalized ``x`` to the right and ``y``
downwards; invisible rows are all zeros.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import derive_rng
from .circular import normalize_deg
from .errors import InvalidInputError

JOINT_NAMES = (
    "nose", "left_eye", "right_eye", "left_ear", "right_ear",
    "left_shoulder", "right_shoulder", "left_elbow", "right_elbow",
    "left_wrist", "right_wrist", "left_hip", "right_hip",
    "left_knee", "right_knee", "left_ankle", "right_ankle",
    "left_big_toe", "left_small_toe", "left_heel",
    "right_big_toe", "right_small_toe", "right_heel",
)
N_JOINTS = 23
N_BODY_JOINTS = 17
LEFT_RIGHT_PAIRS = (
    (1, 2), (3, 4), (5, 6), (7, 8), (9, 10), (11, 12), (13, 14), (15, 16),
    (17, 20), (18, 21), (19, 22),
)
UPPER_JOINTS = tuple(range(0, 11))
LOWER_JOINTS = tuple(range(11, 23))

BODY_HEIGHT_M = 1.7
CONVENTION = "0deg-facing-camera-ccw"
DEFAULT_HEATMAP_SIZE = 16
DEFAULT_HEATMAP_SIGMA = 1.5

# (left, forward, up) in metres for the left side; right side is mirrored.
_LEFT_SIDE = {
    "eye": (0.035, 0.08, 1.66),
    "ear": (0.075, 0.0, 1.63),
    "shoulder": (0.19, 0.0, 1.42),
    "elbow": (0.22, 0.02, 1.12),
    "wrist": (0.22, 0.08, 0.86),
    "hip": (0.11, 0.0, 0.92),
    "knee": (0.11, 0.03, 0.50),
    "ankle": (0.11, -0.02, 0.08),
    "big_toe": (0.09, 0.17, 0.0),
    "small_toe": (0.15, 0.13, 0.0),
    "heel": (0.11, -0.06, 0.0),
}


def template_skeleton():
    """Upright, bilaterally symmetric template, shape (23, 3).

    Columns are (lateral towards the person's left, forward, up) in metres.
    The person faces +forward; heels and toes rest on the ground (height 0).
    """
    pts = np.zeros((N_JOINTS, 3))
    pts[0] = (0.0, 0.10, 1.62)
    for idx, name in enumerate(JOINT_NAMES[1:], start=1):
        side, part = name.split("_", 1)
        lat, fwd, up = _LEFT_SIDE[part]
        pts[idx] = (lat if side == "left" else -lat, fwd, up)
    return pts


HIP_HEIGHT_M = _LEFT_SIDE["hip"][2]


@dataclass(frozen=True)
class OcclusionMode:
    kind: str = "full"
    p: float = 0.0

    def __post_init__(self):
        if self.kind not in ("full", "lower", "upper", "drop"):
            raise InvalidInputError(f"unknown occlusion mode {self.kind!r}")
        if self.kind == "drop" and not 0.0 <= self.p < 1.0:
            raise InvalidInputError(f"drop probability must be in [0, 1), got {self.p}")

    @classmethod
    def parse(cls, text):
        """``full``, ``lower``, ``upper`` or ``drop:<p>``."""
        text = text.strip().lower()
        if text.startswith("drop"):
            _, _, p = text.partition(":")
            return cls("drop", float(p) if p else 0.3)
        return cls(text)

    def __str__(self):
        if self.kind == "drop":
            return f"drop:{self.p:g}"
        return self.kind


FULL = OcclusionMode("full")
LOWER_ONLY = OcclusionMode("lower")
UPPER_ONLY = OcclusionMode("upper")


@dataclass
class Sample:
    skeleton: np.ndarray
    gt_orientation: float
    mode: OcclusionMode
    id: int = 0

    def to_record(self):
        return {
            "id": int(self.id),
            "theta_deg": float(self.gt_orientation),
            "mode": str(self.mode),
            "joints": [[float(x), float(y), int(v)] for x, y, v in self.skeleton],
        }

    @classmethod
    def from_record(cls, rec):
        joints = np.asarray(rec["joints"], dtype=float)
        if joints.shape != (N_JOINTS, 3):
            raise InvalidInputError(f"record {rec.get('id')} has joints of shape {joints.shape}")
        return cls(joints, normalize_deg(rec["theta_deg"]), OcclusionMode.parse(rec["mode"]), int(rec["id"]))


@dataclass
class SampleSet:
    """Column-oriented view of many samples, as consumed by training."""

    joints: np.ndarray  # (n, 23, 3)
    theta_deg: np.ndarray  # (n,)
    modes: list = field(default_factory=list)
    ids: np.ndarray = None

    def __len__(self):
        return len(self.theta_deg)

    def __getitem__(self, idx):
        idx = np.asarray(idx)
        return SampleSet(
            self.joints[idx], self.theta_deg[idx],
            [self.modes[i] for i in np.atleast_1d(idx)], self.ids[idx],
        )

    @classmethod
    def from_samples(cls, samples):
        if not samples:
            return cls(np.zeros((0, N_JOINTS, 3)), np.zeros(0), [], np.zeros(0, dtype=int))
        return cls(
            np.stack([s.skeleton for s in samples]),
            np.array([s.gt_orientation for s in samples], dtype=float),
            [s.mode for s in samples],
            np.array([s.id for s in samples], dtype=int),
        )

    def samples(self):
        return [
            Sample(self.joints[i], float(self.theta_deg[i]), self.modes[i], int(self.ids[i]))
            for i in range(len(self))
        ]


def project(theta_deg, points=None):
    """Rotate the template by yaw and project orthographically.

    Returns (..., 23, 2) image coordinates in body heights, x right, y down.
    ``theta_deg`` may be a scalar or an array.
    """
    if points is None:
        points = template_skeleton()
    th = np.deg2rad(np.asarray(theta_deg, dtype=float))[..., None]
    c, s = np.cos(th), np.sin(th)
    lat, fwd, up = points[:, 0], points[:, 1], points[:, 2]
    x = lat * c + fwd * s
    y = -up * np.ones_like(x)
    return np.stack([x, y], axis=-1) / BODY_HEIGHT_M


def visibility_mask(mode, rng=None):
    vis = np.zeros(N_JOINTS, dtype=bool)
    if mode.kind == "full":
        vis[:] = True
    elif mode.kind == "lower":
        vis[list(LOWER_JOINTS)] = True
    elif mode.kind == "upper":
        vis[list(UPPER_JOINTS)] = True
    else:
        if rng is None:
            raise InvalidInputError("random drop needs a random generator")
        while not vis.any():
            vis = rng.random(N_JOINTS) >= mode.p
    return vis


def normalize_to_box(xy, visible):
    """Scale visible points into [0, 1] by the larger bounding-box side.

    The aspect ratio is preserved and the shorter side is centred. Works on a
    single skeleton (23, 2) or a batch (n, 23, 2); invisible rows become 0.
    """
    xy = np.asarray(xy, dtype=float)
    visible = np.asarray(visible, dtype=bool)
    big = np.where(visible[..., None], xy, np.inf)
    small = np.where(visible[..., None], xy, -np.inf)
    lo = big.min(axis=-2, keepdims=True)
    hi = small.max(axis=-2, keepdims=True)
    extent = hi - lo
    scale = extent.max(axis=-1, keepdims=True)
    safe = np.where(scale > 1e-12, scale, 1.0)
    out = (xy - lo) / safe + (1.0 - extent / safe) / 2.0
    out = np.where(scale > 1e-12, out, 0.5)
    return np.where(visible[..., None], out, 0.0)


def synthesize(theta, mode=FULL, noise_sigma=0.0, seed=0, sample_id=0):
    """One labelled skeleton at yaw ``theta`` degrees.

    ``noise_sigma`` is the std of additive Gaussian noise in body heights,
    applied before the visible joints are normalized to their bounding box.
    """
    if noise_sigma < 0:
        raise InvalidInputError(f"noise_sigma must be >= 0, got {noise_sigma}")
    if isinstance(mode, str):
        mode = OcclusionMode.parse(mode)
    theta = normalize_deg(theta)
    rng = derive_rng(seed, "synthesize")
    xy = project(theta)
    noise = rng.normal(0.0, 1.0, size=xy.shape)
    vis = visibility_mask(mode, rng)
    xy = xy + noise_sigma * noise
    joints = np.zeros((N_JOINTS, 3))
    joints[:, :2] = normalize_to_box(xy, vis)
    joints[:, 2] = vis
    return Sample(joints, theta, mode, sample_id)


def clean_joints(theta_deg):
    """Noise-free, unoccluded skeletons for an array of yaws, shape (n, 23, 3).

    Used as the source of heatmap targets, so occluded inputs are still
    supervised with the whole body.
    """
    theta_deg = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    xy = project(theta_deg)
    vis = np.ones(xy.shape[:-1], dtype=bool)
    out = np.ones(xy.shape[:-1] + (3,))
    out[..., :2] = normalize_to_box(xy, vis)
    return out


def _parse_mix(mode_mix):
    modes, weights = [], []
    for mode, w in mode_mix:
        if isinstance(mode, str):
            mode = OcclusionMode.parse(mode)
        if not w > 0:
            raise InvalidInputError(f"mode weight must be positive, got {w}")
        modes.append(mode)
        weights.append(float(w))
    if not modes:
        raise InvalidInputError("mode mix is empty")
    weights = np.asarray(weights)
    return modes, weights / weights.sum()


def parse_mix(text):
    """``"full:0.5,lower:0.5"`` -> [(OcclusionMode, weight), ...].

    A drop mode carries its probability as ``drop@0.3:1.0``.
    """
    out = []
    for part in text.split(","):
        name, _, w = part.strip().rpartition(":")
        if not name:
            name, w = w, "1"
        out.append((OcclusionMode.parse(name.replace("@", ":")), float(w)))
    return out


def generate_samples(n, mode_mix=((FULL, 1.0),), noise_sigma=0.0, seed=0):
    """``n`` samples with uniform yaw and occlusion modes drawn by weight."""
    if n <= 0:
        raise InvalidInputError(f"n must be positive, got {n}")
    modes, probs = _parse_mix(mode_mix)
    rng = derive_rng(seed, "dataset")
    thetas = rng.uniform(0.0, 360.0, size=n)
    picks = rng.choice(len(modes), size=n, p=probs)
    sub_seeds = rng.integers(0, 2 ** 63 - 1, size=n)
    return [
        synthesize(thetas[i], modes[picks[i]], noise_sigma, int(sub_seeds[i]), sample_id=i)
        for i in range(n)
    ]


def header_path(path):
    path = Path(path)
    return path.with_name(path.stem + ".header.json")


def write_dataset(path, samples, noise_sigma, seed):
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record()) + "\n")
    header = {"version": 1, "convention": CONVENTION, "noise_sigma": float(noise_sigma), "seed": int(seed)}
    with open(header_path(path), "w", encoding="utf-8") as fh:
        json.dump(header, fh, indent=2)
        fh.write("\n")
    return path


def gen_dataset(path, n, mode_mix=((FULL, 1.0),), noise_sigma=0.0, seed=0):
    """Generate ``n`` samples and write them as JSON lines plus a header file."""
    samples = generate_samples(n, mode_mix, noise_sigma, seed)
    write_dataset(path, samples, noise_sigma, seed)
    return samples


def load_dataset(path):
    """Read a JSON-lines dataset into a :class:`SampleSet`."""
    samples = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                samples.append(Sample.from_record(json.loads(line)))
    return SampleSet.from_samples(samples)


def make_heatmaps(joints, width=DEFAULT_HEATMAP_SIZE, height=DEFAULT_HEATMAP_SIZE, sigma_hm=DEFAULT_HEATMAP_SIGMA):
    """Gaussian-bump heatmaps, shape (..., n_joints, height, width).

    Each visible joint gets an unnormalized bump of std ``sigma_hm`` pixels
    with peak 1 at its nearest pixel ``(round(x * width), round(y * height))``,
    clipped to the grid. Invisible joints get all-zero maps.
    """
    if width < 4 or height < 4:
        raise InvalidInputError(f"heatmap grid must be at least 4x4, got {width}x{height}")
    if not sigma_hm > 0:
        raise InvalidInputError(f"sigma_hm must be positive, got {sigma_hm}")
    joints = np.asarray(joints, dtype=float)
    cx = np.clip(np.floor(joints[..., 0] * width + 0.5), 0, width - 1)
    cy = np.clip(np.floor(joints[..., 1] * height + 0.5), 0, height - 1)
    gx = np.exp(-((np.arange(width) - cx[..., None]) ** 2) / (2.0 * sigma_hm ** 2))
    gy = np.exp(-((np.arange(height) - cy[..., None]) ** 2) / (2.0 * sigma_hm ** 2))
    maps = gy[..., :, None] * gx[..., None, :]
    return maps * (joints[..., 2] > 0)[..., None, None]
