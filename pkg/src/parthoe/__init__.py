"""Orientation estimation from partial 2D skeletons with a learned confidence."""

from .circular import circular_gaussian, decode_orientation, orientation_metrics
from .gating import TemporalGate, pr_curve, reliability_label
from .model import ModelConfig, forward, init_params, predict
from .sim import SimConfig, builtin_scenario, run_scenario
from .skeleton import FULL, LOWER_ONLY, UPPER_ONLY, OcclusionMode, gen_dataset, load_dataset, synthesize
from .train import TrainConfig, load_checkpoint, save_checkpoint, train

__version__ = "0.1.0"
