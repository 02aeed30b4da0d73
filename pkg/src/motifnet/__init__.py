"""Learn N-gene circuits that compute French-Flag and Switch input-output functions."""

from .dynamics import GeneCircuit, InputMode, NonFiniteState, SimConfig, response_curve, steady_state
from .targets import LossConfig, TargetSpec
from .train_evo import EvoConfig, evolve
from .train_gd import GdConfig, Trainer, TrainResult, prune, train_gd

__all__ = [
    "EvoConfig",
    "GdConfig",
    "GeneCircuit",
    "InputMode",
    "LossConfig",
    "NonFiniteState",
    "SimConfig",
    "TargetSpec",
    "TrainResult",
    "Trainer",
    "evolve",
    "prune",
    "response_curve",
    "steady_state",
    "train_gd",
]
