"""Frequency-domain linear-attention forecaster on a small numpy autodiff core."""
from .data import load_csv, make_windows, synth_multiperiodic
from .model import FrwkvModel, ModelConfig, Variant, build_variant, parameter_count
from .train import TrainConfig, evaluate, run_ablation, train

__all__ = [
    "FrwkvModel", "ModelConfig", "TrainConfig", "Variant", "build_variant", "evaluate",
    "load_csv", "make_windows", "parameter_count", "run_ablation", "synth_multiperiodic", "train",
]
__version__ = "0.1.0"
