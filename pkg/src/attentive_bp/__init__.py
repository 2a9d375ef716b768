"""Attentive belief propagation for constraint optimisation problems."""

from .bp import HyperParams, MessageSet, beliefs, converged, decide, f2v_step, v2f_step
from .model import DABPModel, ModelConfig
from .oracle import OracleResult, solve_exact
from .trainer import RunTrace, TrainConfig, run_baseline, run_online

__version__ = "0.1.0"

__all__ = [
    "DABPModel",
    "HyperParams",
    "MessageSet",
    "ModelConfig",
    "OracleResult",
    "RunTrace",
    "TrainConfig",
    "beliefs",
    "converged",
    "decide",
    "f2v_step",
    "run_baseline",
    "run_online",
    "solve_exact",
    "v2f_step",
]
