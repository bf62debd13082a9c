"""Outer-loop optimizers and the tuning driver."""

from .cma import CMAState, cma_step, default_popsize
from .core import (
    METHODS,
    Landscape,
    OptimizerConfig,
    TuneResult,
    TuningContext,
    brysons_rule,
    evaluate_candidate,
    evaluate_weights,
    landscape_scan,
    slice_weights,
    tune,
)
from .ga import GAState, ga_step
from .pso import PSOState, pso_step

__all__ = [
    "CMAState", "cma_step", "default_popsize", "GAState", "ga_step", "PSOState", "pso_step",
    "METHODS", "Landscape", "OptimizerConfig", "TuneResult", "TuningContext", "brysons_rule",
    "evaluate_candidate", "evaluate_weights", "landscape_scan", "slice_weights", "tune",
]
