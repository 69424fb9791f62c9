"""Constructive min-max tools for pseudoentropy, hardcore measures and leakage simulators."""

from .core import (
    BoundedMeasure,
    Distinguishing,
    FiniteDistribution,
    JointDistribution,
    MixedStrategy,
    Simulation,
    SimulatorKernel,
    TestFunction,
    Unpredictability,
    min_entropy,
)
from .game import ConstraintSet, EquilibriumResult, solve_zero_sum
from .hardcore import build_hardcore, verify_hardcore
from .pseudoentropy import (
    build_dense_model,
    build_hill_hardcore,
    metric_entropy_check,
    verify_dense_model,
    verify_hill,
)
from .security import SimulatorCostModel, emit_comparison_table, solve_security_bits
from .simulators import build_aux_simulator, build_high_entropy_simulator, verify_aux_simulator

__version__ = "0.1.0"
