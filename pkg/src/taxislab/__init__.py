"""Numerical laboratory for a cross-diffusive predator-prey system near homogeneous equilibria."""

from .grid import Grid, NormBundle
from .model import (
    Parameters,
    ParameterError,
    Regime,
    RegimeTag,
    SteadyState,
    classify_regime,
    jacobian_at_steady_state,
    reaction,
    steady_state,
)
from .functionals import FunctionalRecord, WeightSet, cancellation_residuals, record, weights_for_regime
from .solver import SimState, StepControl, TimeSeries, perturb_steady_state, simulate, step

__version__ = "0.1.0"

__all__ = [
    "Grid", "NormBundle", "Parameters", "ParameterError", "Regime", "RegimeTag", "SteadyState",
    "classify_regime", "jacobian_at_steady_state", "reaction", "steady_state",
    "FunctionalRecord", "WeightSet", "cancellation_residuals", "record", "weights_for_regime",
    "SimState", "StepControl", "TimeSeries", "perturb_steady_state", "simulate", "step",
]
