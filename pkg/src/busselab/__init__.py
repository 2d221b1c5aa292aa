"""Simulation and analysis toolkit for a 1-D stochastic dryland vegetation
model: stochastic stability via first exit times and observability via
local wave-number distributions."""

from busselab.model import (
    FieldState,
    Grid1D,
    HomogeneousStates,
    ModelParams,
    default_grid,
    default_params,
    homogeneous_states,
    pulses_for_wavelength,
    reaction_terms,
)

__version__ = "0.1.0"
