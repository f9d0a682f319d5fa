"""Boundary-controlled channel simulator with reduced-basis accelerated
Sobol sensitivity analysis."""

from .channel import (BoundaryCoefficients, Equilibrium, NominalConfig,
                      PhysicalParams, boundary_coefficients, check_stability,
                      compute_equilibrium, control_positions,
                      from_characteristic, to_characteristic)
from .errors import (CanalSenseError, ConfigurationError, DegenerateOutputError,
                     DomainError, NumericalError, ValidationFailure)
from .pde import (Grid, SpaceTimeSystem, StateTrajectory, assemble,
                  build_grid, discrete_output, evaluate, solve_full)

__all__ = [
    "BoundaryCoefficients", "Equilibrium", "NominalConfig", "PhysicalParams",
    "boundary_coefficients", "check_stability", "compute_equilibrium",
    "control_positions", "from_characteristic", "to_characteristic",
    "CanalSenseError", "ConfigurationError", "DegenerateOutputError",
    "DomainError", "NumericalError", "ValidationFailure",
    "Grid", "SpaceTimeSystem", "StateTrajectory", "assemble", "build_grid",
    "discrete_output", "evaluate", "solve_full",
]

__version__ = "0.1.0"
