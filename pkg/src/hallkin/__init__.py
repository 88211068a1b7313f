"""hallkin: a 1D3V kinetic-ion / Hall-resistive-induction plasma simulator.

Deterministic splitting scheme for the coupled system of a Vlasov equation
for ions, a nonlinear Poisson-Boltzmann balance for the electron density,
and a resistive Hall induction equation for the tangential magnetic field,
instrumented so that the model's conservation and dissipation structure is
checkable at runtime.
"""

from .errors import (
    ExcessiveTruncation,
    HallkinError,
    InvalidInput,
    NonConvergence,
    ParseError,
    SingularSystem,
    TailTruncation,
    ValidationError,
)
from .grid import (
    DistributionFunction,
    FieldState,
    ImposedField,
    PhaseSpaceGrid,
    RunConfig,
    SimulationState,
    make_maxwellian,
    uniform_resistivity,
    validate_state,
)
from .remap import RemapKernel

__version__ = "0.1.0"

__all__ = [
    "DistributionFunction",
    "ExcessiveTruncation",
    "FieldState",
    "HallkinError",
    "ImposedField",
    "InvalidInput",
    "NonConvergence",
    "ParseError",
    "PhaseSpaceGrid",
    "RemapKernel",
    "RunConfig",
    "SimulationState",
    "SingularSystem",
    "TailTruncation",
    "ValidationError",
    "make_maxwellian",
    "uniform_resistivity",
    "validate_state",
    "__version__",
]
