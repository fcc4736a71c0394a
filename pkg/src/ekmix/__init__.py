"""Euler-Korteweg mixture models with interspecies friction.

Pointwise thermodynamics, friction-graph algebra, 1D periodic solvers for
the relaxation system and its Chapman-Enskog / gradient-flow limits, and
diagnostics for relaxation-rate studies.
"""

__version__ = "0.1.0"

from .energy import (
    AdmissibilityReport,
    EnergyLaw,
    MixtureModel,
    ThermoPoint,
    check_admissibility,
    chemical_potential,
    pressure,
    relative_enthalpy,
    relative_potential,
    sound_speed,
    stress_components,
)
from .friction import (
    ConnectivityReport,
    ReducedOperators,
    check_connectivity,
    coercivity_constant,
    driving_force,
    friction_dissipation,
    friction_matrix,
    parabolicity_check,
    reduced_operators,
    relative_velocity_flux,
    solve_constrained,
)
from .grid import Grid1D, MixtureState, barycentric_velocity, div_flux, grad, integrate, laplacian

__all__ = [
    "__version__",
    "AdmissibilityReport",
    "EnergyLaw",
    "MixtureModel",
    "ThermoPoint",
    "check_admissibility",
    "chemical_potential",
    "pressure",
    "relative_enthalpy",
    "relative_potential",
    "sound_speed",
    "stress_components",
    "ConnectivityReport",
    "ReducedOperators",
    "check_connectivity",
    "coercivity_constant",
    "driving_force",
    "friction_dissipation",
    "friction_matrix",
    "parabolicity_check",
    "reduced_operators",
    "relative_velocity_flux",
    "solve_constrained",
    "Grid1D",
    "MixtureState",
    "barycentric_velocity",
    "div_flux",
    "grad",
    "integrate",
    "laplacian",
]
