"""Large-N free energy of a planar Coulomb gas with a point charge insertion."""

__version__ = "0.1.0"

from .errors import DomainError, NearCriticalError, PhaseError, QuadratureError, SolverError  # noqa: E402
from .geometry import ModelParams, Regime, classify_phase  # noqa: E402
from .expansion import expansion_coefficients, log_z_predicted, log_z_reference  # noqa: E402
from .ortho_oracle import QuadratureSpec, oracle  # noqa: E402

__all__ = [
    "DomainError", "NearCriticalError", "PhaseError", "QuadratureError", "SolverError",
    "ModelParams", "Regime", "classify_phase",
    "expansion_coefficients", "log_z_predicted", "log_z_reference",
    "QuadratureSpec", "oracle",
]
