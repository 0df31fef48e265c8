"""Simulation and verification of the Tremblay-Turbiner-Winternitz oscillator."""
from .model import (
    ActionPair,
    AdmissibilityError,
    ConfigurationError,
    DomainError,
    InvariantSet,
    ModelParameters,
    PhaseState,
    actions_from_invariants,
    admissibility,
    angular_factor,
    angular_integral,
    energy_from_actions,
    eom_rhs,
    fundamental_frequencies,
    hamiltonian,
    invariants,
    radial_factor,
    superintegral,
    superintegral_at_zero_A,
)
from .dynamics import IntegratorConfig, Scheme, Trajectory, integrate, sample_admissible_state

__version__ = "0.1.0"
