"""Closed-form quantities of the TTW oscillator in polar coordinates.

    H = p_r^2 + p_phi^2/r^2 + omega^2 r^2 + V(phi)/r^2
    V(phi) = alpha k^2/cos^2(k phi) + beta k^2/sin^2(k phi)

on the sector 0 < phi < pi/(2k). The angular integral is A = p_phi^2 + V(phi).
For rational k = m/n the complex superintegral is C = f1^m f2^n with

    f1 = 2 sqrt(A) p_r / r + i (E - 2A/r^2)
    f2 = sqrt(A) p_phi sin(2k phi) + i ((beta - alpha) k^2 + A cos(2k phi))

The ``*_fields`` helpers take raw coordinates and broadcast over numpy arrays;
the public functions take a :class:`PhaseState` and validate it first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

GUARD_BAND = 1e-10


class DomainError(ValueError):
    """State outside the open sector (or r <= 0), where the potential is singular."""


class ConfigurationError(ValueError):
    """Operation needs rational k but the parameters are in irrational mode."""


class AdmissibilityError(ValueError):
    """(E, A) does not describe a bounded torus."""


@dataclass(frozen=True)
class ModelParameters:
    omega: float
    alpha: float
    beta: float
    k_real: float
    k_num: int | None = None
    k_den: int | None = None

    def __post_init__(self):
        for name in ("omega", "alpha", "beta", "k_real"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        if (self.k_num is None) != (self.k_den is None):
            raise ValueError("k_num and k_den must be given together")
        if self.k_num is not None:
            if self.k_num <= 0 or self.k_den <= 0:
                raise ValueError("k = m/n needs positive integers")
            if math.gcd(self.k_num, self.k_den) != 1:
                raise ValueError(f"{self.k_num}/{self.k_den} is not in lowest terms")
            if not math.isclose(self.k_real, self.k_num / self.k_den, rel_tol=1e-15):
                raise ValueError("k_real disagrees with k_num/k_den")

    @classmethod
    def rational(cls, omega: float, alpha: float, beta: float, m: int, n: int = 1) -> "ModelParameters":
        if m <= 0 or n <= 0:
            raise ValueError(f"k = {m}/{n} needs positive integers")
        frac = Fraction(m, n)
        return cls(float(omega), float(alpha), float(beta), frac.numerator / frac.denominator,
                   frac.numerator, frac.denominator)

    @classmethod
    def irrational(cls, omega: float, alpha: float, beta: float, k: float) -> "ModelParameters":
        return cls(float(omega), float(alpha), float(beta), float(k))

    @classmethod
    def from_k_string(cls, omega: float, alpha: float, beta: float, k: str) -> "ModelParameters":
        """``"m/n"`` selects rational mode, a decimal literal irrational mode."""
        k = k.strip()
        if "/" in k:
            m, n = k.split("/")
            return cls.rational(omega, alpha, beta, int(m), int(n))
        return cls.irrational(omega, alpha, beta, float(k))

    @property
    def k(self) -> float:
        return self.k_real

    @property
    def is_rational(self) -> bool:
        return self.k_num is not None

    @property
    def m(self) -> int:
        self.require_rational()
        return self.k_num

    @property
    def n(self) -> int:
        self.require_rational()
        return self.k_den

    @property
    def sector_width(self) -> float:
        return math.pi / (2.0 * self.k_real)

    @property
    def k_label(self) -> str:
        return f"{self.k_num}/{self.k_den}" if self.is_rational else repr(self.k_real)

    def require_rational(self):
        if not self.is_rational:
            raise ConfigurationError(
                f"k = {self.k_real!r} is irrational; the superintegral is not single-valued")


@dataclass(frozen=True)
class PhaseState:
    r: float
    phi: float
    p_r: float
    p_phi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.r, self.phi, self.p_r, self.p_phi])

    @classmethod
    def from_array(cls, y) -> "PhaseState":
        return cls(float(y[0]), float(y[1]), float(y[2]), float(y[3]))

    def with_momenta_negated(self) -> "PhaseState":
        return PhaseState(self.r, self.phi, -self.p_r, -self.p_phi)


class InvariantSet(NamedTuple):
    E: float
    A: float
    f1: complex
    f2: complex
    C: complex | None


class ActionPair(NamedTuple):
    I1: float
    I2: float


class AdmissibilityReport(NamedTuple):
    admissible: bool
    angular_margin: float   # A - k^2 (sqrt(alpha) + sqrt(beta))^2, must be >= 0
    radial_margin: float    # E^2 - 4 omega^2 A, must be >= 0
    torus_margin: float     # (A + (beta-alpha) k^2)^2 - 4 k^2 beta A, must be > 0



def check_state(params: ModelParameters, state: PhaseState, guard: float = GUARD_BAND) -> PhaseState:
    values = (state.r, state.phi, state.p_r, state.p_phi)
    if not all(math.isfinite(v) for v in values):
        raise DomainError(f"non-finite state {state}")
    if state.r <= 0:
        raise DomainError(f"r must be positive, got {state.r}")
    if not guard < state.phi < params.sector_width - guard:
        raise DomainError(
            f"phi={state.phi} outside the sector (0, {params.sector_width}) with guard {guard}")
    return state


# Array-level kernels: no validation, broadcast over numpy inputs.

def angular_potential(params: ModelParameters, phi):
    kphi = params.k * phi
    k2 = params.k ** 2
    return params.alpha * k2 / np.cos(kphi) ** 2 + params.beta * k2 / np.sin(kphi) ** 2


def angular_potential_derivative(params: ModelParameters, phi):
    kphi = params.k * phi
    s, c = np.sin(kphi), np.cos(kphi)
    k3 = params.k ** 3
    return 2.0 * params.alpha * k3 * s / c ** 3 - 2.0 * params.beta * k3 * c / s ** 3


def angular_integral_fields(params, r, phi, p_r, p_phi):
    return p_phi ** 2 + angular_potential(params, phi)


def hamiltonian_fields(params, r, phi, p_r, p_phi):
    A = angular_integral_fields(params, r, phi, p_r, p_phi)
    return p_r ** 2 + params.omega ** 2 * r ** 2 + A / r ** 2


def radial_factor_fields(params, r, phi, p_r, p_phi):
    A = angular_integral_fields(params, r, phi, p_r, p_phi)
    E = p_r ** 2 + params.omega ** 2 * r ** 2 + A / r ** 2
    return 2.0 * np.sqrt(A) * p_r / r + 1j * (E - 2.0 * A / r ** 2)


def angular_factor_fields(params, r, phi, p_r, p_phi):
    A = angular_integral_fields(params, r, phi, p_r, p_phi)
    twokphi = 2.0 * params.k * phi
    shift = (params.beta - params.alpha) * params.k ** 2
    return np.sqrt(A) * p_phi * np.sin(twokphi) + 1j * (shift + A * np.cos(twokphi))


def integer_power(z, e: int):
    """z**e for integer e >= 0 by binary exponentiation (no complex log, no branch cut)."""
    if e < 0:
        raise ValueError("negative exponent")
    result = z * 0 + 1
    base = z
    while e:
        if e & 1:
            result = result * base
        e >>= 1
        if e:
            base = base * base
    return result


def superintegral_fields(params, r, phi, p_r, p_phi):
    params.require_rational()
    f1 = radial_factor_fields(params, r, phi, p_r, p_phi)
    f2 = angular_factor_fields(params, r, phi, p_r, p_phi)
    return integer_power(f1, params.k_num) * integer_power(f2, params.k_den)


def superintegral_at_zero_A_fields(params, E):
    """C with A set to zero and E kept: i^(m+n) E^m ((beta-alpha) k^2)^n."""
    params.require_rational()
    m, n = params.k_num, params.k_den
    unit = (1, 1j, -1, -1j)[(m + n) % 4]
    shift = (params.beta - params.alpha) * params.k ** 2
    return unit * integer_power(E, m) * shift ** n


def eom_fields(params, r, phi, p_r, p_phi):
    V = angular_potential(params, phi)
    dV = angular_potential_derivative(params, phi)
    r2 = r * r
    return (2.0 * p_r,
            2.0 * p_phi / r2,
            2.0 * (p_phi ** 2 + V) / (r2 * r) - 2.0 * params.omega ** 2 * r,
            -dV / r2)


# State-level API.

def hamiltonian(params: ModelParameters, state: PhaseState) -> float:
    check_state(params, state)
    return float(hamiltonian_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def angular_integral(params: ModelParameters, state: PhaseState) -> float:
    check_state(params, state)
    return float(angular_integral_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def eom_rhs(params: ModelParameters, state: PhaseState) -> tuple[float, float, float, float]:
    """Hamilton's equations (dr/dt, dphi/dt, dp_r/dt, dp_phi/dt); no factor 1/2 in the kinetic term."""
    check_state(params, state)
    return tuple(float(v) for v in eom_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def radial_factor(params: ModelParameters, state: PhaseState) -> complex:
    check_state(params, state)
    return complex(radial_factor_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def angular_factor(params: ModelParameters, state: PhaseState) -> complex:
    check_state(params, state)
    return complex(angular_factor_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def superintegral(params: ModelParameters, state: PhaseState) -> complex:
    params.require_rational()
    check_state(params, state)
    return complex(superintegral_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def superintegral_at_zero_A(params: ModelParameters, E: float) -> complex:
    return complex(superintegral_at_zero_A_fields(params, E))


def invariants(params: ModelParameters, state: PhaseState) -> InvariantSet:
    """All conserved quantities at ``state``; C is None in irrational mode."""
    check_state(params, state)
    args = (params, state.r, state.phi, state.p_r, state.p_phi)
    f1 = complex(radial_factor_fields(*args))
    f2 = complex(angular_factor_fields(*args))
    C = None
    if params.is_rational:
        C = complex(integer_power(f1, params.k_num) * integer_power(f2, params.k_den))
    return InvariantSet(float(hamiltonian_fields(*args)), float(angular_integral_fields(*args)), f1, f2, C)


def minimum_angular_integral(params: ModelParameters) -> float:
    """Lower bound of A over the sector, attained at p_phi = 0 and tan^2(k phi) = sqrt(beta/alpha)."""
    return params.k ** 2 * (math.sqrt(params.alpha) + math.sqrt(params.beta)) ** 2


def minimizing_angle(params: ModelParameters) -> float:
    return math.atan((params.beta / params.alpha) ** 0.25) / params.k


def minimum_energy(params: ModelParameters) -> float:
    """Smallest energy of any state: E >= 2 omega sqrt(A) >= 2 omega sqrt(A_min)."""
    return 2.0 * params.omega * math.sqrt(minimum_angular_integral(params))


def actions_from_invariants(params: ModelParameters, E: float, A: float) -> ActionPair:
    if A < 0:
        raise AdmissibilityError(f"A must be nonnegative, got {A}")
    if E < 2.0 * params.omega * math.sqrt(A):
        raise AdmissibilityError(f"E={E} < 2 omega sqrt(A)={2.0 * params.omega * math.sqrt(A)}: I1 < 0")
    root = math.sqrt(A)
    return ActionPair(E / (4.0 * params.omega) - root / 2.0, root / (2.0 * params.k))


def energy_from_actions(params: ModelParameters, actions: ActionPair) -> float:
    return 4.0 * params.omega * (actions.I1 + params.k * actions.I2)


def fundamental_frequencies(params: ModelParameters) -> tuple[float, float]:
    """Angle rates (4 omega, 4 omega k); the same on every torus."""
    return 4.0 * params.omega, 4.0 * params.omega * params.k


def admissibility(params: ModelParameters, E: float, A: float) -> AdmissibilityReport:
    k2 = params.k ** 2
    angular = A - minimum_angular_integral(params)
    radial = E ** 2 - 4.0 * params.omega ** 2 * A
    torus = (A + (params.beta - params.alpha) * k2) ** 2 - 4.0 * k2 * params.beta * A
    return AdmissibilityReport(angular >= 0 and radial >= 0 and torus > 0, angular, radial, torus)
