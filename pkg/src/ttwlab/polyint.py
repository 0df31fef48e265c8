"""Reduced polynomial integral G and its numerical certification.

For k = m/n the real (m+n even) or imaginary (m+n odd) part of C is a
polynomial in A with momentum-polynomial coefficients. Its A-free term is the
matching part of C(A=0) = i^(m+n) E^m ((beta-alpha) k^2)^n, so

    G = (part(C) - part(C(A=0))) / A

is a polynomial in (p_r, p_phi) of degree 2(m+n-1) at fixed (r, phi). The
degree claim is checked with finite differences on a uniform tensor grid: an
order-(d+1) difference annihilates any polynomial of total degree <= d.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .analysis import numeric_gradient, phase_function, poisson_bracket
from .model import (
    ModelParameters,
    PhaseState,
    angular_integral_fields,
    check_state,
    hamiltonian_fields,
    superintegral_at_zero_A_fields,
    superintegral_fields,
)


class GridTooSmall(ValueError):
    pass


def parity(params: ModelParameters) -> str:
    return "even" if (params.m + params.n) % 2 == 0 else "odd"


def claimed_degree(params: ModelParameters) -> int:
    return 2 * (params.m + params.n - 1)


def reduced_integral_fields(params: ModelParameters, r, phi, p_r, p_phi):
    """G at the given coordinates; E inside C(A=0) is the state's own energy."""
    C = superintegral_fields(params, r, phi, p_r, p_phi)
    E = hamiltonian_fields(params, r, phi, p_r, p_phi)
    A = angular_integral_fields(params, r, phi, p_r, p_phi)
    diff = C - superintegral_at_zero_A_fields(params, E)
    part = np.real(diff) if parity(params) == "even" else np.imag(diff)
    return part / A


def companion_fields(params: ModelParameters, r, phi, p_r, p_phi):
    """sqrt(A) times the part of C that carries odd powers of sqrt(A)."""
    C = superintegral_fields(params, r, phi, p_r, p_phi)
    A = angular_integral_fields(params, r, phi, p_r, p_phi)
    part = np.imag(C) if parity(params) == "even" else np.real(C)
    return np.sqrt(A) * part


def reduced_integral(params: ModelParameters, state: PhaseState) -> float:
    check_state(params, state)
    return float(reduced_integral_fields(params, state.r, state.phi, state.p_r, state.p_phi))


def momentum_nodes(count: int, spacing: float = 0.5) -> np.ndarray:
    """``count`` uniformly spaced nodes centered at zero."""
    return spacing * (np.arange(count) - (count - 1) / 2.0)


@dataclass(frozen=True)
class PolynomialSampleTable:
    config_point: tuple[float, float]
    p_r: np.ndarray
    p_phi: np.ndarray
    values: np.ndarray          # values[i, j] at (p_r[i], p_phi[j])
    parity: str
    claimed_degree: int
    quantity: str = "reduced"

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self.values)))


def _uniform(nodes: np.ndarray) -> bool:
    if len(nodes) < 2:
        return True
    steps = np.diff(nodes)
    return bool(np.all(steps > 0) and np.allclose(steps, steps[0], rtol=1e-12, atol=0))


def extract_reduced_integral(params: ModelParameters, config_point: tuple[float, float],
                             p_grid=None, quantity: str = "reduced") -> PolynomialSampleTable:
    """Tabulate G (or the sqrt(A) companion) on a tensor grid of momenta.

    ``p_grid`` is a pair of 1-D node arrays (p_r nodes, p_phi nodes), or
    None for the default grid of spacing 1/2 with claimed_degree + 2 nodes
    per axis (+2 more for the companion, whose degree is 2(m+n)+1).
    """
    params.require_rational()
    r, phi = config_point
    check_state(params, PhaseState(r, phi, 0.0, 0.0))
    degree = claimed_degree(params)
    if p_grid is None:
        count = degree + 2 if quantity == "reduced" else 2 * (params.m + params.n) + 3
        p_grid = (momentum_nodes(count), momentum_nodes(count))
    pr_nodes = np.asarray(p_grid[0], dtype=float)
    pphi_nodes = np.asarray(p_grid[1], dtype=float)
    if not (_uniform(pr_nodes) and _uniform(pphi_nodes)):
        raise ValueError("momentum grid must be uniformly spaced")
    PR, PPHI = np.meshgrid(pr_nodes, pphi_nodes, indexing="ij")
    fields = {"reduced": reduced_integral_fields, "companion": companion_fields}[quantity]
    values = np.asarray(fields(params, r, phi, PR, PPHI), dtype=float)
    if not np.all(np.isfinite(values)):
        raise ArithmeticError("non-finite values on the momentum grid")
    return PolynomialSampleTable((float(r), float(phi)), pr_nodes, pphi_nodes, values,
                                 parity(params), degree, quantity)


class DegreeReport(NamedTuple):
    degree: int
    residual: float          # max |order-(d+1) difference| / max |values|
    top_difference: float    # max |order-d difference| / max |values|
    bounded: bool            # degree <= d certified
    exact: bool              # degree == d certified


def _mixed_differences(values: np.ndarray, order: int) -> float:
    n0, n1 = values.shape
    best = 0.0
    for i in range(order + 1):
        j = order - i
        if i > n0 - 1 or j > n1 - 1:
            continue
        diff = np.diff(np.diff(values, n=i, axis=0), n=j, axis=1)
        if diff.size:
            best = max(best, float(np.max(np.abs(diff))))
    return best


def verify_polynomial_degree(table: PolynomialSampleTable, d: int,
                             residual_tol: float = 1e-8, top_tol: float = 1e-4) -> DegreeReport:
    """Certify total degree <= d (and == d) from forward differences."""
    if d < 0:
        raise ValueError("degree must be nonnegative")
    n0, n1 = table.values.shape
    if n0 < d + 2 or n1 < d + 2:
        raise GridTooSmall(f"{n0}x{n1} grid cannot resolve order-{d + 1} differences")
    scale = table.scale
    if scale == 0.0:
        return DegreeReport(d, 0.0, 0.0, True, False)
    residual = _mixed_differences(table.values, d + 1) / scale
    top = _mixed_differences(table.values, d) / scale
    bounded = residual < residual_tol
    return DegreeReport(d, residual, top, bounded, bounded and top > top_tol)


class BracketReport(NamedTuple):
    max_residual: float
    residuals: np.ndarray


def verify_reduced_bracket(params: ModelParameters, states, h_scale: float = 1.0) -> BracketReport:
    """Normalized numeric {G, H} over ``states``."""
    params.require_rational()
    G = lambda *y: reduced_integral_fields(params, *y)
    H = phase_function(params, "H")
    residuals = np.array([poisson_bracket(G, H, s, h_scale, params).residual for s in states])
    return BracketReport(float(np.max(residuals)), residuals)


def gradient_matrix(params: ModelParameters, state: PhaseState, h_scale: float = 1.0) -> np.ndarray:
    """3x4 matrix of numeric gradients of (H, A, G)."""
    check_state(params, state)
    y = state.as_array()
    fns = (phase_function(params, "H"), phase_function(params, "A"),
           lambda *z: reduced_integral_fields(params, *z))
    return np.array([numeric_gradient(f, y, h_scale) for f in fns])


def independence_singular_values(params: ModelParameters, state: PhaseState,
                                 normalize_rows: bool = True) -> np.ndarray:
    """Singular values of the (H, A, G) gradient matrix.

    Rows are scaled to unit length by default: rescaling an integral by a
    constant leaves the rank unchanged, and G's gradient is otherwise orders of
    magnitude larger than H's.
    """
    M = gradient_matrix(params, state)
    if normalize_rows:
        M = M / np.linalg.norm(M, axis=1)[:, None]
    return np.linalg.svd(M, compute_uv=False)
