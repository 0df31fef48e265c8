"""Measurements on trajectories: conservation drift, Poisson brackets,
radial period, orbit closure and phase rotation of the factors of C."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamics import IntegratorConfig, Trajectory, integrate
from .model import (
    DomainError,
    ModelParameters,
    PhaseState,
    angular_factor_fields,
    angular_integral_fields,
    check_state,
    hamiltonian_fields,
    integer_power,
    radial_factor_fields,
    superintegral_fields,
)

PhaseFunction = Callable[..., "np.ndarray | float"]

PHASE_METRIC = ("d^2 = (dr/r0)^2 + (dphi*2k/pi)^2 + (dp_r/sqrt(E0))^2 + (dp_phi/sqrt(E0))^2; "
                "configuration closure uses the first two terms only")


class IllConditioned(ArithmeticError):
    pass


class InsufficientSpan(ValueError):
    pass


class DegenerateOrbit(ValueError):
    """|f1| or |f2| too small for its phase to be defined."""


def phase_function(params: ModelParameters, name: str) -> PhaseFunction:
    """Named phase-space function f(r, phi, p_r, p_phi), broadcasting over arrays."""
    table = {
        "H": lambda *y: hamiltonian_fields(params, *y),
        "A": lambda *y: angular_integral_fields(params, *y),
        "ReC": lambda *y: np.real(superintegral_fields(params, *y)),
        "ImC": lambda *y: np.imag(superintegral_fields(params, *y)),
        "r": lambda r, phi, p_r, p_phi: r,
        "phi": lambda r, phi, p_r, p_phi: phi,
        "p_r": lambda r, phi, p_r, p_phi: p_r,
        "p_phi": lambda r, phi, p_r, p_phi: p_phi,
    }
    try:
        return table[name]
    except KeyError:
        raise ValueError(f"unknown phase function {name!r}; choose from {sorted(table)}") from None


# ---------------------------------------------------------------- drift

@dataclass(frozen=True)
class QuantityDrift:
    name: str
    initial_value: float
    max_abs_deviation: float
    max_rel_deviation: float


@dataclass(frozen=True)
class DriftReport:
    quantities: tuple[QuantityDrift, ...]

    def __getitem__(self, name: str) -> QuantityDrift:
        for q in self.quantities:
            if q.name == name:
                return q
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [q.name for q in self.quantities]

    def max_relative(self, names=None) -> float:
        names = names or self.names
        return max(self[n].max_rel_deviation for n in names)

    def to_dict(self) -> dict:
        return {"quantities": [asdict(q) for q in self.quantities]}


def _drift(name, values, scale=None):
    values = np.asarray(values, dtype=float)
    dev = float(np.max(np.abs(values - values[0])))
    scale = abs(values[0]) if scale is None else scale
    # zero reference: the relative entry degrades to the absolute deviation
    rel = dev / scale if scale > 0 else dev
    return QuantityDrift(name, float(values[0]), dev, rel)


def drift_report(params: ModelParameters, trajectory: Trajectory) -> DriftReport:
    """Max deviation from the initial value of E, A, Re C, Im C, |f1|^2, |f2|^2.

    Re C and Im C deviations are made relative to |C(0)|, the other
    quantities relative to their own initial magnitude. In irrational mode the
    C entries are omitted.
    """
    if len(trajectory) == 0:
        raise ValueError("empty trajectory")
    cols = trajectory.columns()
    E = hamiltonian_fields(params, *cols)
    A = angular_integral_fields(params, *cols)
    f1 = radial_factor_fields(params, *cols)
    f2 = angular_factor_fields(params, *cols)
    out = [_drift("E", E), _drift("A", A)]
    if params.is_rational:
        C = integer_power(f1, params.k_num) * integer_power(f2, params.k_den)
        c0 = abs(C[0])
        out += [_drift("ReC", C.real, c0), _drift("ImC", C.imag, c0)]
    out += [_drift("abs_f1_sq", np.abs(f1) ** 2), _drift("abs_f2_sq", np.abs(f2) ** 2)]
    return DriftReport(tuple(out))


# ---------------------------------------------------------------- Poisson brackets

class BracketResult(NamedTuple):
    value: float
    normalization: float   # |grad F| |grad G|

    @property
    def residual(self) -> float:
        return abs(self.value) / self.normalization


def fd_steps(y, h_scale: float = 1.0) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return h_scale * np.maximum(1e-5, 1e-5 * np.abs(y))


def numeric_gradient(F: PhaseFunction, y, h_scale: float = 1.0) -> np.ndarray:
    """Central differences at steps h and h/2 combined by one Richardson level."""
    y = np.asarray(y, dtype=float)
    h = fd_steps(y, h_scale)
    # rows: +h, -h, +h/2, -h/2 for each coordinate
    shifts = np.concatenate([np.diag(h), -np.diag(h), np.diag(h / 2), -np.diag(h / 2)])
    pts = y + shifts
    vals = np.asarray(F(pts[:, 0], pts[:, 1], pts[:, 2], pts[:, 3]), dtype=float)
    d_h = (vals[0:4] - vals[4:8]) / (2 * h)
    d_h2 = (vals[8:12] - vals[12:16]) / h
    return (4.0 * d_h2 - d_h) / 3.0


def poisson_bracket(F: PhaseFunction, G: PhaseFunction, state: PhaseState,
                    h_scale: float = 1.0, params: ModelParameters | None = None) -> BracketResult:
    """{F, G} over the canonical pairs (r, p_r), (phi, p_phi).

    ``F`` and ``G`` are called as f(r, phi, p_r, p_phi) on numpy arrays. When
    ``params`` is given the state must sit more than 4h inside the guard band.
    """
    y = np.array([state.r, state.phi, state.p_r, state.p_phi])
    if params is not None:
        check_state(params, state)
        margin = 4 * fd_steps(y, h_scale)
        if not (state.phi - margin[1] > 1e-10 and state.phi + margin[1] < params.sector_width - 1e-10
                and state.r - margin[0] > 0):
            raise DomainError("state too close to the sector boundary for finite differences")
    gF = numeric_gradient(F, y, h_scale)
    gG = numeric_gradient(G, y, h_scale)
    value = gF[0] * gG[2] - gF[2] * gG[0] + gF[1] * gG[3] - gF[3] * gG[1]
    norm = float(np.linalg.norm(gF) * np.linalg.norm(gG))
    if norm == 0.0:
        raise IllConditioned("both gradients vanish; bracket residual undefined")
    return BracketResult(float(value), norm)


# ---------------------------------------------------------------- period

def _upward_crossings(traj: Trajectory, level: float, values: np.ndarray, fn) -> np.ndarray:
    idx = np.flatnonzero((values[:-1] < level) & (values[1:] >= level))
    times = []
    for i in idx:
        a, b = traj.t[i], traj.t[i + 1]
        g = lambda s: fn(traj.interpolate(s)) - level
        if g(a) >= 0 or g(b) < 0:
            times.append(a if g(a) == 0 else b)
            continue
        times.append(brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return np.array(times)


def estimate_radial_period(trajectory: Trajectory) -> float:
    """Period of u(t) = r(t)^2 from its upward crossings of the sample mean.

    u obeys u'' + 16 omega^2 u = 8E, so the exact answer is pi/(2 omega).
    Crossings are refined on the Hermite dense output.
    """
    u = trajectory.y[:, 0] ** 2
    level = float(np.mean(u))
    crossings = _upward_crossings(trajectory, level, u, lambda y: y[0] ** 2)
    if len(crossings) < 4:
        raise InsufficientSpan(f"need at least 3 radial oscillations, found {max(0, len(crossings) - 1)}")
    return float((crossings[-1] - crossings[0]) / (len(crossings) - 1))


# ---------------------------------------------------------------- closure

@dataclass(frozen=True)
class ClosureReport:
    recurrence_time: float | None
    min_return_distance: float
    predicted_time: float | None
    phase_distance_metric: str
    configuration_closure_time: float | None
    configuration_min_distance: float
    radial_period: float
    horizon: float
    tol: float

    def to_dict(self) -> dict:
        return asdict(self)


def _weights(params: ModelParameters, state0: PhaseState) -> np.ndarray:
    E0 = float(hamiltonian_fields(params, state0.r, state0.phi, state0.p_r, state0.p_phi))
    p_scale = math.sqrt(E0)
    return np.array([1.0 / state0.r, 2.0 * params.k / math.pi, 1.0 / p_scale, 1.0 / p_scale])


def phase_distance(params: ModelParameters, state0: PhaseState, y, configuration_only: bool = False):
    """Weighted distance (see ``PHASE_METRIC``) from ``state0`` to states ``y`` (..., 4)."""
    w = _weights(params, state0)
    diff = (np.asarray(y, dtype=float) - state0.as_array()) * w
    if configuration_only:
        diff = diff[..., :2]
    return np.sqrt(np.sum(diff ** 2, axis=-1))


def _return_minima(traj, state0, t_start, configuration_only):
    """Refined local minima (time, distance) of the return distance after t_start."""
    params = traj.params
    d = phase_distance(params, state0, traj.y, configuration_only)
    n = len(d)
    minima = []
    for i in range(1, n):
        if traj.t[i] < t_start:
            continue
        left = d[i] <= d[i - 1]
        right = i == n - 1 or d[i] <= d[i + 1]
        if not (left and right):
            continue
        a, b = traj.t[i - 1], traj.t[min(i + 1, n - 1)]
        f = lambda s: float(phase_distance(params, state0, traj.interpolate(s), configuration_only))
        res = minimize_scalar(f, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
        if res.fun <= d[i]:
            minima.append((float(res.x), float(res.fun), i))
        else:
            minima.append((float(traj.t[i]), float(d[i]), i))
    return minima


def _confirm(traj, state0, t_c, i, configuration_only):
    """Distance at t_c from a fresh integration out of the preceding stored sample."""
    j = i - 1 if traj.t[i - 1] <= t_c else i - 2
    start = PhaseState.from_array(traj.y[j])
    span = t_c - traj.t[j]
    cfg = IntegratorConfig(rel_tol=min(traj.config.rel_tol, 1e-12), abs_tol=1e-14)
    y = integrate(traj.params, start, span, cfg).y[-1] if span > 0 else traj.y[j]
    return float(phase_distance(traj.params, state0, y, configuration_only))


def detect_closure(params: ModelParameters, state0: PhaseState, horizon: float, tol: float = 1e-6,
                   config: IntegratorConfig | None = None) -> ClosureReport:
    """Scan one trajectory for returns to ``state0``.

    The full state cannot recur before one radial period (r, p_r fix the
    radial phase), so the scan starts after half a period. Local minima of the
    sampled distance are refined on the dense output; candidates below ``tol``
    are re-checked by direct integration to the candidate time.
    """
    config = config or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-14)
    radial_period = math.pi / (2.0 * params.omega)
    predicted = params.k_den * radial_period if params.is_rational else None
    traj = integrate(params, state0, horizon, config)

    results = {}
    for config_only in (False, True):
        minima = _return_minima(traj, state0, radial_period / 2, config_only)
        first = None
        best = math.inf
        for t_c, dist, i in minima:
            if dist < 100 * tol:
                dist = _confirm(traj, state0, t_c, i, config_only)
            best = min(best, dist)
            if first is None and dist < tol:
                first = t_c
        results[config_only] = (first, best)
    return ClosureReport(
        recurrence_time=results[False][0],
        min_return_distance=results[False][1],
        predicted_time=predicted,
        phase_distance_metric=PHASE_METRIC,
        configuration_closure_time=results[True][0],
        configuration_min_distance=results[True][1],
        radial_period=radial_period,
        horizon=horizon,
        tol=tol,
    )


# ---------------------------------------------------------------- phase rotation

def _unwrapped_phase(z: np.ndarray) -> np.ndarray:
    raw = np.angle(z)
    jumps = np.diff(raw)
    steps = (jumps + np.pi) % (2 * np.pi) - np.pi
    if steps.size and np.max(np.abs(steps)) >= np.pi / 2:
        raise ValueError("phase increment between samples reaches pi/2; refine the step ceiling")
    return np.concatenate([[raw[0]], raw[0] + np.cumsum(steps)])


def _align(phase_wrapped: np.ndarray, guess: np.ndarray) -> np.ndarray:
    return phase_wrapped + 2 * np.pi * np.round((guess - phase_wrapped) / (2 * np.pi))


def phase_rotation_check(params: ModelParameters, trajectory: Trajectory) -> tuple[float, float]:
    """Mean rotation rates of arg f1 and arg f2 along ``trajectory``.

    The instantaneous rates oscillate with the radial motion, so the slope is
    fitted through stroboscopic samples at multiples of the radial period
    pi/(2 omega), where the periodic part of the phase repeats exactly.
    """
    if trajectory.t[-1] < math.pi / (2.0 * params.omega):
        raise InsufficientSpan("trajectory shorter than one radial period")
    cols = trajectory.columns()
    f1 = radial_factor_fields(params, *cols)
    f2 = angular_factor_fields(params, *cols)
    if min(np.min(np.abs(f1)), np.min(np.abs(f2))) < 1e-9:
        raise DegenerateOrbit("|f1| or |f2| below 1e-9 along the orbit")
    ph1 = _unwrapped_phase(f1)
    ph2 = _unwrapped_phase(f2)

    period = math.pi / (2.0 * params.omega)
    strobe = period * np.arange(int(trajectory.t[-1] / period * (1 + 1e-12)) + 1)
    strobe = strobe[strobe <= trajectory.t[-1]]
    ys = trajectory.interpolate(strobe)
    ycols = (ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3])
    s1 = _align(np.angle(radial_factor_fields(params, *ycols)), np.interp(strobe, trajectory.t, ph1))
    s2 = _align(np.angle(angular_factor_fields(params, *ycols)), np.interp(strobe, trajectory.t, ph2))
    rate1 = np.polyfit(strobe, s1, 1)[0]
    rate2 = np.polyfit(strobe, s2, 1)[0]
    return float(rate1), float(rate2)
