"""Time integration of Hamilton's equations and admissible initial conditions.

Two schemes:

* ``adaptive_embedded``: Dormand-Prince 5(4), local error controlled by the
  embedded 4th order solution, FSAL, step ceiling (pi/(2 omega))/200.
* ``implicit_midpoint``: fixed step, symmetric, 2nd order; each step solved by
  fixed-point iteration.

Steps whose stages leave the open sector (or the guard band around its walls)
are rejected and halved; failure is raised only once the step underflows.
Between accepted steps the trajectory is interpolated by cubic Hermite
polynomials built from the stored states and time derivatives.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .model import (
    GUARD_BAND,
    AdmissibilityError,
    ModelParameters,
    PhaseState,
    admissibility,
    angular_integral_fields,
    check_state,
    hamiltonian_fields,
    minimum_energy,
)


class IntegrationError(RuntimeError):
    pass


class StepFailure(IntegrationError):
    """Step size underflowed or the implicit solve did not converge."""


class GuardError(StepFailure):
    """Steps kept landing inside the guard band down to the minimum step."""


class SamplingExhausted(RuntimeError):
    pass


class Scheme(str, Enum):
    ADAPTIVE_EMBEDDED = "adaptive_embedded"
    IMPLICIT_MIDPOINT = "implicit_midpoint"


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: Scheme = Scheme.ADAPTIVE_EMBEDDED
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    dt: float = 1e-3
    max_steps: int = 2_000_000
    boundary_guard: float = GUARD_BAND
    dt_max: float | None = None  # None: (pi/(2 omega))/200
    dt_min: float = 1e-14
    newton_tol: float = 1e-14
    max_iterations: int = 200

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.boundary_guard < 0:
            raise ValueError("boundary_guard must be nonnegative")

    def step_ceiling(self, params: ModelParameters) -> float:
        if self.dt_max is not None:
            return self.dt_max
        return (math.pi / (2.0 * params.omega)) / 200.0


@dataclass
class Trajectory:
    t: np.ndarray       # (N,)
    y: np.ndarray       # (N, 4) columns r, phi, p_r, p_phi
    dydt: np.ndarray    # (N, 4) time derivatives, for dense output
    params: ModelParameters
    config: IntegratorConfig
    accepted: int = 0
    rejected: int = 0

    def __len__(self):
        return len(self.t)

    @property
    def step_stats(self) -> tuple[int, int]:
        return self.accepted, self.rejected

    @property
    def samples(self) -> list[tuple[float, PhaseState]]:
        return [(float(t), PhaseState.from_array(y)) for t, y in zip(self.t, self.y)]

    @property
    def initial_state(self) -> PhaseState:
        return PhaseState.from_array(self.y[0])

    @property
    def final_state(self) -> PhaseState:
        return PhaseState.from_array(self.y[-1])

    def columns(self):
        """(r, phi, p_r, p_phi) arrays."""
        return self.y[:, 0], self.y[:, 1], self.y[:, 2], self.y[:, 3]

    def interpolate(self, times) -> np.ndarray:
        """Cubic Hermite dense output at ``times`` (scalar or array), shape (..., 4)."""
        times = np.asarray(times, dtype=float)
        if np.any(times < self.t[0]) or np.any(times > self.t[-1]):
            raise ValueError("interpolation outside the integrated span")
        if len(self.t) == 1:
            return np.broadcast_to(self.y[0], times.shape + (4,)).copy()
        i = np.clip(np.searchsorted(self.t, times, side="right") - 1, 0, len(self.t) - 2)
        t0, t1 = self.t[i], self.t[i + 1]
        h = (t1 - t0)[..., None]
        s = ((times - t0) / (t1 - t0))[..., None]
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s ** 2 * (3 - 2 * s)
        h11 = s ** 2 * (s - 1)
        return (h00 * self.y[i] + h10 * h * self.dydt[i]
                + h01 * self.y[i + 1] + h11 * h * self.dydt[i + 1])


class _OutOfSector(Exception):
    pass


def _make_rhs(params: ModelParameters, guard: float):
    """Scalar right-hand side on plain floats (hot loop, avoids numpy overhead)."""
    k, a, b, w2 = params.k, params.alpha, params.beta, params.omega ** 2
    ak2, bk2 = a * k * k, b * k * k
    ak3, bk3 = 2.0 * a * k ** 3, 2.0 * b * k ** 3
    upper = params.sector_width - guard
    sin, cos = math.sin, math.cos

    def rhs(r, phi, pr, pphi):
        if not (r > 0.0 and guard < phi < upper):
            raise _OutOfSector
        s = sin(k * phi)
        c = cos(k * phi)
        c2, s2 = c * c, s * s
        V = ak2 / c2 + bk2 / s2
        dV = ak3 * s / (c2 * c) - bk3 * c / (s2 * s)
        r2 = r * r
        return (2.0 * pr, 2.0 * pphi / r2, 2.0 * (pphi * pphi + V) / (r2 * r) - 2.0 * w2 * r, -dV / r2)

    return rhs


# Dormand-Prince 5(4) tableau.
_A21 = 1 / 5
_A31, _A32 = 3 / 40, 9 / 40
_A41, _A42, _A43 = 44 / 45, -56 / 15, 32 / 9
_A51, _A52, _A53, _A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
_A61, _A62, _A63, _A64, _A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
_B1, _B3, _B4, _B5, _B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
# 5th order minus embedded 4th order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200,
                                 22 / 525, -1 / 40)


def _integrate_adaptive(rhs, y0, t_end, config, h_max):
    t = 0.0
    y = tuple(y0)
    k1 = rhs(*y)
    ts, ys, fs = [t], [y], [k1]
    rtol, atol = config.rel_tol, config.abs_tol
    h = min(h_max, t_end)
    accepted = rejected = 0
    while t < t_end:
        if accepted + rejected >= config.max_steps:
            raise StepFailure(f"max_steps={config.max_steps} exhausted at t={t}")
        last = t + h >= t_end
        if last:
            h = t_end - t
        y1, y2, y3, y4 = y
        try:
            a = k1
            b = rhs(y1 + h * _A21 * a[0], y2 + h * _A21 * a[1], y3 + h * _A21 * a[2], y4 + h * _A21 * a[3])
            c = rhs(*[y[j] + h * (_A31 * a[j] + _A32 * b[j]) for j in range(4)])
            d = rhs(*[y[j] + h * (_A41 * a[j] + _A42 * b[j] + _A43 * c[j]) for j in range(4)])
            e = rhs(*[y[j] + h * (_A51 * a[j] + _A52 * b[j] + _A53 * c[j] + _A54 * d[j]) for j in range(4)])
            f = rhs(*[y[j] + h * (_A61 * a[j] + _A62 * b[j] + _A63 * c[j] + _A64 * d[j] + _A65 * e[j])
                      for j in range(4)])
            ynew = tuple(y[j] + h * (_B1 * a[j] + _B3 * c[j] + _B4 * d[j] + _B5 * e[j] + _B6 * f[j])
                         for j in range(4))
            g = rhs(*ynew)
        except (_OutOfSector, ZeroDivisionError, OverflowError):
            rejected += 1
            h *= 0.5
            if h < config.dt_min:
                raise GuardError(f"step underflow near the sector boundary at t={t}") from None
            continue
        err = 0.0
        for j in range(4):
            ej = h * (_E1 * a[j] + _E3 * c[j] + _E4 * d[j] + _E5 * e[j] + _E6 * f[j] + _E7 * g[j])
            sc = atol + rtol * max(abs(y[j]), abs(ynew[j]))
            err += (ej / sc) ** 2
        err = math.sqrt(err / 4.0)
        if not math.isfinite(err):
            err = math.inf
        if err <= 1.0:
            t = t_end if last else t + h
            y = ynew
            k1 = g
            ts.append(t)
            ys.append(y)
            fs.append(g)
            accepted += 1
            factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            h = min(h_max, h * factor)
        else:
            rejected += 1
            h *= max(0.2, 0.9 * err ** -0.2)
            if h < config.dt_min:
                raise StepFailure(f"step size underflow at t={t}")
    return ts, ys, fs, accepted, rejected


def _integrate_midpoint(rhs, y0, t_end, config):
    nsteps = max(1, int(math.ceil(t_end / config.dt - 1e-9)))
    dt = t_end / nsteps
    if nsteps > config.max_steps:
        raise StepFailure(f"{nsteps} steps exceed max_steps={config.max_steps}")
    y = tuple(y0)
    ts, ys, fs = [0.0], [y], [rhs(*y)]
    for i in range(nsteps):
        # explicit Euler predictor, then fixed-point iteration on the midpoint rule
        f0 = fs[-1]
        ynew = tuple(y[j] + dt * f0[j] for j in range(4))
        for _ in range(config.max_iterations):
            try:
                fm = rhs(*[0.5 * (y[j] + ynew[j]) for j in range(4)])
            except _OutOfSector:
                raise GuardError(f"midpoint left the sector at t={ts[-1]}") from None
            update = tuple(y[j] + dt * fm[j] for j in range(4))
            resid = max(abs(update[j] - ynew[j]) / max(1.0, abs(update[j])) for j in range(4))
            ynew = update
            if resid <= config.newton_tol:
                break
        else:
            if resid > 1e3 * config.newton_tol:
                raise StepFailure(f"fixed-point iteration stalled at residual {resid:.3e}")
        try:
            fnew = rhs(*ynew)
        except _OutOfSector:
            raise GuardError(f"step landed outside the sector at t={ts[-1]}") from None
        y = ynew
        ts.append((i + 1) * dt)
        ys.append(y)
        fs.append(fnew)
    return ts, ys, fs, nsteps, 0


def integrate(params: ModelParameters, state0: PhaseState, t_end: float,
              config: IntegratorConfig | None = None) -> Trajectory:
    config = config or IntegratorConfig()
    check_state(params, state0, config.boundary_guard)
    if t_end < 0:
        raise ValueError("t_end must be nonnegative")
    rhs = _make_rhs(params, config.boundary_guard)
    y0 = (state0.r, state0.phi, state0.p_r, state0.p_phi)
    if t_end == 0:
        ts, ys, fs, acc, rej = [0.0], [y0], [rhs(*y0)], 0, 0
    elif config.scheme is Scheme.ADAPTIVE_EMBEDDED:
        ts, ys, fs, acc, rej = _integrate_adaptive(rhs, y0, t_end, config, config.step_ceiling(params))
    else:
        ts, ys, fs, acc, rej = _integrate_midpoint(rhs, y0, t_end, config)
    return Trajectory(np.array(ts), np.array(ys), np.array(fs), params, config, acc, rej)


def advance(params: ModelParameters, state0: PhaseState, t_end: float,
            config: IntegratorConfig | None = None) -> PhaseState:
    """Final state of :func:`integrate`."""
    return integrate(params, state0, t_end, config).final_state


def default_energy_range(params: ModelParameters) -> tuple[float, float]:
    e_min = minimum_energy(params)
    return 1.5 * e_min, 3.0 * e_min


def sample_admissible_state(params: ModelParameters, seed: int,
                            E_range: tuple[float, float] | None = None,
                            max_tries: int = 200_000,
                            guard: float = GUARD_BAND) -> PhaseState:
    """Deterministic rejection sample of a bounded state with energy in ``E_range``.

    The proposal box follows from the torus equations at E <= E_hi:
    omega^2 r^2 <= E and A_min/r^2 <= E bound r, p_r^2 <= E and p_phi^2 <= E r^2
    bound the momenta. The first draw with E in range, admissible (E, A) and
    phi off the guard band is returned.
    """
    E_lo, E_hi = E_range or default_energy_range(params)
    if not E_lo < E_hi:
        raise ValueError("empty energy range")
    if E_hi <= minimum_energy(params):
        raise AdmissibilityError(
            f"E_range upper end {E_hi} does not exceed the minimum energy {minimum_energy(params)}")
    rng = np.random.default_rng(seed)
    a_min = params.k ** 2 * (math.sqrt(params.alpha) + math.sqrt(params.beta)) ** 2
    r_lo = math.sqrt(a_min / E_hi)
    r_hi = math.sqrt(E_hi) / params.omega
    p_max = math.sqrt(E_hi)
    width = params.sector_width
    batch = 4096
    tried = 0
    while tried < max_tries:
        u = rng.random((batch, 4))
        r = r_lo + (r_hi - r_lo) * u[:, 0]
        phi = width * u[:, 1]
        p_r = p_max * (2 * u[:, 2] - 1)
        p_phi = p_max * r * (2 * u[:, 3] - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            E = hamiltonian_fields(params, r, phi, p_r, p_phi)
            A = angular_integral_fields(params, r, phi, p_r, p_phi)
        ok = (phi > guard) & (phi < width - guard) & (r > 0) & (E >= E_lo) & (E <= E_hi)
        for i in np.flatnonzero(ok):
            if i + tried >= max_tries:
                break
            if admissibility(params, float(E[i]), float(A[i])).admissible:
                return PhaseState(float(r[i]), float(phi[i]), float(p_r[i]), float(p_phi[i]))
        tried += batch
    raise SamplingExhausted(f"no admissible state in E_range={E_lo, E_hi} after {max_tries} draws")
