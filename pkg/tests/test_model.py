import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from scipy.optimize import minimize_scalar

from ttwlab.model import (
    ActionPair,
    AdmissibilityError,
    ConfigurationError,
    DomainError,
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
    integer_power,
    invariants,
    minimizing_angle,
    minimum_angular_integral,
    radial_factor,
    superintegral,
    superintegral_at_zero_A,
)

from conftest import params_and_states

Q = math.pi / 4
SQ7 = math.sqrt(7)


def _sympy_oracle():
    """Hamiltonian, its gradient and the factor moduli built symbolically."""
    r, phi, pr, pphi, w, a, b, k = sp.symbols("r phi p_r p_phi omega alpha beta k", positive=True)
    A = pphi ** 2 + a * k ** 2 / sp.cos(k * phi) ** 2 + b * k ** 2 / sp.sin(k * phi) ** 2
    H = pr ** 2 + w ** 2 * r ** 2 + A / r ** 2
    args = (r, phi, pr, pphi, w, a, b, k)
    grad = sp.lambdify(args, [sp.diff(H, v) for v in (r, phi, pr, pphi)], "math")
    re1, im1 = 2 * sp.sqrt(A) * pr / r, H - 2 * A / r ** 2
    re2 = sp.sqrt(A) * pphi * sp.sin(2 * k * phi)
    im2 = (b - a) * k ** 2 + A * sp.cos(2 * k * phi)
    mod1 = sp.lambdify(args, sp.expand(re1 ** 2 + im1 ** 2), "math")
    mod2 = sp.lambdify(args, sp.expand(re2 ** 2 + im2 ** 2), "math")
    return grad, mod1, mod2


GRAD_H, MOD1, MOD2 = _sympy_oracle()


def _args(params, s):
    return (s.r, s.phi, s.p_r, s.p_phi, params.omega, params.alpha, params.beta, params.k)


class TestParameters:
    def test_rational_reduces(self):
        p = ModelParameters.rational(1, 1, 2, 6, 4)
        assert (p.k_num, p.k_den, p.k) == (3, 2, 1.5)

    def test_from_string(self):
        assert ModelParameters.from_k_string(1, 1, 1, "5/2").is_rational
        irr = ModelParameters.from_k_string(1, 1, 1, "1.4142135623730951")
        assert not irr.is_rational and irr.k_num is None

    @pytest.mark.parametrize("kwargs", [dict(omega=0.0), dict(alpha=-1.0), dict(beta=float("nan"))])
    def test_rejects_nonpositive(self, kwargs):
        base = dict(omega=1.0, alpha=1.0, beta=1.0, k_real=1.0)
        base.update(kwargs)
        with pytest.raises(ValueError):
            ModelParameters(**base)

    def test_rejects_unreduced(self):
        with pytest.raises(ValueError):
            ModelParameters(1.0, 1.0, 1.0, 1.0, 2, 2)

    def test_irrational_has_no_superintegral(self):
        p = ModelParameters.irrational(1, 1, 2, math.sqrt(2))
        s = PhaseState(1.0, 0.3, 0.1, 0.2)
        with pytest.raises(ConfigurationError):
            superintegral(p, s)
        with pytest.raises(ConfigurationError):
            superintegral_at_zero_A(p, 3.0)
        assert invariants(p, s).C is None


class TestHandValues:
    def test_hamiltonian(self, unit_symmetric, unit_asymmetric):
        assert hamiltonian(unit_symmetric, PhaseState(1, Q, 0, 0)) == pytest.approx(5, rel=1e-14)
        assert hamiltonian(unit_symmetric, PhaseState(1, Q, 1, 0)) == pytest.approx(6, rel=1e-14)
        assert hamiltonian(unit_asymmetric, PhaseState(1, Q, 1, 1)) == pytest.approx(9, rel=1e-14)

    def test_angular_integral(self, unit_symmetric, unit_asymmetric):
        assert angular_integral(unit_symmetric, PhaseState(1, Q, 0, 0)) == pytest.approx(4, rel=1e-14)
        assert angular_integral(unit_asymmetric, PhaseState(1, Q, 1, 1)) == pytest.approx(7, rel=1e-14)

    def test_eom(self, unit_asymmetric):
        np.testing.assert_allclose(eom_rhs(unit_asymmetric, PhaseState(1, Q, 1, 1)), (2, 2, 12, 4),
                                   rtol=1e-13)

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_eom_midline_torque_vanishes(self, k):
        p = ModelParameters.rational(1.3, 0.7, 0.7, k, 1)
        rhs = eom_rhs(p, PhaseState(1.2, math.pi / (4 * k), 0.3, 0.0))
        assert abs(rhs[3]) < 1e-12

    def test_radial_factor(self, unit_symmetric, unit_asymmetric):
        assert radial_factor(unit_symmetric, PhaseState(1, Q, 0, 0)) == pytest.approx(-3j, abs=1e-13)
        assert radial_factor(unit_asymmetric, PhaseState(1, Q, 1, 1)) == pytest.approx(2 * SQ7 - 5j, rel=1e-14)

    def test_angular_factor(self, unit_symmetric, unit_asymmetric):
        assert abs(angular_factor(unit_symmetric, PhaseState(1, Q, 0, 0))) < 1e-14
        assert angular_factor(unit_asymmetric, PhaseState(1, Q, 1, 1)) == pytest.approx(SQ7 + 1j, rel=1e-14)

    def test_superintegral(self, unit_symmetric, unit_asymmetric):
        assert abs(superintegral(unit_symmetric, PhaseState(1, Q, 0, 0))) < 1e-13
        C = superintegral(unit_asymmetric, PhaseState(1, Q, 1, 1))
        assert C == pytest.approx(19 - 3 * SQ7 * 1j, rel=1e-14)

    def test_superintegral_at_zero_A(self):
        assert superintegral_at_zero_A(ModelParameters.rational(1, 1, 1, 1, 1), 5.0) == 0
        assert superintegral_at_zero_A(ModelParameters.rational(1, 1, 2, 1, 1), 9.0) == pytest.approx(-9)
        assert superintegral_at_zero_A(ModelParameters.rational(1, 1, 2, 2, 1), 2.0) == pytest.approx(-16j)

    def test_actions(self, unit_symmetric):
        assert actions_from_invariants(unit_symmetric, 5, 4) == pytest.approx((0.25, 1.0))
        I = actions_from_invariants(unit_symmetric, 9, 7)
        assert I == pytest.approx((9 / 4 - SQ7 / 2, SQ7 / 2), rel=1e-15)
        assert actions_from_invariants(ModelParameters.rational(2, 1, 1, 3, 2), 6.0, 0.0) == (0.75, 0.0)

    def test_actions_inadmissible(self, unit_symmetric):
        with pytest.raises(AdmissibilityError):
            actions_from_invariants(unit_symmetric, 1.0, 4.0)

    def test_energy_from_actions(self, unit_symmetric):
        assert energy_from_actions(unit_symmetric, ActionPair(0.25, 1.0)) == 5
        I = ActionPair(9 / 4 - SQ7 / 2, SQ7 / 2)
        assert energy_from_actions(unit_symmetric, I) == pytest.approx(9, rel=1e-15)
        assert energy_from_actions(unit_symmetric, ActionPair(0, 0)) == 0

    @pytest.mark.parametrize("omega,m,n,expected", [(1, 1, 1, (4, 4)), (1, 3, 2, (4, 6)), (2, 1, 2, (8, 4))])
    def test_frequencies(self, omega, m, n, expected):
        assert fundamental_frequencies(ModelParameters.rational(omega, 1, 1, m, n)) == expected

    def test_admissibility(self, unit_asymmetric, unit_symmetric):
        rep = admissibility(unit_asymmetric, 9, 7)
        assert rep.admissible
        assert rep.angular_margin == pytest.approx(7 - (1 + math.sqrt(2)) ** 2)
        assert (rep.radial_margin, rep.torus_margin) == pytest.approx((53, 8))
        rep = admissibility(unit_symmetric, 0, 4)
        assert not rep.admissible and rep.radial_margin == -16
        rep = admissibility(unit_symmetric, 5, 4)
        assert rep.torus_margin == 0 and not rep.admissible


class TestDomain:
    @pytest.mark.parametrize("state", [PhaseState(1, 0.0, 0, 0), PhaseState(1, math.pi / 2, 0, 0),
                                       PhaseState(0.0, Q, 0, 0), PhaseState(1, 1e-11, 0, 0),
                                       PhaseState(1, math.pi / 2 - 1e-11, 0, 0)])
    def test_boundary_rejected(self, unit_symmetric, state):
        with pytest.raises(DomainError):
            hamiltonian(unit_symmetric, state)
        with pytest.raises(DomainError):
            eom_rhs(unit_symmetric, state)

    def test_sector_scales_with_k(self):
        p = ModelParameters.rational(1, 1, 1, 3, 1)
        with pytest.raises(DomainError):
            angular_integral(p, PhaseState(1, 0.6, 0, 0))  # pi/6 < 0.6


@pytest.mark.parametrize("alpha,beta,m,n", [(1, 1, 1, 1), (1, 2, 3, 2), (0.3, 2.5, 5, 2), (4, 0.5, 1, 3)])
def test_minimum_angular_integral_matches_numeric_minimum(alpha, beta, m, n):
    p = ModelParameters.rational(1.0, alpha, beta, m, n)
    f = lambda phi: angular_integral(p, PhaseState(1.0, phi, 0.0, 0.0))
    w = p.sector_width
    res = minimize_scalar(f, bounds=(1e-6 * w, (1 - 1e-6) * w), method="bounded",
                          options={"xatol": 1e-12})
    assert res.fun == pytest.approx(minimum_angular_integral(p), rel=1e-10)
    assert f(minimizing_angle(p)) == pytest.approx(minimum_angular_integral(p), rel=1e-13)


def test_integer_power_matches_repeated_product():
    z = 0.7 - 1.3j
    for e in range(12):
        expected = 1 + 0j
        for _ in range(e):
            expected *= z
        assert integer_power(z, e) == pytest.approx(expected, rel=1e-14)
    zs = np.array([1j, -2 + 0.5j])
    np.testing.assert_allclose(integer_power(zs, 5), zs ** 5, rtol=1e-14)


@settings(max_examples=300, deadline=None)
@given(params_and_states())
def test_eom_is_hamiltonian_vector_field(ps):
    params, s = ps
    gr, gphi, gpr, gpphi = GRAD_H(*_args(params, s))
    rhs = eom_rhs(params, s)
    np.testing.assert_allclose(rhs, (gpr, gpphi, -gr, -gphi), rtol=1e-11, atol=1e-11 * max(map(abs, rhs)))
    # dH/dt along the flow
    dHdt = gr * rhs[0] + gphi * rhs[1] + gpr * rhs[2] + gpphi * rhs[3]
    scale = abs(gr * rhs[0]) + abs(gphi * rhs[1]) + abs(gpr * rhs[2]) + abs(gpphi * rhs[3])
    assert abs(dHdt) <= 1e-12 * scale


@settings(max_examples=300, deadline=None)
@given(params_and_states())
def test_modulus_identities(ps):
    params, s = ps
    inv = invariants(params, s)
    k2 = params.k ** 2
    target1 = inv.E ** 2 - 4 * params.omega ** 2 * inv.A
    target2 = (inv.A + (params.beta - params.alpha) * k2) ** 2 - 4 * k2 * params.beta * inv.A
    assert abs(inv.f1) ** 2 == pytest.approx(target1, rel=1e-12, abs=1e-12 * inv.E ** 2)
    assert abs(inv.f2) ** 2 == pytest.approx(target2, rel=1e-12, abs=1e-12 * inv.A ** 2)
    # symbolic expansion as a second, independent route
    assert MOD1(*_args(params, s)) == pytest.approx(target1, rel=1e-9, abs=1e-9 * inv.E ** 2)
    assert MOD2(*_args(params, s)) == pytest.approx(target2, rel=1e-9, abs=1e-9 * inv.A ** 2)
    assert inv.C == pytest.approx(inv.f1 ** params.m * inv.f2 ** params.n, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(params_and_states())
def test_admissible_for_every_state(ps):
    params, s = ps
    inv = invariants(params, s)
    rep = admissibility(params, inv.E, inv.A)
    assert rep.angular_margin >= -1e-12 * inv.A
    assert rep.radial_margin >= -1e-12 * inv.E ** 2
    I = actions_from_invariants(params, inv.E, max(inv.A, 0.0))
    assert I.I1 >= 0 and I.I2 >= 0
    assert energy_from_actions(params, I) == pytest.approx(inv.E, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(params_and_states())
def test_reflection_symmetry_when_alpha_equals_beta(ps):
    params, s = ps
    p = ModelParameters.rational(params.omega, params.alpha, params.alpha, params.m, params.n)
    mirrored = PhaseState(s.r, p.sector_width - s.phi, s.p_r, -s.p_phi)
    assert hamiltonian(p, mirrored) == pytest.approx(hamiltonian(p, s), rel=1e-10)
    assert angular_integral(p, mirrored) == pytest.approx(angular_integral(p, s), rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(params_and_states())
def test_momentum_reversal_parity(ps):
    params, s = ps
    rev = s.with_momenta_negated()
    f1, f2, C = radial_factor(params, s), angular_factor(params, s), superintegral(params, s)
    assert radial_factor(params, rev) == pytest.approx(-f1.conjugate(), rel=1e-12, abs=1e-12)
    assert angular_factor(params, rev) == pytest.approx(-f2.conjugate(), rel=1e-12, abs=1e-12)
    sign = (-1) ** (params.m + params.n)
    assert superintegral(params, rev) == pytest.approx(sign * C.conjugate(), rel=1e-11, abs=1e-11)
