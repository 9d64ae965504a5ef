import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combforge import Field2, Grid, Params, soliton_profile
from combforge.errors import IntegratorBlowup, NoConvergence, NotSaddleFocus
from combforge.spatial import (
    REVERSER,
    equilibrium,
    equilibrium_state,
    kernel_simplicity,
    numerical_kernel_dimension,
    nu_squared,
    origin_determinant,
    shoot_symmetric_periodic,
    state_jacobian,
    vector_field,
)
from combforge.stationary import Solution, residual_norm


def _uinf_oracle(zeta, f, eps, start):
    mpmath.mp.dps = 30
    F = lambda a, b: [zeta * a + eps * b - (a * a + b * b) * a, zeta * b - eps * a - (a * a + b * b) * b + eps * f]
    r = mpmath.findroot(F, start)
    return float(r[0]), float(r[1])


def test_vector_field_at_origin():
    assert np.all(vector_field(np.zeros(4), Params(1.0, 2.0, 0.0)).array == 0)
    p = Params(1.0, 2.0, 0.05)
    assert np.allclose(vector_field(np.zeros(4), p).array, [0, 0, 0, p.epsilon * p.f], atol=0, rtol=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4))
def test_reversibility(U):
    p = Params(1.0, 2.0, 0.05)
    U = np.array(U)
    lhs = REVERSER @ vector_field(U, p).array
    rhs = -vector_field(REVERSER @ U, p).array
    assert np.max(np.abs(lhs - rhs)) < 1e-14


def test_origin_determinant():
    for z in (0.5, 1.0, 2.5):
        assert origin_determinant(Params(z, 1.0, 0.1)) == pytest.approx(z * z, abs=1e-12)


def test_equilibrium_matches_independent_root(default_params, osc_params):
    assert equilibrium_state(default_params) == pytest.approx(_uinf_oracle(1.0, 2.0, 0.05, (0.0, -0.1)), abs=1e-14)
    assert equilibrium_state(osc_params) == pytest.approx(_uinf_oracle(1.0, 0.95, 0.55, (0.48, -0.47)), abs=1e-13)
    # frozen values from the root above
    assert equilibrium_state(default_params) == pytest.approx((0.0050903948812938, -0.1007714128239751), abs=1e-15)
    assert math.hypot(*equilibrium_state(default_params)) < 0.2


def test_zero_eps_is_not_a_saddle_focus():
    with pytest.raises(NotSaddleFocus):
        equilibrium(Params(1.0, 2.0, 0.0))


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 0.05))
def test_nu_formula_matches_direct_eigenvalues(eps):
    p = Params(1.0, 2.0, eps)
    eq = equilibrium(p)
    ev = np.linalg.eigvals(state_jacobian(eq.U_inf, p))
    closed = np.array([s * v for v in eq.nu for s in (1, -1)])
    for lam in ev:
        assert np.min(np.abs(closed - lam)) < 1e-10
    n2 = nu_squared(eq.u_inf, p)
    for v, w in zip(eq.nu, n2):
        assert v * v == pytest.approx(w, abs=1e-12)


def test_eigenvalues_form_a_quadruple(default_params, osc_params):
    for p in (default_params, osc_params):
        eq = equilibrium(p)
        ev = eq.eigenvalues
        for lam in ev:
            for partner in (-lam, lam.conjugate(), -lam.conjugate()):
                assert np.min(np.abs(ev - partner)) < 1e-10
        assert eq.alpha > 0 and eq.beta > 0


def test_rates_in_the_oscillatory_regime(osc_params):
    eq = equilibrium(osc_params)
    # regression values of the spatial rates used by the critical-curve fit
    assert (eq.alpha, eq.beta) == pytest.approx((0.44899, 0.34050), abs=1e-5)


def test_shooting_reproduces_collocation(stable_pulse, osc_cell):
    for s in (stable_pulse, osc_cell):
        j = s.grid.n // 2
        orbit = shoot_symmetric_periodic(s.period / 2, s.params, (s.field.u1[j], s.field.u2[j]))
        assert np.max(np.abs(orbit.sample(s.grid.x) - s.field.complex)) < 1e-6
        assert orbit.section_residual < 1e-10


def test_shooting_from_equilibrium_returns_it(default_params):
    u = equilibrium_state(default_params)
    orbit = shoot_symmetric_periodic(12.0, default_params, u)
    assert np.max(np.abs(np.array(orbit.state) - [u[0], u[1], 0, 0])) < 1e-10


def test_shooting_from_far_guess_fails(default_params):
    with pytest.raises((NoConvergence, IntegratorBlowup)):
        shoot_symmetric_periodic(30.0, default_params, (8.0, 8.0))


def test_kernel_simplicity(stable_pulse):
    assert kernel_simplicity(stable_pulse)
    assert numerical_kernel_dimension(stable_pulse) == 1


def test_zero_eps_soliton_has_two_dimensional_kernel():
    g = Grid(60.0, 256)
    p = Params(1.0, 2.0, 0.0)
    phi = soliton_profile(0.3, 1.0, 0.0, g)
    s = Solution(phi, p, residual_norm(phi, p), True, (0.0,))
    assert numerical_kernel_dimension(s) == 2
    assert not kernel_simplicity(s)


def test_constant_state_has_empty_kernel(default_params):
    g = Grid(60.0, 128)
    c = Field2.constant(g, *equilibrium_state(default_params))
    s = Solution(c, default_params, residual_norm(c, default_params), True, ())
    assert numerical_kernel_dimension(s) == 0
    assert not kernel_simplicity(s)
