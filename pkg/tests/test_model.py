import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from combforge import Grid, Params, SolitonTemplate, bifurcation_angles, build_guess, soliton_profile
from combforge.errors import DegenerateBifurcation, NoBifurcation, OverlapWarning, ZeroEpsilon
from combforge.model import (
    background,
    period_list,
    rescale_from_physical,
    rescale_to_physical,
    rotation,
    scale_factors,
    scale_params,
    unit_period_dispersion,
)
from combforge.spatial import equilibrium_state

G = Grid(60.0, 512)


def test_params_validation():
    with pytest.raises(ValueError):
        Params(0.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        Params(1.0, -1.0, 0.1)
    with pytest.raises(ValueError):
        Params(1.0, 1.0, -0.1)
    assert Params(1, 2, 0.0).with_epsilon(0.3).epsilon == 0.3


def test_stable_angle_against_high_precision():
    mpmath.mp.dps = 30
    want = float(mpmath.acos(2 * mpmath.sqrt(2) / (2 * mpmath.pi)))
    ang = bifurcation_angles(Params(1.0, 2.0, 0.05))
    assert ang.theta_stable == pytest.approx(want, abs=1e-14)
    assert ang.theta_unstable == -ang.theta_stable
    assert math.cos(ang.theta_stable) == pytest.approx(math.sqrt(2) / math.pi, abs=1e-15)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.1, 10.0))
def test_both_angles_solve_the_condition(zeta, f):
    if 8 * zeta >= math.pi**2 * f**2 * (1 - 1e-9):
        return
    ang = bifurcation_angles(Params(zeta, f, 0.0))
    for th in (ang.theta_stable, ang.theta_unstable):
        assert abs(math.pi * f * math.cos(th) - 2 * math.sqrt(2 * zeta)) < 1e-12 * max(1.0, math.pi * f)
    assert 0 < ang.theta_stable < math.pi


def test_degenerate_and_infeasible():
    with pytest.raises(DegenerateBifurcation):
        bifurcation_angles(Params(math.pi**2 * 4 / 8, 2.0, 0.0))
    with pytest.raises(NoBifurcation):
        bifurcation_angles(Params(10.0, 1.0, 0.0))


def test_soliton_peak_values():
    g = Grid(40.0, 256)
    j = g.n // 2
    assert g.x[j] == 0.0
    s0 = soliton_profile(0.0, 1.0, 0.0, g)
    assert (s0.u1[j], s0.u2[j]) == pytest.approx((math.sqrt(2), 0.0), abs=1e-15)
    s1 = soliton_profile(math.pi / 2, 1.0, 0.0, g)
    assert (s1.u1[j], s1.u2[j]) == pytest.approx((0.0, math.sqrt(2)), abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(0.2, 4.0), st.floats(-10, 10))
def test_soliton_rotation_equivariance(theta, zeta, center):
    base = soliton_profile(0.0, zeta, center, G)
    rot = soliton_profile(theta, zeta, center, G)
    want = rotation(theta) @ np.vstack([base.u1, base.u2])
    assert np.max(np.abs(np.vstack([rot.u1, rot.u2]) - want)) < 1e-13


def test_soliton_wraps_periodically():
    a = soliton_profile(0.3, 1.0, 29.0, G)
    b = soliton_profile(0.3, 1.0, -31.0, G)
    assert np.max(np.abs((a - b).vector)) < 1e-12


def test_build_guess_single_center_at_zero_eps():
    p = Params(1.0, 2.0, 0.0)
    th = bifurcation_angles(p).theta_stable
    g = build_guess(SolitonTemplate(th, (0.0,)), p, G)
    assert np.array_equal(g.vector, soliton_profile(th, 1.0, 0.0, G).vector)


def test_build_guess_two_centers_at_origin():
    p = Params(1.0, 2.0, 0.05)
    th = bifurcation_angles(p).theta_stable
    T = 7.0
    g = build_guess(SolitonTemplate(th, (-T, T)), p, G)
    j = G.n // 2
    ub = equilibrium_state(p)
    amp = 2 * math.sqrt(2) / math.cosh(T)
    assert g.u1[j] == pytest.approx(amp * math.cos(th) + ub[0], abs=1e-14)
    assert g.u2[j] == pytest.approx(amp * math.sin(th) + ub[1], abs=1e-14)


def test_build_guess_empty_is_constant_state():
    p = Params(1.0, 2.0, 0.05)
    g = build_guess(SolitonTemplate(0.4), p, G)
    ub = background(p)
    assert np.all(g.u1 == ub[0]) and np.all(g.u2 == ub[1])
    assert background(p.with_epsilon(0.0)) == (0.0, 0.0)


def test_build_guess_is_additive():
    p = Params(1.0, 2.0, 0.0)
    a = build_guess(SolitonTemplate(0.5, (-20.0,)), p, G)
    b = build_guess(SolitonTemplate(0.5, (15.0,)), p, G)
    ab = build_guess(SolitonTemplate(0.5, (-20.0, 15.0)), p, G)
    assert np.max(np.abs((ab - (a + b)).vector)) < 1e-15


def test_overlap_warning_includes_periodic_gap():
    p = Params(1.0, 2.0, 0.0)
    with pytest.warns(OverlapWarning):
        build_guess(SolitonTemplate(0.5, (-1.0, 1.0)), p, G)
    with pytest.warns(OverlapWarning):
        build_guess(SolitonTemplate(0.5, (-29.0, 29.0)), p, G)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_guess(SolitonTemplate(0.5, (-10.0, 10.0)), p, G)


def test_template_requires_sorted_centers():
    with pytest.raises(ValueError):
        SolitonTemplate(0.1, (3.0, 1.0))
    t = SolitonTemplate(0.1, (-2.0, 2.0), include_center_pulse=True)
    assert t.is_symmetric and t.all_centers == (-2.0, 0.0, 2.0)


def test_scale_factors_follow_the_rescaling():
    # amplitude eps^{-1/2}, zeta eps^{-1}, forcing eps^{-1/2}
    sf = scale_factors(0.01, 1.0)
    assert sf.amplitude == pytest.approx(10.0)
    assert sf.zeta == pytest.approx(100.0)
    assert sf.forcing == pytest.approx(10.0)
    with pytest.raises(ZeroEpsilon):
        scale_factors(0.0, 1.0)


def test_rescale_identity_at_unit_eps_and_d(stable_pulse):
    from dataclasses import replace

    s = replace(stable_pulse, params=stable_pulse.params.with_epsilon(1.0))
    r = rescale_to_physical(s, 1.0)
    assert np.array_equal(r.field.vector, s.field.vector)
    assert r.period == s.period
    assert (r.params.zeta, r.params.f) == (s.params.zeta, s.params.f)


def test_rescale_amplitude_and_detuning(stable_pulse):
    from dataclasses import replace

    s = replace(stable_pulse, params=stable_pulse.params.with_epsilon(0.01))
    r = rescale_to_physical(s, 1.0)
    assert r.field.sup_norm() == pytest.approx(10 * s.field.sup_norm(), rel=1e-14)
    assert r.params.zeta == pytest.approx(100 * s.params.zeta)
    assert r.params.epsilon == 1.0 and r.params.d == 1.0


def test_rescale_round_trip(stable_pulse):
    r = rescale_to_physical(stable_pulse, 0.7)
    back = rescale_from_physical(r, stable_pulse.params.epsilon)
    assert np.allclose(back.field.vector, stable_pulse.field.vector, rtol=1e-13, atol=0)
    assert back.period == pytest.approx(stable_pulse.period, rel=1e-13)
    assert back.params.zeta == pytest.approx(stable_pulse.params.zeta, rel=1e-13)
    assert back.params.f == pytest.approx(stable_pulse.params.f, rel=1e-13)


def test_unit_period_dispersion(stable_pulse):
    eps, L = stable_pulse.params.epsilon, stable_pulse.period
    r = rescale_to_physical(stable_pulse, unit_period_dispersion(eps, L))
    assert r.period == pytest.approx(1.0, rel=1e-13)


def test_scale_params():
    q = scale_params(Params(1.0, 0.95, 0.55), 0.5)
    assert (q.zeta, q.f, q.epsilon) == pytest.approx((0.25, 0.475, 0.1375))
    assert period_list([10.0, 20.0], 0.5) == [20.0, 40.0]
