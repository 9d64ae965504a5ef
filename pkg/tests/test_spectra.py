import math
import warnings

import numpy as np
import pytest

from combforge import Field2, Grid, Params
from combforge.errors import FitIllConditioned, OutOfRegime
from combforge.spatial import equilibrium, equilibrium_state
from combforge.spectra import (
    INDETERMINATE,
    STABLE,
    UNSTABLE,
    BlochSweep,
    apriori_box,
    apriori_violations,
    bloch_matrix,
    bloch_shift,
    critical_model,
    default_xi_grid,
    essential_line_check,
    fit_critical_curve,
    hermitian_part,
    small_eigs,
    sweep,
    translation_alignment,
)
from combforge.stationary import Solution, jacobian, multi_pulse, one_pulse, resample_solution, residual_norm


def _constant_solution(p, grid):
    c = Field2.constant(grid, *equilibrium_state(p))
    return Solution(c, p, residual_norm(c, p), True, ())


def _symbol_oracle(p, u, k2):
    # J S - eps has eigenvalues -eps +- i sqrt(det S) when det S > 0
    u1, u2 = u
    s11 = k2 + p.zeta - 3 * u1 * u1 - u2 * u2
    s22 = k2 + p.zeta - u1 * u1 - 3 * u2 * u2
    det = s11 * s22 - 4 * u1 * u1 * u2 * u2
    root = np.sqrt(det)
    return np.concatenate([-p.epsilon + 1j * root, -p.epsilon - 1j * root])


@pytest.fixture(scope="module")
def osc_sweep(osc_cell):
    return sweep(osc_cell, default_xi_grid(8))


def test_bloch_matrix_at_zero_is_the_jacobian(stable_pulse):
    assert np.array_equal(bloch_matrix(stable_pulse, 0.0), jacobian(stable_pulse.field, stable_pulse.params))
    with pytest.raises(ValueError):
        bloch_matrix(stable_pulse, math.pi)


@pytest.mark.parametrize("xi", [0.0, 0.7, -2.1])
def test_bloch_spectrum_of_constant_state(default_params, xi):
    g = Grid(12.0, 32)
    s = _constant_solution(default_params, g)
    ev = np.linalg.eigvals(bloch_matrix(s, xi))
    q = xi / g.period
    k2 = (g.k + q) ** 2
    # the Nyquist mode stands for both +-k_N, so its symbol is k_N^2 + q^2
    k2[g.n // 2] = g.k[g.n // 2] ** 2 + q * q
    want = _symbol_oracle(default_params, equilibrium_state(default_params), k2)
    assert np.max(np.abs(ev.real + default_params.epsilon)) < 1e-9
    assert np.max(np.abs(np.sort(ev.imag) - np.sort(want.imag))) < 1e-9


def test_hermitian_part(osc_cell):
    H = hermitian_part(osc_cell, 0.9)
    assert np.max(np.abs(H - H.conj().T)) < 1e-12


def test_bloch_shift_conventions():
    assert bloch_shift(0.5, 10.0) == 0.05
    assert bloch_shift(0.5, 10.0, "literal") == 5.0
    with pytest.raises(ValueError):
        bloch_shift(0.5, 10.0, "other")


def test_default_xi_grid():
    xs = default_xi_grid(8)
    assert len(xs) == 8 and xs[4] == 0.0 and xs[0] == -math.pi
    with pytest.raises(ValueError):
        default_xi_grid(7)


def test_stable_branch_verdict(stable_pulse):
    sw = sweep(stable_pulse, [0.0])
    v = sw.verdict
    assert v.zero_simple
    ev = sw.slices[0].eigenvalues
    tau = -np.max(ev.real[np.abs(ev) >= 1e-8])
    assert tau > 0
    assert sw.box_violations == 0


def test_unstable_branch_verdict(unstable_pulse):
    sw = sweep(unstable_pulse, [0.0])
    assert sw.verdict.kind == UNSTABLE
    assert sw.verdict.max_unstable_re > 0
    assert sw.box_violations == 0


def test_constant_state_is_indeterminate(default_params):
    s = _constant_solution(default_params, Grid(20.0, 64))
    sw = sweep(s, [-math.pi / 2, 0.0, math.pi / 2])
    assert sw.verdict.kind == INDETERMINATE
    assert sw.verdict.note
    assert not sw.critical


def test_oscillatory_cell_is_diffusively_stable(osc_sweep):
    v = osc_sweep.verdict
    assert v.kind == STABLE
    assert v.theta_bound > 0
    # every eigenvalue on every slice sits below -theta xi^2
    for sl in osc_sweep.slices:
        assert np.all(sl.eigenvalues.real <= -v.theta_bound * sl.xi**2 + 1e-9)
    assert osc_sweep.box_violations == 0


def test_critical_curve_is_real_and_even(osc_sweep):
    d = dict(osc_sweep.critical)
    for xi, lam in d.items():
        assert abs(lam.imag) < 1e-8
        if -xi in d:
            assert abs(lam - d[-xi]) < 1e-8


def test_conjugation_symmetry(osc_cell):
    for xi in (0.4, 1.9):
        a = np.linalg.eigvals(bloch_matrix(osc_cell, xi))
        b = np.linalg.eigvals(bloch_matrix(osc_cell, -xi)).conj()
        assert max(np.min(np.abs(b - lam)) for lam in a) < 1e-9


def test_translation_eigenvector_alignment(stable_pulse):
    assert translation_alignment(stable_pulse) < 1e-4


def test_eigenvalues_converge_under_refinement(osc_cell):
    fine = resample_solution(osc_cell, osc_cell.grid.refined(2))
    a = np.linalg.eigvals(jacobian(osc_cell.field, osc_cell.params))
    b = np.linalg.eigvals(jacobian(fine.field, fine.params))
    # modes near the grid scale move with n by construction; compare the
    # resolved part, |lambda| below a quarter of the coarse Nyquist symbol
    kn = math.pi * osc_cell.grid.n / osc_cell.period
    a = a[(a.real >= -1) & (np.abs(a) < 0.25 * kn**2)]
    assert max(np.min(np.abs(b - lam)) for lam in a) < 1e-7


def test_single_pulse_small_eigenvalues(osc_cell):
    r = small_eigs(osc_cell, 0.05)
    assert r.count == 1
    assert abs(r.eigenvalues[0]) < 1e-8
    assert r.zero_is_simple


def test_two_pulse_stable_family_sign(osc_params):
    s1 = one_pulse(osc_params, Grid(80.0, 400))
    r = small_eigs(multi_pulse(s1, [-7.3, 7.3]), 0.09)
    assert r.count == 2
    (lam,) = r.nonzero
    assert lam.real < 0
    assert r.window_change < 0.1


def test_fit_recovers_synthetic_curve():
    a, b, al, be = 0.07, -2.5, 0.22, 0.17
    eq = equilibrium(Params(0.25, 0.475, 0.1375))
    xi = default_xi_grid(8)
    sweeps = []
    for P in (40.0, 50.0, 60.0, 70.0):
        crit = [(x, complex(critical_model(a, b, al, be, x, P / 2))) for x in xi]
        sweeps.append(BlochSweep([], crit, None, eq, P))
    fit = fit_critical_curve(sweeps, eq)
    assert (fit.a, fit.b, fit.alpha, fit.beta) == pytest.approx((a, b, al, be), abs=1e-8)
    assert fit.rms_relative < 1e-8
    with pytest.raises(FitIllConditioned):
        fit_critical_curve(sweeps[:3], eq)


def test_apriori_box_values(default_params):
    g = Grid(20.0, 64)
    p = Params(1.0, 2.0, 0.0)
    phi = Field2.constant(g, math.sqrt(2), 0.0)
    box = apriori_box(Solution(phi, p, 0.0, True, ()))
    assert box.eta1 == pytest.approx(9.0)
    zero = Field2.constant(g, 0.0)
    assert apriori_box(Solution(zero, Params(-1.0 + 2.5, 1.0, 0.0), 0.0, True, ())).eta1 == pytest.approx(1.5)
    assert apriori_violations(box, np.array([-0.01 + 1j, 10.0 + 0j]), 0.05) == 1


def test_essential_line(default_params):
    k = 2 * math.pi * np.arange(512) / 60.0
    assert essential_line_check(default_params, k) < 1e-12
    assert essential_line_check(Params(1.0, 2.0, 0.0), k) == 0.0


def test_essential_line_out_of_regime(default_params):
    k = np.linspace(0, 0.5, 16)
    with pytest.warns(OutOfRegime):
        dev = essential_line_check(default_params, k, u_inf=(0.8, 0.0))
    assert dev > 0
