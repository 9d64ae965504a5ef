"""Bloch spectra of stationary solutions and the verdicts built on them.

The Bloch operator at ``xi`` in [-pi, pi) replaces ``d/dx`` by
``d/dx + i xi / L``; the union of its spectra over xi is the spectrum of the
linearization on the whole line.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .errors import FitIllConditioned, OutOfRegime, TrackingLost, WindowTooSmall
from .grid import Grid, derivative_real, regrid, second_derivative_matrix
from .model import Params
from .spatial import Equilibrium, equilibrium_state
from .stationary import NewtonOpts, Solution, jacobian, linearization, newton_solve

DEAD_BAND = 1e-9
ZERO_TOL = 1e-8
XI_EXCLUDE = 0.05

STABLE = "DiffusivelyStable"
UNSTABLE = "Unstable"
INDETERMINATE = "Indeterminate"


def _threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("COMBFORGE_THREADS")
    return max(1, int(env)) if env else 1


def bloch_shift(xi: float, period: float, convention: str = "period") -> float:
    """Wavenumber shift for Bloch parameter ``xi``.

    ``"period"`` uses xi/L, which makes the union over xi in [-pi, pi)
    reproduce the line spectrum. ``"literal"`` uses xi*L for comparison.
    """
    if convention == "period":
        return xi / period
    if convention == "literal":
        return xi * period
    raise ValueError(f"unknown Bloch convention {convention!r}")


def bloch_matrix(sol: Solution, xi: float, convention: str = "period") -> np.ndarray:
    if not -math.pi <= xi < math.pi:
        raise ValueError(f"xi must lie in [-pi, pi), got {xi}")
    if xi == 0.0:
        return jacobian(sol.field, sol.params)
    d2 = second_derivative_matrix(sol.grid, bloch_shift(xi, sol.period, convention))
    return linearization(sol.field, sol.params, d2)


def hermitian_part(sol: Solution, xi: float, convention: str = "period") -> np.ndarray:
    """The operator ``L_xi(u)`` before multiplication by J (Hermitian)."""
    n = sol.grid.n
    A = bloch_matrix(sol, xi, convention)
    eps = sol.params.epsilon
    A = A + eps * np.eye(2 * n)
    # J^{-1} = -J
    out = np.empty_like(A)
    out[:n] = -A[n:]
    out[n:] = A[:n]
    return out


@dataclass(frozen=True)
class BlochSlice:
    xi: float
    eigenvalues: np.ndarray


@dataclass(frozen=True)
class StabilityVerdict:
    kind: str
    theta_bound: float
    gap: float
    zero_simple: bool
    max_unstable_re: float
    note: str = ""


@dataclass(frozen=True)
class AprioriBox:
    rho: float
    eta1: float
    eta2: float | None = None


@dataclass
class BlochSweep:
    slices: list[BlochSlice]
    critical: list[tuple[float, complex]]
    verdict: StabilityVerdict
    params: Params
    period: float
    box: AprioriBox | None = None
    box_violations: int = 0

    @property
    def critical_curve(self) -> list[tuple[float, float]]:
        return [(xi, float(lam.real)) for xi, lam in self.critical]

    def critical_at(self, xi: float) -> complex:
        for x, lam in self.critical:
            if abs(x - xi) < 1e-14:
                return lam
        raise KeyError(xi)


def eigenvalues(A: np.ndarray) -> np.ndarray:
    return np.linalg.eigvals(A)


def slice_spectrum(sol: Solution, xi: float, convention: str = "period") -> BlochSlice:
    return BlochSlice(float(xi), eigenvalues(bloch_matrix(sol, xi, convention)))


def _nearest(ev: np.ndarray, target: complex) -> tuple[int, float]:
    d = np.abs(ev - target)
    order = np.argsort(d)
    i = int(order[0])
    ratio = float(d[order[1]] / d[i]) if d[i] > 0 else np.inf
    return i, ratio


def sweep(
    sol: Solution,
    xi_grid: Sequence[float],
    threads: int | None = None,
    convention: str = "period",
) -> BlochSweep:
    """Dense eigensolves over ``xi_grid`` plus tracking of the critical curve."""
    xs = sorted(float(x) for x in xi_grid)
    if 0.0 not in xs:
        raise ValueError("xi_grid must contain 0")
    nthreads = _threads(threads)
    if nthreads > 1:
        with ThreadPoolExecutor(nthreads) as pool:
            slices = list(pool.map(lambda x: slice_spectrum(sol, x, convention), xs))
    else:
        slices = [slice_spectrum(sol, x, convention) for x in xs]

    i0 = xs.index(0.0)
    ev0 = slices[i0].eigenvalues
    mods = np.sort(np.abs(ev0))
    tracked: dict[int, int] = {}
    note = ""
    if mods[0] > 1e-3:
        note = "no eigenvalue within 1e-3 of 0 at xi = 0 (no translation mode)"
    else:
        j0 = int(np.argmin(np.abs(ev0)))
        tracked[i0] = j0
        for direction in (1, -1):
            prev = ev0[j0]
            i = i0 + direction
            while 0 <= i < len(xs):
                j, ratio = _nearest(slices[i].eigenvalues, prev)
                if ratio < 2.0:
                    raise TrackingLost(f"ambiguous continuation of the critical curve at xi = {xs[i]:.4g}")
                tracked[i] = j
                prev = slices[i].eigenvalues[j]
                i += direction

    critical = [(xs[i], complex(slices[i].eigenvalues[j])) for i, j in sorted(tracked.items())]
    verdict = _verdict(slices, tracked, i0, note)
    box = apriori_box(sol)
    viol = sum(apriori_violations(box, s.eigenvalues, sol.params.epsilon) for s in slices)
    return BlochSweep(slices, critical, verdict, sol.params, sol.period, box, viol)


def _verdict(slices, tracked, i0, note) -> StabilityVerdict:
    all_re = np.concatenate([s.eigenvalues.real for s in slices])
    max_re = float(all_re.max())
    if i0 not in tracked:
        noncrit = all_re
        return StabilityVerdict(INDETERMINATE, float("nan"), float(-noncrit.max()), False, max_re, note)
    rest = []
    for i, s in enumerate(slices):
        mask = np.ones(s.eigenvalues.size, bool)
        mask[tracked[i]] = False
        rest.append(s.eigenvalues.real[mask])
    gap = float(-np.concatenate(rest).max())
    ev0 = slices[i0].eigenvalues
    mods = np.sort(np.abs(ev0))
    zero_simple = bool(mods[0] < ZERO_TOL and mods[1] > 100 * DEAD_BAND)
    lam = {slices[i].xi: slices[i].eigenvalues[j] for i, j in tracked.items()}
    theta_vals = [-v.real / xi**2 for xi, v in lam.items() if abs(xi) >= XI_EXCLUDE]
    theta = float(min(theta_vals)) if theta_vals else float("nan")
    crit_re = np.array([v.real for xi, v in lam.items() if xi != 0.0])

    if gap < -DEAD_BAND or (crit_re.size and crit_re.max() > DEAD_BAND):
        kind = UNSTABLE
    elif (
        zero_simple
        and gap > DEAD_BAND
        and crit_re.size
        and crit_re.max() < -DEAD_BAND
        and theta > 0
    ):
        kind = STABLE
    else:
        kind = INDETERMINATE
        if not note:
            note = "critical curve or spectral gap within the dead-band"
    return StabilityVerdict(kind, theta, gap, zero_simple, max_re, note)


# --- small eigenvalues of multipulses -------------------------------------


@dataclass(frozen=True)
class SmallEigReport:
    delta0: float
    eigenvalues: np.ndarray
    n_stable: int
    n_unstable: int
    zero_is_simple: bool
    window_change: float = float("nan")

    @property
    def count(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def nonzero(self) -> np.ndarray:
        """The small eigenvalues other than the one closest to zero."""
        ev = self.eigenvalues
        if ev.size == 0:
            return ev
        i = int(np.argmin(np.abs(ev)))
        return np.delete(ev, i)


def _inside(ev: np.ndarray, delta0: float) -> np.ndarray:
    small = ev[np.abs(ev) < delta0]
    return small[np.argsort(np.abs(small))]


def small_eigs(
    sol: Solution,
    delta0: float,
    check_window: bool = True,
    opts: NewtonOpts | None = None,
) -> SmallEigReport:
    """Eigenvalues of the periodic linearization inside the ball of radius delta0.

    With ``check_window`` the solution is padded to twice its period,
    re-converged, and the small eigenvalues must move by less than 10%
    (relative, for those above the dead-band).
    """
    ev = _inside(eigenvalues(jacobian(sol.field, sol.params)), delta0)
    change = float("nan")
    if check_window:
        big = Grid(2 * sol.period, 2 * sol.grid.n)
        wide = newton_solve(regrid(sol.field, big), sol.params, opts or NewtonOpts(restrict_even=sol.is_even))
        ev2 = _inside(eigenvalues(jacobian(wide.field, wide.params)), delta0)
        if ev2.size != ev.size:
            raise WindowTooSmall(f"{ev.size} small eigenvalues on L, {ev2.size} on 2L")
        change = 0.0
        for a in ev:
            b = ev2[np.argmin(np.abs(ev2 - a))]
            if abs(a) > 100 * DEAD_BAND:
                change = max(change, abs(a - b) / abs(a))
            elif abs(b) > 100 * DEAD_BAND:
                change = np.inf
        if change >= 0.1:
            raise WindowTooSmall(f"small eigenvalues moved by {change:.3g} on doubling the window")
    mods = np.abs(ev)
    zero_simple = bool(mods.size >= 1 and mods[0] < ZERO_TOL and (mods.size < 2 or mods[1] > 100 * DEAD_BAND))
    rest = ev[1:] if zero_simple else ev
    n_st = int(np.sum(rest.real < -DEAD_BAND))
    n_un = int(np.sum(rest.real > DEAD_BAND))
    return SmallEigReport(delta0, ev, n_st, n_un, zero_simple, change)


# --- critical curve fit ---------------------------------------------------


@dataclass(frozen=True)
class CurveFit:
    a: float
    b: float
    alpha: float
    beta: float
    rms_relative: float

    def model(self, xi, T) -> np.ndarray:
        return critical_model(self.a, self.b, self.alpha, self.beta, xi, T)

    def sine(self, T) -> np.ndarray:
        return np.sin(2 * self.beta * np.asarray(T) + self.b)


def critical_model(a, b, alpha, beta, xi, T):
    """``a (cos xi - 1) exp(-2 alpha T) sin(2 beta T + b)`` with T the half-period."""
    xi = np.asarray(xi, dtype=float)
    T = np.asarray(T, dtype=float)
    return a * (np.cos(xi) - 1) * np.exp(-2 * alpha * T) * np.sin(2 * beta * T + b)


def fit_critical_curve(
    sweeps: Sequence[BlochSweep],
    eq: Equilibrium,
    refine: bool = True,
) -> CurveFit:
    """Fit the exponentially small critical curve across periods.

    ``T`` in the model is the half-period ``L/2``: the curve scales with the
    interaction across one gap between neighbouring pulses, which has
    length L. The amplitude ``a`` and phase ``b`` are first found by linear
    least squares with (alpha, beta) from the equilibrium; all four are then
    refined together when ``refine`` is set. Residuals are relative to
    ``|a| (1 - cos xi) exp(-2 alpha T)`` at the seeded rates.
    """
    xi, T, lam = [], [], []
    for sw in sweeps:
        for x, v in sw.critical:
            if x != 0.0:
                xi.append(x)
                T.append(sw.period / 2)
                lam.append(v.real)
    xi, T, lam = np.array(xi), np.array(T), np.array(lam)
    periods = np.unique(T)
    if periods.size < 4:
        raise FitIllConditioned("need at least four periods")
    al0, be0 = eq.alpha, eq.beta
    if np.ptp(periods) < math.pi / (2 * be0) * 0.999:
        raise FitIllConditioned("sampled periods span less than half an oscillation")
    w = (np.cos(xi) - 1) * np.exp(-2 * al0 * T)
    M = np.column_stack([w * np.sin(2 * be0 * T), w * np.cos(2 * be0 * T)])
    # scale rows so each period counts alike despite the exponential decay
    scale = np.abs(w)
    c, *_ = np.linalg.lstsq(M / scale[:, None], lam / scale, rcond=None)
    a0 = float(math.hypot(*c))
    b0 = float(math.atan2(c[1], c[0]))
    sines = np.abs(np.sin(2 * be0 * periods + b0))
    if a0 == 0 or np.all(sines < 0.2):
        raise FitIllConditioned("all sampled periods sit near zeros of the sine")
    weight = abs(a0) * np.abs(w)

    def resid(q):
        a, b, al, be = q
        return (critical_model(a, b, al, be, xi, T) - lam) / weight

    if refine:
        sol = least_squares(
            resid,
            [a0, b0, al0, be0],
            x_scale=[abs(a0), 1.0, 0.1 * al0, 0.1 * be0],
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
            max_nfev=2000,
        )
        a, b, al, be = sol.x
    else:
        a, b, al, be = a0, b0, al0, be0
    if a < 0:
        a, b = -a, b + math.pi
    b = (b + math.pi) % (2 * math.pi) - math.pi
    rms = float(np.sqrt(np.mean(resid([a, b, al, be]) ** 2)))
    return CurveFit(float(a), float(b), float(al), float(be), rms)


# --- a-priori box and essential spectrum ----------------------------------


def apriori_box(sol: Solution, eta2: float | None = None) -> AprioriBox:
    rho = sol.field.sup_norm()
    return AprioriBox(rho=rho, eta1=abs(sol.params.zeta) + 4 * rho**2, eta2=eta2)


def apriori_violations(box: AprioriBox, ev: np.ndarray, epsilon: float) -> int:
    """Eigenvalues with ``Re >= -eps/2`` and ``|Re| >= eta1``."""
    ev = np.asarray(ev)
    sel = ev.real >= -epsilon / 2
    return int(np.sum(np.abs(ev.real[sel]) >= box.eta1))


def symbol_matrix(k: float, p: Params, u_inf: Sequence[float]) -> np.ndarray:
    u1, u2 = float(u_inf[0]), float(u_inf[1])
    S = np.array(
        [
            [k * k + p.zeta - 3 * u1 * u1 - u2 * u2, -2 * u1 * u2],
            [-2 * u1 * u2, k * k + p.zeta - u1 * u1 - 3 * u2 * u2],
        ]
    )
    Jm = np.array([[0.0, 1.0], [-1.0, 0.0]])
    return Jm @ S - p.epsilon * np.eye(2)


def symbol_eigenvalues(k_grid: Sequence[float], p: Params, u_inf: Sequence[float]) -> np.ndarray:
    return np.array([np.linalg.eigvals(symbol_matrix(k, p, u_inf)) for k in k_grid])


def essential_line_check(
    p: Params, k_grid: Sequence[float], u_inf: Sequence[float] | None = None
) -> float:
    """Largest ``|Re lambda + eps|`` of the constant-state symbol over ``k_grid``.

    Warns with OutOfRegime when the symmetric part of the symbol loses
    positive determinant somewhere on the grid.
    """
    if u_inf is None:
        u_inf = equilibrium_state(p)
    ev = symbol_eigenvalues(k_grid, p, u_inf)
    dev = float(np.max(np.abs(ev.real + p.epsilon)))
    u1, u2 = float(u_inf[0]), float(u_inf[1])
    k2 = np.asarray(k_grid, dtype=float) ** 2
    det = (k2 + p.zeta - 3 * u1 * u1 - u2 * u2) * (k2 + p.zeta - u1 * u1 - 3 * u2 * u2) - 4 * u1 * u1 * u2 * u2
    if np.any(det <= 0):
        warnings.warn("constant-state symbol has non-positive determinant", OutOfRegime, stacklevel=2)
    return dev


def translation_alignment(sol: Solution) -> float:
    """Angle between the zero-eigenvector at xi = 0 and the derivative of the profile."""
    J = jacobian(sol.field, sol.params)
    w, V = np.linalg.eig(J)
    v = V[:, int(np.argmin(np.abs(w)))]
    g = sol.grid
    d = np.concatenate([derivative_real(sol.field.u1, g, 1), derivative_real(sol.field.u2, g, 1)])
    c = abs(np.vdot(d, v)) / (np.linalg.norm(d) * np.linalg.norm(v))
    return float(math.acos(min(1.0, c)))


def default_xi_grid(count: int) -> list[float]:
    """``count`` equispaced points of [-pi, pi), always containing 0."""
    if count < 2 or count % 2:
        raise ValueError("count must be an even integer >= 2")
    xs = -math.pi + 2 * math.pi * np.arange(count) / count
    xs[count // 2] = 0.0
    return [float(x) for x in xs]
