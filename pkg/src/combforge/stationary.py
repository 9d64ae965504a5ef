"""Stationary solutions: residual, Jacobian, Newton and continuation.

In real form the stationary problem is

    J(-u'' + zeta u - |u|^2 u) + eps(-u + F) = 0,   J = [[0, 1], [-1, 0]],

with ``F = (f, 0)``. Its derivative is ``J L(u) - eps`` where
``L(u) = -d^2 + zeta - M(u)`` and ``M`` is the symmetric matrix
``[[3u1^2 + u2^2, 2u1u2], [2u1u2, u1^2 + 3u2^2]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve

from .errors import NoConvergence, SingularJacobian
from .grid import Field2, Grid, derivative_real, even_project, regrid, second_derivative_matrix
from .model import Params, bifurcation_angles, soliton_profile


@dataclass(frozen=True)
class Solution:
    field: Field2
    params: Params
    residual_norm: float
    is_even: bool
    pulse_centers: tuple[float, ...]
    source_epsilon: float | None = None

    @property
    def period(self) -> float:
        return self.field.grid.period

    @property
    def grid(self) -> Grid:
        return self.field.grid

NONMONOTONE_WINDOW = 5
NONMONOTONE_GROWTH = 10.0


@dataclass(frozen=True)
class NewtonOpts:
    tol: float = 1e-10
    max_iter: int = 40
    damping: float = 1.0
    restrict_even: bool = True
    max_halvings: int = 6
    rcond_min: float = 1e-15
    step_control: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")
        if self.step_control not in ("auto", "nonmonotone", "monotone"):
            raise ValueError(f"unknown step_control {self.step_control!r}")


def residual(field: Field2, p: Params) -> Field2:
    g = field.grid
    u1, u2 = field.u1, field.u2
    r = u1 * u1 + u2 * u2
    a1 = -derivative_real(u1, g, 2) + p.zeta * u1 - r * u1
    a2 = -derivative_real(u2, g, 2) + p.zeta * u2 - r * u2
    # J(a1, a2) = (a2, -a1)
    return Field2(g, a2 + p.epsilon * (p.f - u1), -a1 - p.epsilon * u2)


def residual_norm(field: Field2, p: Params) -> float:
    r = residual(field, p)
    return float(max(np.max(np.abs(r.u1)), np.max(np.abs(r.u2))))


def linearization(field: Field2, p: Params, d2: np.ndarray) -> np.ndarray:
    """Matrix of ``J(-d2 + zeta - M(u)) - eps`` for a given second-derivative matrix."""
    n = field.grid.n
    u1, u2 = field.u1, field.u2
    m11 = p.zeta - 3 * u1**2 - u2**2
    m12 = -2 * u1 * u2
    m22 = p.zeta - u1**2 - 3 * u2**2
    out = np.zeros((2 * n, 2 * n), dtype=d2.dtype)
    out[:n, n:] = -d2
    out[n:, :n] = d2
    i = np.arange(n)
    out[i, i] = m12 - p.epsilon
    out[i, n + i] += m22
    out[n + i, i] -= m11
    out[n + i, n + i] = -m12 - p.epsilon
    return out


def jacobian(field: Field2, p: Params) -> np.ndarray:
    return linearization(field, p, second_derivative_matrix(field.grid))


def _even_maps(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Column map full -> reduced and the rows kept in the even subspace."""
    m = n // 2 + 1
    j = np.arange(n)
    c = np.minimum(j, n - j)
    cols = np.concatenate([c, m + c])
    rows = np.concatenate([np.arange(m), n + np.arange(m)])
    return cols, rows


def _reduce_even(J: np.ndarray, n: int) -> np.ndarray:
    cols, rows = _even_maps(n)
    m = n // 2 + 1
    Jr = J[rows]
    out = np.zeros((2 * m, 2 * m), dtype=J.dtype)
    np.add.at(out.T, cols, Jr.T)
    return out


_gecon = get_lapack_funcs("gecon", (np.zeros((1, 1)),))


def _rcond(A: np.ndarray, lu) -> float:
    anorm = np.linalg.norm(A, 1)
    rc, info = _gecon(lu[0], anorm, norm="1")
    return float(rc)


def _sup(r: Field2) -> float:
    return float(max(np.max(np.abs(r.u1)), np.max(np.abs(r.u2))))


def _newton_loop(u: Field2, p: Params, opts: NewtonOpts, rule: str) -> Field2:
    g = u.grid
    n = g.n
    r = residual(u, p)
    rn = _sup(r)
    cols, rows = _even_maps(n)
    history = [rn]
    it = 0
    while rn >= opts.tol:
        if it >= opts.max_iter:
            raise NoConvergence(it, rn)
        J = jacobian(u, p)
        if opts.restrict_even:
            Jr = _reduce_even(J, n)
            lu = lu_factor(Jr, check_finite=False)
            if _rcond(Jr, lu) < opts.rcond_min:
                raise SingularJacobian("even-subspace Jacobian is numerically singular")
            step = lu_solve(lu, -r.vector[rows], check_finite=False)[cols]
        else:
            step = np.linalg.lstsq(J, -r.vector, rcond=None)[0]
        if rule == "monotone":
            ref = rn
        else:
            # weakly coupled pulse distances make the residual rise for a
            # step or two before quadratic convergence sets in, so only halve
            # when it grows well past its recent maximum, capped by the start
            ref = NONMONOTONE_GROWTH * min(max(history[-NONMONOTONE_WINDOW:]), history[0])
        t = opts.damping
        for _ in range(opts.max_halvings + 1):
            trial = Field2.from_vector(g, u.vector + t * step)
            if opts.restrict_even:
                trial = even_project(trial)
            rt = residual(trial, p)
            rtn = _sup(rt)
            if math.isfinite(rtn) and rtn < ref:
                break
            t *= 0.5
        u, r, rn = trial, rt, rtn
        history.append(rn)
        it += 1
    return u


def newton_solve(guess: Field2, p: Params, opts: NewtonOpts | None = None) -> Solution:
    """Newton's method on the collocation residual.

    ``opts.step_control`` selects the step rule: ``"nonmonotone"``,
    ``"monotone"`` (halve until the sup residual decreases) or ``"auto"``,
    which tries the first and falls back to the second.
    """
    opts = opts or NewtonOpts()
    u0 = even_project(guess) if opts.restrict_even else guess
    if opts.step_control == "auto":
        try:
            u = _newton_loop(u0, p, opts, "nonmonotone")
        except NoConvergence:
            u = _newton_loop(u0, p, opts, "monotone")
    else:
        u = _newton_loop(u0, p, opts, opts.step_control)
    final = residual_norm(u, p)
    is_even = bool(np.max(np.abs((u - even_project(u)).vector)) < 1e-12)
    return Solution(
        field=u,
        params=p,
        residual_norm=final,
        is_even=is_even,
        pulse_centers=tuple(detect_pulses(u)),
    )


def _same_grid(a: Grid, b: Grid) -> bool:
    return a.period == b.period and a.n == b.n


def continue_in(
    param_path: Sequence[Params],
    guess: Field2,
    opts: NewtonOpts | None = None,
    grids: Sequence[Grid] | None = None,
    secant: bool = True,
) -> list[Solution]:
    """Natural continuation along ``param_path``, one Solution per entry.

    ``grids`` optionally gives a grid per step (for continuation in the
    period); fields are transferred with :func:`regrid`. When two previous
    solutions share the current grid a secant predictor is used.
    """
    opts = opts or NewtonOpts()
    if grids is not None and len(grids) != len(param_path):
        raise ValueError("grids must match param_path in length")
    out: list[Solution] = []
    seed = guess
    for i, p in enumerate(param_path):
        grid = grids[i] if grids is not None else seed.grid
        pred = regrid(seed, grid) if not _same_grid(seed.grid, grid) else seed
        if secant and len(out) >= 2 and all(_same_grid(s.grid, grid) for s in out[-2:]):
            dp_prev = param_path[i - 1].as_vector() - param_path[i - 2].as_vector()
            dp_next = p.as_vector() - param_path[i - 1].as_vector()
            nprev = np.linalg.norm(dp_prev)
            if nprev > 0:
                w = np.linalg.norm(dp_next) / nprev
                v = out[-1].field.vector + w * (out[-1].field.vector - out[-2].field.vector)
                pred = Field2.from_vector(grid, v)
        try:
            sol = newton_solve(pred, p, opts)
        except NoConvergence as exc:
            raise NoConvergence(exc.iterations, exc.residual, index=i) from exc
        out.append(sol)
        seed = sol.field
    return out


def detect_pulses(field: Field2, background: Sequence[float] | None = None) -> list[float]:
    """Centres of local maxima of |u - background| above half the global maximum.

    The background defaults to the componentwise median, which is the
    constant state for well-separated pulses. Maxima are refined by a
    parabola through the three neighbouring samples.
    """
    g = field.grid
    if background is None:
        b1, b2 = float(np.median(field.u1)), float(np.median(field.u2))
    else:
        b1, b2 = float(background[0]), float(background[1])
    a = np.hypot(field.u1 - b1, field.u2 - b2)
    top = a.max()
    if top <= 1e-8 * (1.0 + math.hypot(b1, b2)):
        return []
    left, right = np.roll(a, 1), np.roll(a, -1)
    peaks = np.nonzero((a > left) & (a >= right) & (a >= 0.5 * top))[0]
    x = g.x
    out = []
    for j in peaks:
        ym, y0, yp = a[j - 1], a[j], a[(j + 1) % g.n]
        den = ym - 2 * y0 + yp
        shift = 0.5 * (ym - yp) / den if den != 0 else 0.0
        c = x[j] + shift * g.dx
        out.append(float((c + g.period / 2) % g.period - g.period / 2))
    return sorted(out)


# --- convenience constructors -------------------------------------------


def one_pulse(
    p: Params,
    grid: Grid,
    branch: str = "stable",
    steps: int | None = None,
    opts: NewtonOpts | None = None,
) -> Solution:
    """Even 1-pulse on ``grid`` by continuation in eps from the rotated soliton."""
    ang = bifurcation_angles(p)
    theta = ang.theta_stable if branch == "stable" else ang.theta_unstable
    if branch not in ("stable", "unstable"):
        raise ValueError("branch must be 'stable' or 'unstable'")
    guess = soliton_profile(theta, p.zeta, 0.0, grid)
    if p.epsilon == 0:
        return newton_solve(guess, p, opts)
    if steps is None:
        steps = max(4, int(math.ceil(p.epsilon / (0.025 * p.zeta))))
    path = [p.with_epsilon(e) for e in np.linspace(0, p.epsilon, steps + 1)[1:]]
    return continue_in(path, guess, opts)[-1]


def superpose(sol: Solution, centers: Sequence[float], grid: Grid | None = None) -> Field2:
    """Copies of a 1-pulse shifted to ``centers``, on the pulse's background.

    Shifts are exact Fourier translations, so ``grid`` must have the same
    period as the source when given with a different resolution.
    """
    src = sol.field
    grid = grid or src.grid
    if not _same_grid(src.grid, grid):
        src = regrid(src, grid)
    b = src.complex[0]
    dev = np.fft.fft(src.complex - b)
    k = grid.k
    total = np.full(grid.n, b, dtype=complex)
    for c in centers:
        total += np.fft.ifft(dev * np.exp(-1j * k * c))
    return Field2.from_complex(grid, total)


def multi_pulse(sol: Solution, centers: Sequence[float], opts: NewtonOpts | None = None) -> Solution:
    """Newton from a superposition of the 1-pulse ``sol`` at ``centers``."""
    return newton_solve(superpose(sol, centers), sol.params, opts)


def resample_solution(sol: Solution, grid: Grid, opts: NewtonOpts | None = None) -> Solution:
    """Transfer a solution to another grid and re-converge it there."""
    return newton_solve(regrid(sol.field, grid), sol.params, opts or NewtonOpts(restrict_even=sol.is_even))


def with_field(sol: Solution, field: Field2) -> Solution:
    return replace(sol, field=field, residual_norm=residual_norm(field, sol.params))
