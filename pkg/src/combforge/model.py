"""Parameters, bright solitons, bifurcation angles and the physical scaling.

The stationary problem is the damped, forced focusing NLS

    i u_t = -u_xx + zeta u - |u|^2 u + i eps (-u + f)

whose eps = 0 limit carries the rotated bright solitons
``sqrt(2 zeta) sech(sqrt(zeta) x) exp(i theta)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegenerateBifurcation, NoBifurcation, OverlapWarning, ZeroEpsilon
from .grid import Field2, Grid

if TYPE_CHECKING:
    from .stationary import Solution


@dataclass(frozen=True)
class Params:
    zeta: float
    f: float
    epsilon: float
    d: float | None = None

    def __post_init__(self):
        if not self.zeta > 0:
            raise ValueError(f"zeta must be positive, got {self.zeta}")
        if not self.f > 0:
            raise ValueError(f"f must be positive, got {self.f}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if self.d is not None and not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")

    def with_epsilon(self, epsilon: float) -> "Params":
        return replace(self, epsilon=float(epsilon))

    def as_vector(self) -> np.ndarray:
        return np.array([self.zeta, self.f, self.epsilon])


@dataclass(frozen=True)
class SolitonTemplate:
    theta: float
    centers: tuple[float, ...] = ()
    include_center_pulse: bool = False

    def __post_init__(self):
        c = tuple(float(v) for v in self.centers)
        if any(b < a for a, b in zip(c, c[1:])):
            raise ValueError("centers must be sorted ascending")
        object.__setattr__(self, "centers", c)

    @property
    def is_symmetric(self) -> bool:
        c = np.array(self.centers)
        return bool(np.allclose(c, -c[::-1], atol=1e-12))

    @property
    def all_centers(self) -> tuple[float, ...]:
        if self.include_center_pulse:
            return tuple(sorted(self.centers + (0.0,)))
        return self.centers


@dataclass(frozen=True)
class BifurcationAngles:
    theta_stable: float
    theta_unstable: float


def bifurcation_angles(p: Params) -> BifurcationAngles:
    """Roots of ``pi f cos(theta) = 2 sqrt(2 zeta)`` in (-pi, pi].

    The stable root is the one with ``sin(theta) > 0``.
    """
    lhs = 8 * p.zeta
    rhs = math.pi**2 * p.f**2
    if lhs > rhs:
        raise NoBifurcation(f"8*zeta = {lhs:.6g} exceeds pi^2 f^2 = {rhs:.6g}")
    c = 2 * math.sqrt(2 * p.zeta) / (math.pi * p.f)
    if lhs == rhs or c >= 1.0:
        raise DegenerateBifurcation("8*zeta = pi^2 f^2: the only root is theta = 0 with sin(theta) = 0")
    # acos loses accuracy near c = 1; atan2 with sqrt(1 - c^2) does not
    theta = math.atan2(math.sqrt((1 - c) * (1 + c)), c)
    return BifurcationAngles(theta_stable=theta, theta_unstable=-theta)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _wrap(x: np.ndarray, period: float) -> np.ndarray:
    return (x + period / 2) % period - period / 2


def soliton_profile(theta: float, zeta: float, center: float, grid: Grid) -> Field2:
    """Bright soliton at ``center``; distances are taken to the nearest periodic image."""
    if not zeta > 0:
        raise ValueError(f"zeta must be positive, got {zeta}")
    s = math.sqrt(zeta)
    r = _wrap(grid.x - center, grid.period)
    amp = math.sqrt(2 * zeta) / np.cosh(s * r)
    return Field2(grid, amp * math.cos(theta), amp * math.sin(theta))


def background(p: Params) -> tuple[float, float]:
    """The constant state u_inf; exactly zero at eps = 0."""
    if p.epsilon == 0:
        return (0.0, 0.0)
    from .spatial import equilibrium_state

    return equilibrium_state(p)


def build_guess(tpl: SolitonTemplate, p: Params, grid: Grid) -> Field2:
    """Superposition of rotated solitons on the constant state."""
    centers = tpl.all_centers
    min_sep = 5.0 / math.sqrt(p.zeta)
    if len(centers) > 1:
        c = np.sort(np.array(centers))
        gaps = np.diff(np.append(c, c[0] + grid.period))
        if gaps.min() < min_sep:
            warnings.warn(
                f"pulse separation {gaps.min():.3g} below {min_sep:.3g}", OverlapWarning, stacklevel=2
            )
    b1, b2 = background(p)
    u1 = np.full(grid.n, b1)
    u2 = np.full(grid.n, b2)
    for c in centers:
        s = soliton_profile(tpl.theta, p.zeta, c, grid)
        u1 = u1 + s.u1
        u2 = u2 + s.u2
    return Field2(grid, u1, u2)


@dataclass(frozen=True)
class ScaleFactors:
    """Multipliers taking the normalized form to the form with dispersion d."""

    length: float
    amplitude: float
    time: float
    zeta: float
    forcing: float


def scale_factors(epsilon: float, d: float) -> ScaleFactors:
    # u~(x, t) = eps^{-1/2} u((d eps)^{-1/2} x, t / eps)
    if epsilon == 0:
        raise ZeroEpsilon("the physical scaling is singular at epsilon = 0")
    if not d > 0:
        raise ValueError(f"d must be positive, got {d}")
    return ScaleFactors(
        length=math.sqrt(d * epsilon),
        amplitude=1 / math.sqrt(epsilon),
        time=1 / epsilon,
        zeta=1 / epsilon,
        forcing=1 / math.sqrt(epsilon),
    )


def unit_period_dispersion(epsilon: float, period: float) -> float:
    """Dispersion d for which the rescaled period (d eps)^{1/2} L equals 1."""
    return 1.0 / (epsilon * period**2)


def rescale_to_physical(s: "Solution", d: float) -> "Solution":
    """Map a solution to the form with unit damping and dispersion ``d``.

    The result is a Solution whose params have ``epsilon = 1`` (the
    normalized damping), ``zeta/eps``, ``f/sqrt(eps)`` and ``d``.
    """
    from .stationary import Solution

    p = s.params
    sf = scale_factors(p.epsilon, d)
    g = Grid(s.field.grid.period * sf.length, s.field.grid.n)
    fld = Field2(g, s.field.u1 * sf.amplitude, s.field.u2 * sf.amplitude)
    q = Params(zeta=p.zeta * sf.zeta, f=p.f * sf.forcing, epsilon=1.0, d=d)
    return Solution(
        field=fld,
        params=q,
        residual_norm=s.residual_norm,
        is_even=s.is_even,
        pulse_centers=tuple(c * sf.length for c in s.pulse_centers),
        source_epsilon=p.epsilon,
    )


def rescale_from_physical(s: "Solution", epsilon: float) -> "Solution":
    """Inverse of :func:`rescale_to_physical` for a given small parameter."""
    from .stationary import Solution

    q = s.params
    if q.d is None:
        raise ValueError("physical solution carries no dispersion d")
    sf = scale_factors(epsilon, q.d)
    g = Grid(s.field.grid.period / sf.length, s.field.grid.n)
    fld = Field2(g, s.field.u1 / sf.amplitude, s.field.u2 / sf.amplitude)
    p = Params(zeta=q.zeta / sf.zeta, f=q.f / sf.forcing, epsilon=epsilon)
    return Solution(
        field=fld,
        params=p,
        residual_norm=s.residual_norm,
        is_even=s.is_even,
        pulse_centers=tuple(c / sf.length for c in s.pulse_centers),
    )


def scale_params(p: Params, s: float) -> Params:
    """Parameters of ``s v(s x)`` when ``v`` solves the problem with ``p``.

    Eigenvalues of the linearization scale by ``s**2`` and lengths by ``1/s``.
    """
    return Params(zeta=p.zeta * s**2, f=p.f * s, epsilon=p.epsilon * s**2, d=p.d)


def period_list(base: Sequence[float], s: float) -> list[float]:
    return [b / s for b in base]
