"""Periodic collocation grid, Fourier differentiation and comb extraction.

Points are ``x_j = -L/2 + j L/n`` so the grid is symmetric about 0 and the
mirror image of point ``j`` is point ``(-j) mod n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import UnsupportedOrder


@dataclass(frozen=True)
class Grid:
    period: float
    n: int

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")
        if int(self.n) != self.n or self.n < 16 or self.n % 2:
            raise ValueError(f"n must be an even integer >= 16, got {self.n}")
        object.__setattr__(self, "period", float(self.period))
        object.__setattr__(self, "n", int(self.n))

    @property
    def dx(self) -> float:
        return self.period / self.n

    @property
    def x(self) -> np.ndarray:
        return -self.period / 2 + np.arange(self.n) * self.dx

    @property
    def k(self) -> np.ndarray:
        """Angular wavenumbers in FFT order."""
        return 2 * np.pi * np.fft.fftfreq(self.n, self.dx)

    @property
    def mirror(self) -> np.ndarray:
        return (-np.arange(self.n)) % self.n

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(self.period, self.n * factor)


@dataclass(frozen=True, eq=False)
class Field2:
    """Real and imaginary parts of a complex field sampled on a grid."""

    grid: Grid
    u1: np.ndarray
    u2: np.ndarray = field(default=None)

    def __post_init__(self):
        u1 = np.array(self.u1, dtype=float)
        u2 = np.zeros_like(u1) if self.u2 is None else np.array(self.u2, dtype=float)
        if u1.shape != (self.grid.n,) or u2.shape != (self.grid.n,):
            raise ValueError("component lengths must equal grid.n")
        u1.flags.writeable = False
        u2.flags.writeable = False
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @classmethod
    def from_complex(cls, grid: Grid, u: np.ndarray) -> "Field2":
        u = np.asarray(u)
        return cls(grid, u.real, u.imag)

    @classmethod
    def from_vector(cls, grid: Grid, v: np.ndarray) -> "Field2":
        return cls(grid, v[: grid.n], v[grid.n :])

    @classmethod
    def constant(cls, grid: Grid, c1: float, c2: float = 0.0) -> "Field2":
        return cls(grid, np.full(grid.n, float(c1)), np.full(grid.n, float(c2)))

    @property
    def complex(self) -> np.ndarray:
        return self.u1 + 1j * self.u2

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.u1, self.u2])

    @property
    def modulus(self) -> np.ndarray:
        return np.hypot(self.u1, self.u2)

    def sup_norm(self) -> float:
        return float(self.modulus.max())

    def __add__(self, other: "Field2") -> "Field2":
        return Field2(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "Field2") -> "Field2":
        return Field2(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def scaled(self, s: float) -> "Field2":
        return Field2(self.grid, s * self.u1, s * self.u2)


@dataclass(frozen=True)
class Comb:
    wavenumbers: np.ndarray
    log_magnitude: np.ndarray


def _multiplier(grid: Grid, order: int) -> np.ndarray:
    ik = 1j * grid.k
    if order == 1:
        ik = ik.copy()
        ik[grid.n // 2] = 0.0
        return ik
    if order == 2:
        return ik**2
    raise UnsupportedOrder(f"derivative order must be 1 or 2, got {order}")


def derivative(field: Field2, order: int) -> Field2:
    m = _multiplier(field.grid, order)
    d = np.fft.ifft(m * np.fft.fft(field.complex))
    return Field2.from_complex(field.grid, d)


def derivative_real(values: np.ndarray, grid: Grid, order: int) -> np.ndarray:
    m = _multiplier(grid, order)
    return np.real(np.fft.ifft(m * np.fft.fft(values)))


@lru_cache(maxsize=16)
def _second_derivative_matrix(period: float, n: int, shift: float) -> np.ndarray:
    grid = Grid(period, n)
    s = (grid.k + shift) ** 2
    # keep the Nyquist row symmetric in +-shift so the Bloch family stays
    # conjugation-symmetric: sigma(xi) = conj(sigma(-xi))
    s[n // 2] = grid.k[n // 2] ** 2 + shift**2
    mat = np.fft.ifft(-s[:, None] * np.fft.fft(np.eye(n), axis=0), axis=0)
    if shift == 0.0:
        mat = np.ascontiguousarray(mat.real)
    mat.flags.writeable = False
    return mat


def second_derivative_matrix(grid: Grid, shift: float = 0.0) -> np.ndarray:
    """Dense matrix of ``(d/dx + i*shift)^2`` acting on grid values.

    Real for ``shift == 0``. The cached array is read-only.
    """
    return _second_derivative_matrix(grid.period, grid.n, float(shift))


def even_project(field: Field2) -> Field2:
    m = field.grid.mirror
    return Field2(field.grid, 0.5 * (field.u1 + field.u1[m]), 0.5 * (field.u2 + field.u2[m]))


def fourier_transform(field: Field2) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature approximation of the continuous transform of ``u1 + i u2``.

    Returns wavenumbers in ascending order and the coefficients
    ``sum_j u(x_j) exp(-i k x_j) L/n``.
    """
    g = field.grid
    k = g.k
    coef = np.fft.fft(field.complex) * g.dx * np.exp(1j * k * g.period / 2)
    order = np.argsort(k, kind="stable")
    return k[order], coef[order]


def comb(field: Field2, floor: float = 1e-16) -> Comb:
    k, coef = fourier_transform(field)
    mag = np.abs(coef)
    top = mag.max()
    if top == 0.0:
        mag = np.full_like(mag, np.finfo(float).tiny)
    else:
        mag = np.maximum(mag, floor * top)
    return Comb(k, np.log(mag))


def regrid(field: Field2, grid: Grid) -> Field2:
    """Transfer a field to another grid.

    Same period: exact trigonometric interpolation. Different period: the
    field is sampled at the new points that fall inside the old window and
    padded with its value at the window edge, which suits pulses centred in
    the window on a flat background. Shrinking crops the window.
    """
    old = field.grid
    if grid.period == old.period:
        if grid.n == old.n:
            return field
        return Field2.from_complex(grid, _trig_eval(field, grid.x))
    x = grid.x
    inside = np.abs(x) < old.period / 2
    vals = np.empty(grid.n, dtype=complex)
    vals[inside] = _trig_eval(field, x[inside])
    vals[~inside] = field.complex[0]
    return Field2.from_complex(grid, vals)


def _trig_eval(field: Field2, x: np.ndarray) -> np.ndarray:
    g = field.grid
    c = np.fft.fft(field.complex) / g.n
    k = g.k.copy()
    nyq = g.n // 2
    # split the Nyquist coefficient symmetrically so real data stay real
    c_nyq = c[nyq]
    c[nyq] = 0.0
    phase = np.exp(1j * np.outer(x + g.period / 2, k))
    out = phase @ c
    out += c_nyq * np.cos(k[nyq] * (x + g.period / 2))
    return out


def evaluate(field: Field2, x: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of the field at arbitrary points (complex)."""
    return _trig_eval(field, np.asarray(x, dtype=float))
