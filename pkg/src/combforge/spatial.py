"""The stationary equation as a reversible first-order system on R^4.

With ``U = (u1, u2, u1', u2')`` the profile equation reads ``U' = F(U)``.
The system is reversible under ``R = diag(1, 1, -1, -1)``; even profiles
are orbits that cross Fix(R) = {U3 = U4 = 0} at ``x = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import svdvals

from .errors import IntegratorBlowup, NoConvergence, NotSaddleFocus
from .model import Params

REVERSER = np.diag([1.0, 1.0, -1.0, -1.0])


class StateVec(NamedTuple):
    U1: float
    U2: float
    U3: float
    U4: float

    @property
    def array(self) -> np.ndarray:
        return np.array(self, dtype=float)


def _rhs(U: np.ndarray, zeta: float, eps: float, f: float) -> np.ndarray:
    u1, u2, v1, v2 = U
    r = u1 * u1 + u2 * u2
    return np.array(
        [
            v1,
            v2,
            zeta * u1 + eps * u2 - r * u1,
            zeta * u2 - eps * u1 - r * u2 + eps * f,
        ]
    )


def vector_field(U: Sequence[float], p: Params) -> StateVec:
    return StateVec(*_rhs(np.asarray(U, dtype=float), p.zeta, p.epsilon, p.f))


def state_jacobian(U: Sequence[float], p: Params) -> np.ndarray:
    u1, u2 = float(U[0]), float(U[1])
    r = u1 * u1 + u2 * u2
    J = np.zeros((4, 4))
    J[0, 2] = J[1, 3] = 1.0
    J[2, 0] = p.zeta - r - 2 * u1 * u1
    J[2, 1] = p.epsilon - 2 * u1 * u2
    J[3, 0] = -p.epsilon - 2 * u1 * u2
    J[3, 1] = p.zeta - r - 2 * u2 * u2
    return J


def origin_determinant(p: Params) -> float:
    """det of dF at U = 0 for eps = 0; equals zeta**2."""
    return float(np.linalg.det(state_jacobian(np.zeros(4), Params(p.zeta, p.f, 0.0))))


@dataclass(frozen=True)
class Equilibrium:
    u_inf: tuple[float, float]
    U_inf: StateVec
    alpha: float
    beta: float
    nu: tuple[complex, complex]
    eigenvalues: np.ndarray


def nu_squared(u_inf: Sequence[float], p: Params) -> tuple[complex, complex]:
    """Closed form ``zeta - 2|u|^2 +- i sqrt(eps^2 - |u|^4)``."""
    r = float(u_inf[0]) ** 2 + float(u_inf[1]) ** 2
    root = np.sqrt(complex(p.epsilon**2 - r * r))
    return (p.zeta - 2 * r + 1j * root, p.zeta - 2 * r - 1j * root)


def _algebraic(u: np.ndarray, zeta: float, eps: float, f: float) -> tuple[np.ndarray, np.ndarray]:
    u1, u2 = u
    r = u1 * u1 + u2 * u2
    g = np.array([zeta * u1 + eps * u2 - r * u1, zeta * u2 - eps * u1 - r * u2 + eps * f])
    dg = np.array(
        [
            [zeta - r - 2 * u1 * u1, eps - 2 * u1 * u2],
            [-eps - 2 * u1 * u2, zeta - r - 2 * u2 * u2],
        ]
    )
    return g, dg


def equilibrium_state(p: Params, tol: float = 1e-13) -> tuple[float, float]:
    """Constant state on the branch through 0 at eps = 0.

    Found by homotopy in eps from the trivial root, so no fixed bound on eps
    is needed; failure along the path raises NoConvergence.
    """
    if p.epsilon == 0:
        return (0.0, 0.0)
    u = np.zeros(2)
    e_done, step = 0.0, p.epsilon
    iters = 0
    while e_done < p.epsilon:
        e_try = min(p.epsilon, e_done + step)
        v = u.copy()
        ok = False
        for _ in range(30):
            g, dg = _algebraic(v, p.zeta, e_try, p.f)
            try:
                dv = np.linalg.solve(dg, -g)
            except np.linalg.LinAlgError:
                break
            v = v + dv
            iters += 1
            if np.max(np.abs(dv)) < tol * (1 + np.max(np.abs(v))):
                ok = np.max(np.abs(_algebraic(v, p.zeta, e_try, p.f)[0])) < 1e-12
                break
        # reject jumps to another branch: u_inf moves continuously with eps
        if ok and np.linalg.norm(v - u) <= 0.5 * math.sqrt(p.zeta):
            u, e_done = v, e_try
            step = min(2 * step, p.epsilon)
        else:
            step /= 4
            if step < 1e-8 * p.epsilon:
                g = _algebraic(u, p.zeta, e_try, p.f)[0]
                raise NoConvergence(iters, float(np.max(np.abs(g))), what="equilibrium homotopy")
    return (float(u[0]), float(u[1]))


def equilibrium(p: Params) -> Equilibrium:
    u = equilibrium_state(p)
    U = StateVec(u[0], u[1], 0.0, 0.0)
    res = np.max(np.abs(_rhs(U.array, p.zeta, p.epsilon, p.f)))
    if res > 1e-12:
        raise NoConvergence(0, float(res), what="equilibrium")
    ev = np.linalg.eigvals(state_jacobian(U, p))
    re, im = np.abs(ev.real), np.abs(ev.imag)
    scale = max(1.0, float(np.max(np.abs(ev))))
    if np.any(re < 1e-10 * scale) or np.any(im < 1e-10 * scale):
        raise NotSaddleFocus(f"eigenvalues {np.round(ev, 12)} are not of the form +-alpha +- i beta")
    alpha, beta = float(re.mean()), float(im.mean())
    if np.ptp(re) > 1e-8 * scale or np.ptp(im) > 1e-8 * scale:
        raise NotSaddleFocus(f"eigenvalues {ev} do not form a reversible quadruple")
    n2 = nu_squared(u, p)
    nu = (complex(np.sqrt(n2[0])), complex(np.sqrt(n2[1])))
    order = np.lexsort((ev.imag, ev.real))
    return Equilibrium(u_inf=u, U_inf=U, alpha=alpha, beta=beta, nu=nu, eigenvalues=ev[order])


# --- symmetric shooting -------------------------------------------------


def _variational_rhs(zeta: float, eps: float, f: float):
    def rhs(_x, y):
        U = y[:4]
        out = np.empty(20)
        out[:4] = _rhs(U, zeta, eps, f)
        u1, u2 = U[0], U[1]
        r = u1 * u1 + u2 * u2
        A = np.array(
            [
                [0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [zeta - r - 2 * u1 * u1, eps - 2 * u1 * u2, 0.0, 0.0],
                [-eps - 2 * u1 * u2, zeta - r - 2 * u2 * u2, 0.0, 0.0],
            ]
        )
        out[4:] = (A @ y[4:].reshape(4, 4)).ravel()
        return out

    return rhs


@dataclass
class ShotOrbit:
    """Symmetric periodic orbit found by multiple shooting on [0, T/2]."""

    state: StateVec
    half_period: float
    nodes: np.ndarray
    segment_length: float
    params: Params
    section_residual: float
    iterations: int
    _dense: list = None

    def sample(self, x: np.ndarray) -> np.ndarray:
        """Complex field ``U1 + i U2`` at arbitrary x, using evenness and periodicity."""
        x = np.asarray(x, dtype=float)
        T = 2 * self.half_period
        y = np.abs((x + T / 2) % T - T / 2)
        idx = np.minimum((y / self.segment_length).astype(int), len(self._dense) - 1)
        out = np.empty(y.shape, dtype=complex)
        for i, sol in enumerate(self._dense):
            m = idx == i
            if np.any(m):
                v = sol(y[m])
                out[m] = v[0] + 1j * v[1]
        return out


def _flow(y0, h, rhs, limit, rtol, dense=False):
    sol = solve_ivp(rhs, (0.0, h), y0, method="DOP853", rtol=rtol, atol=rtol, dense_output=dense)
    if not sol.success:
        raise IntegratorBlowup(sol.message)
    yend = sol.y[:, -1]
    if not np.all(np.isfinite(yend)) or np.max(np.abs(sol.y[:2])) > limit:
        raise IntegratorBlowup(f"orbit left the ball of radius {limit:.3g}")
    return yend, sol


def shoot_symmetric_periodic(
    half_period: float,
    p: Params,
    guess: Sequence[float],
    segments: int | None = None,
    tol: float = 1e-10,
    max_iter: int = 30,
    rtol: float = 1e-12,
) -> ShotOrbit:
    """Symmetric periodic orbit through ``(guess, 0, 0)`` with half-period T/2.

    Solves ``U3 = U4 = 0`` at both ends of [0, T/2] by Newton on a multiple
    shooting system with sensitivities from the variational equation.
    With ``segments=1`` this is a 2x2 Newton on the section map. By default
    segments are about ``4/alpha`` long so each segment's growth factor stays
    near e^4.
    """
    if half_period <= 0:
        raise ValueError("half_period must be positive")
    zeta, eps, f = p.zeta, p.epsilon, p.f
    limit = 10 * math.sqrt(2 * zeta)
    try:
        eq = equilibrium(p)
        rate, u_inf = eq.alpha, np.array(eq.U_inf)
    except (NotSaddleFocus, NoConvergence):
        rate, u_inf = math.sqrt(zeta), np.array([*equilibrium_state(p), 0.0, 0.0]) if eps > 0 else np.zeros(4)
    if segments is None:
        segments = max(1, int(math.ceil(half_period * rate / 4.0)))
    m = segments
    h = half_period / m
    rhs = _variational_rhs(zeta, eps, f)
    rhs4 = lambda _x, y: _rhs(y, zeta, eps, f)

    # seed nodes: integrate from the guess while the orbit approaches the
    # constant state; park the rest of the nodes on that state
    nodes = np.zeros((m, 4))
    nodes[0] = [guess[0], guess[1], 0.0, 0.0]
    parked = False
    prev_dist = np.inf
    for i in range(1, m):
        if not parked:
            try:
                y, _ = _flow(nodes[i - 1], h, rhs4, limit, rtol)
            except IntegratorBlowup:
                parked = True
            else:
                dist = np.linalg.norm(y - u_inf)
                if dist > prev_dist or dist < 1e-8:
                    parked = True
                else:
                    nodes[i] = y
                    prev_dist = dist
                    continue
        nodes[i] = u_inf

    def unknowns_to_nodes(z):
        out = np.empty((m, 4))
        out[0] = [z[0], z[1], 0.0, 0.0]
        out[1:] = z[2:].reshape(m - 1, 4)
        return out

    z = np.concatenate([nodes[0, :2], nodes[1:].ravel()])
    eye = np.eye(4).ravel()
    res_norm = np.inf
    for it in range(max_iter + 1):
        nd = unknowns_to_nodes(z)
        G = np.zeros(4 * (m - 1) + 2)
        DG = np.zeros((G.size, z.size))
        for i in range(m):
            y, _ = _flow(np.concatenate([nd[i], eye]), h, rhs, limit, rtol)
            end, Phi = y[:4], y[4:].reshape(4, 4)
            col = slice(0, 2) if i == 0 else slice(2 + 4 * (i - 1), 2 + 4 * i)
            dPhi = Phi[:, :2] if i == 0 else Phi
            if i < m - 1:
                row = slice(4 * i, 4 * i + 4)
                G[row] = end - nd[i + 1]
                DG[row, col] = dPhi
                DG[row, 2 + 4 * i : 2 + 4 * i + 4] = -np.eye(4)
            else:
                row = slice(4 * i, 4 * i + 2)
                G[row] = end[2:]
                DG[row, col] = dPhi[2:]
        res_norm = float(np.max(np.abs(G)))
        if res_norm < tol:
            break
        if it == max_iter:
            raise NoConvergence(it, res_norm, what="symmetric shooting")
        dz = np.linalg.lstsq(DG, -G, rcond=None)[0]
        z = z + dz

    nd = unknowns_to_nodes(z)
    dense = []
    for i in range(m):
        _, sol = _flow(nd[i], h, rhs4, limit, rtol, dense=True)
        dense.append(lambda s, sol=sol, x0=i * h: sol.sol(s - x0))
    return ShotOrbit(
        state=StateVec(*nd[0]),
        half_period=float(half_period),
        nodes=nd,
        segment_length=h,
        params=p,
        section_residual=res_norm,
        iterations=it,
        _dense=dense,
    )


# --- kernel of the collocation linearization ----------------------------


def numerical_kernel_dimension(sol, rel: float = 1e-6) -> int:
    from .stationary import jacobian

    s = svdvals(jacobian(sol.field, sol.params))
    return int(np.sum(s < rel * s[0]))


def kernel_simplicity(sol, rel: float = 1e-6) -> bool:
    """True iff the full-space Jacobian has exactly one small singular value."""
    return numerical_kernel_dimension(sol, rel) == 1
