"""Finite-difference direct solver used as an independent cross-check.

L1 in time, central differences in space.  ``u(0, t) = 0`` is imposed
strongly.  At ``x = 1`` the condition ``a u_xx + d u_x + b u = 0`` has
``u_xx`` replaced through the equation itself,

    a (D^q u(1, .) - r f(1, .)) + d u_x(1, .) + b u(1, .) = 0,

with a one-sided second-order ``u_x``.  Every step solves with the same
matrix, so it is factorized once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .direct import Field, ProblemSpec
from .errors import InvalidArgument, SingularStep
from .fracops import SampledFunction, _starting_weights, l1_coefficients


@dataclass(frozen=True)
class FdGrid:
    Nx: int
    Nt: int

    def __post_init__(self):
        if self.Nx < 8 or self.Nt < 8:
            raise InvalidArgument(f"need Nx >= 8 and Nt >= 8, got {self.Nx}, {self.Nt}")

    @property
    def dx(self) -> float:
        return 1.0 / self.Nx

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.Nx + 1)


def _operators(spec: ProblemSpec, grid: FdGrid) -> tuple[np.ndarray, np.ndarray]:
    """``(w, Lsp)``: row weights of the time-derivative part and the space operator on ``u_1..u_Nx``."""
    n, h = grid.Nx, grid.dx
    c = spec.constants
    L = np.zeros((n, n))
    k = np.arange(n - 1)
    L[k, k] = 2.0 / h**2
    L[k[1:], k[1:] - 1] = -1.0 / h**2
    L[k, k + 1] = -1.0 / h**2
    L[n - 1, n - 1] = 1.5 * c.d / h + c.b
    L[n - 1, n - 2] = -2.0 * c.d / h
    L[n - 1, n - 3] += 0.5 * c.d / h
    w = np.ones(n)
    w[-1] = c.a
    return w, L


def step_matrix(spec: ProblemSpec, grid: FdGrid, scale: float) -> np.ndarray:
    """Matrix acting on ``u_1..u_Nx`` at the new time level (plain L1)."""
    w, L = _operators(spec, grid)
    return scale * np.diag(w) + L


def _factor(A: np.ndarray):
    lu, piv = lu_factor(A)
    d = np.abs(np.diag(lu))
    if not np.all(np.isfinite(d)) or d.min() < 1e-14 * d.max():
        raise SingularStep(f"step matrix is numerically singular (pivot ratio {d.min() / d.max():.2e})")
    return lu, piv


def solve_fd(spec: ProblemSpec, r: SampledFunction, grid: FdGrid | None = None,
             starting: bool = True) -> Field:
    """Field on the FD lattice with time step ``T / grid.Nt`` (``r`` is interpolated).

    With ``starting=True`` (and ``q < 1``) the L1 sum carries one starting
    weight on ``u^2 - 2u^1 + u^0`` that makes it exact for ``t^q``; the first
    two levels are then solved together.  This removes the ``O(dt^q)``
    error that plain L1 makes on solutions behaving like ``c t^q``.
    """
    if grid is None:
        grid = FdGrid(200, spec.Nt)
    q, T = spec.q, spec.T
    nt, n = grid.Nt, grid.Nx
    dt = T / nt
    t = np.arange(nt + 1) * dt
    x = grid.x
    rv = np.interp(t, r.t, r.values)
    scale = 1.0 / (math.gamma(2.0 - q) * dt**q)
    coef = l1_coefficients(q, nt)
    starting = starting and q < 1.0
    omega = _starting_weights(q, nt) / dt**q if starting else np.zeros(nt + 1)

    w, Lsp = _operators(spec, grid)
    A = scale * np.diag(w) + Lsp
    lu = _factor(A)

    U = np.zeros((nt + 1, n + 1))
    U[0] = np.asarray(spec.phi(x), dtype=float) + 0.0 * x
    U[0, 0] = 0.0
    u0 = U[0, 1:]

    def src(i):
        return rv[i] * (np.asarray(spec.f(x[1:], t[i]), dtype=float) + 0.0 * x[1:])

    first = 1
    if starting:
        Wd = np.diag(w)
        o1, o2 = omega[1], omega[2]
        big = np.block([
            [A - 2.0 * o1 * Wd, o1 * Wd],
            [(scale * (coef[1] - 1.0) - 2.0 * o2) * Wd, A + o2 * Wd],
        ])
        rhs = np.concatenate([
            w * (src(1) + (scale - o1) * u0),
            w * (src(2) + (scale * coef[1] - o2) * u0),
        ])
        sol = lu_solve(_factor(big), rhs)
        U[1, 1:], U[2, 1:] = sol[:n], sol[n:]
        first = 3
    diffs = np.zeros((nt, n))  # u^{m+1} - u^m on nodes 1..Nx
    for m in range(1, first):
        diffs[m - 1] = U[m, 1:] - U[m - 1, 1:]
    for i in range(first, nt + 1):
        # all L1 terms except c_0 u^i, plus the starting correction
        hist = -U[i - 1, 1:]
        if i > 1:
            hist = hist + coef[1:i] @ diffs[i - 2::-1][: i - 1]
        hist = scale * hist
        if starting:
            hist = hist + omega[i] * (U[2, 1:] - 2.0 * U[1, 1:] + u0)
        U[i, 1:] = lu_solve(lu, w * (src(i) - hist))
        diffs[i - 1] = U[i, 1:] - U[i - 1, 1:]
    return Field(x, t, U.T.copy(), np.empty((0, nt + 1)), None)


def fd_energy(u: Field) -> np.ndarray:
    """Trapezoidal ``int_0^1 u dx`` of an FD field."""
    return np.trapezoid(u.values, u.x, axis=0)
