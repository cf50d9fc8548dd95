r"""Fractional calculus on uniform time grids.

All convolution quadratures here are product-trapezoidal: the data are
replaced by their piecewise-linear interpolant and the convolution with the
kernel is then carried out exactly.  For a kernel :math:`k(s)` this only
needs the moments

.. math::

    G_0(z) = \int_0^z k(s)\,ds, \qquad G_1(z) = \int_0^z s\,k(s)\,ds

at the grid points, and the resulting weights depend on the lag
:math:`i - j` only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import gamma as gamma_fn

from .errors import InvalidArgument, InvalidOrder


@dataclass(frozen=True)
class TimeGrid:
    T: float
    Nt: int

    def __post_init__(self):
        if self.T <= 0:
            raise InvalidArgument(f"horizon T must be positive, got {self.T}")
        if self.Nt < 2:
            raise InvalidArgument(f"need at least 2 time steps, got {self.Nt}")

    @property
    def dt(self) -> float:
        return self.T / self.Nt

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.Nt + 1) * self.dt


@dataclass
class SampledFunction:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.Nt + 1,):
            raise InvalidArgument(
                f"expected {self.grid.Nt + 1} samples, got shape {self.values.shape}"
            )

    @classmethod
    def from_callable(cls, grid: TimeGrid, fn) -> "SampledFunction":
        return cls(grid, np.broadcast_to(np.asarray(fn(grid.nodes), dtype=float), (grid.Nt + 1,)).copy())

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes


def lag_weights_from_moments(g0: np.ndarray, g1: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Lag coefficients of product-trapezoidal quadrature.

    ``g0[m]``, ``g1[m]`` are the kernel moments at ``s = m * dt``, m = 0..Nt.
    Returns ``(a, b)`` of length Nt+1 such that

        sum_j (a[i-j] + b[i-j] * [j >= 1]) g_j  ~  int_0^{t_i} k(t_i - tau) g(tau) dtau

    ``a[l]`` collects the panel to the left of the node at lag ``l`` (in
    ``s``), ``b[l]`` the panel to its right.
    """
    g0 = np.asarray(g0, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    nt = g0.size - 1
    A = np.diff(g0)  # A[m-1] = int over s in [(m-1)h, mh]
    B = np.diff(g1)
    m = np.arange(1, nt + 1)
    a = np.zeros(nt + 1)
    b = np.zeros(nt + 1)
    a[1:] = (B - (m - 1) * dt * A) / dt
    b[:-1] = (m * dt * A - B) / dt
    return a, b


def weight_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Dense lower-triangular matrix ``W[i, j]`` from lag coefficients."""
    n = a.size
    lag = np.subtract.outer(np.arange(n), np.arange(n))
    W = np.where(lag >= 0, a[np.clip(lag, 0, None)], 0.0)
    W[:, 1:] += np.where(lag[:, 1:] >= 0, b[np.clip(lag[:, 1:], 0, None)], 0.0)
    return W


def apply_lag_weights(a: np.ndarray, b: np.ndarray, g: np.ndarray) -> np.ndarray:
    """All partial convolutions ``sum_j W[i, j] g_j`` for i = 0..Nt."""
    g = np.asarray(g, dtype=float)
    n = g.size
    out = np.convolve(a, g)[:n]
    gb = g.copy()
    gb[0] = 0.0
    out += np.convolve(b, gb)[:n]
    return out


@lru_cache(maxsize=64)
def _power_lag_weights(q: float, nt: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(nt + 1) * dt
    a, b = lag_weights_from_moments(s**q / q, s ** (q + 1.0) / (q + 1.0), dt)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def pi_weights(q: float, i: int, dt: float) -> np.ndarray:
    r"""Weights ``w[0..i]`` with ``sum_j w[j] g(t_j) = \int_0^{t_i} (t_i-\tau)^{q-1} g(\tau) d\tau``
    for ``g`` linear on every panel."""
    if i < 1:
        raise InvalidArgument("step index must be >= 1")
    if q <= 0:
        raise InvalidOrder(f"kernel exponent q must be positive, got {q}")
    a, b = _power_lag_weights(float(q), int(i), float(dt))
    lag = i - np.arange(i + 1)
    w = a[lag].copy()
    w[1:] += b[lag[1:]]
    return w


def frac_integral(g: SampledFunction, gamma: float) -> SampledFunction:
    """Riemann-Liouville integral of order ``gamma`` in (0, 1], product trapezoidal."""
    if not 0.0 < gamma <= 1.0:
        raise InvalidOrder(f"integration order must lie in (0, 1], got {gamma}")
    grid = g.grid
    a, b = _power_lag_weights(float(gamma), grid.Nt, grid.dt)
    vals = apply_lag_weights(a, b, g.values) / gamma_fn(gamma)
    return SampledFunction(grid, vals)


def l1_coefficients(q: float, n: int) -> np.ndarray:
    """``c_k = (k+1)^(1-q) - k^(1-q)``, k = 0..n (``c_0 = 1`` also for q = 1)."""
    k = np.arange(n + 1, dtype=float)
    c = (k + 1.0) ** (1.0 - q) - k ** (1.0 - q)
    c[0] = 1.0
    return c


def rl_deriv_shifted(g: SampledFunction, q: float, starting: bool = False) -> SampledFunction:
    r"""L1 approximation of :math:`D^q_{0+}(g - g(0))` at every grid node.

    The value at ``t_0`` is 0 by convention.  With ``starting=True`` one
    starting weight is added on the second difference
    :math:`g_2 - 2 g_1 + g_0`, chosen per node so that the rule is also
    exact for :math:`t^q`; linear data are unaffected.  This removes the
    first-order error that plain L1 makes on data behaving like
    :math:`c\,t^q` near the origin.
    """
    if not 0.0 < q < 1.0:
        raise InvalidOrder(f"derivative order must lie in (0, 1), got {q}")
    grid = g.grid
    nt, h = grid.Nt, grid.dt
    d = np.diff(g.values)
    c = l1_coefficients(q, nt)
    scale = 1.0 / (math.gamma(2.0 - q) * h**q)
    out = np.zeros(nt + 1)
    out[1:] = scale * np.convolve(c, d)[:nt]
    if starting:
        if nt < 2:
            raise InvalidArgument("starting correction needs at least 2 steps")
        omega = _starting_weights(q, nt)
        second = g.values[2] - 2.0 * g.values[1] + g.values[0]
        out[1:] += omega[1:] * second / h**q
    return SampledFunction(grid, out)


@lru_cache(maxsize=32)
def _starting_weights(q: float, nt: int) -> np.ndarray:
    # scale-free: computed on the unit grid h = 1
    n = np.arange(nt + 1, dtype=float)
    d = np.diff(n**q)
    c = l1_coefficients(q, nt)
    l1 = np.zeros(nt + 1)
    l1[1:] = np.convolve(c, d)[:nt] / math.gamma(2.0 - q)
    omega = (math.gamma(q + 1.0) - l1) / (2.0**q - 2.0)
    omega[0] = 0.0
    omega.setflags(write=False)
    return omega
