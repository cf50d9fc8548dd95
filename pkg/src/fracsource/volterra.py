r"""Second-kind Volterra equations with weakly singular kernels.

Solves :math:`r(t) = P(t) + \int_0^t Q(t,\tau) r(\tau)\,d\tau` on a uniform
grid by product integration.  The kernel is given either as its smooth part
``S`` with :math:`Q = (t-\tau)^{q-1} S(t,\tau)`, or directly as a
lower-triangular quadrature matrix ``W`` with
:math:`\sum_j W_{ij} g_j \approx \int_0^{t_i} Q(t_i,\tau) g(\tau)\,d\tau`.
The diagonal is treated implicitly; every step is a scalar division.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DiagonalDegenerate, InvalidArgument, InvalidOrder
from .fracops import SampledFunction, TimeGrid, _power_lag_weights, weight_matrix
from .mlf import mittag_leffler

DIAGONAL_TOL = 1e-10


@dataclass
class VolterraSystem:
    grid: TimeGrid
    free_term: SampledFunction
    q: float
    kernel: Callable | None = None
    weights: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise InvalidOrder(f"singularity order q must lie in (0, 1], got {self.q}")
        if (self.kernel is None) == (self.weights is None):
            raise InvalidArgument("give exactly one of kernel (smooth part) or weights")
        if self.free_term.grid != self.grid:
            raise InvalidArgument("free term lives on a different grid")
        if self.weights is not None and self.weights.shape != (self.grid.Nt + 1,) * 2:
            raise InvalidArgument("weights matrix has the wrong shape")

    def quadrature_matrix(self) -> np.ndarray:
        if self.weights is not None:
            return np.tril(self.weights)
        nt, h = self.grid.Nt, self.grid.dt
        a, b = _power_lag_weights(float(self.q), nt, h)
        t = self.grid.nodes
        S = np.asarray(self.kernel(t[:, None], t[None, :]), dtype=float)
        S = np.broadcast_to(S, (nt + 1, nt + 1))
        with np.errstate(invalid="ignore"):
            return np.tril(weight_matrix(a, b) * S)


def solve_second_kind(sys: VolterraSystem, start: str = "free_term") -> SampledFunction:
    """Collocation solution at the grid nodes.

    ``start="free_term"`` sets ``r(t_0) = P(t_0)``.  ``start="extrapolate"``
    instead closes the first value by cubic extrapolation
    ``r_0 = 3 r_1 - 3 r_2 + r_3``; use it when ``P(t_0)`` is not available
    (e.g. a fractional derivative of data has no value at the origin).
    """
    W = sys.quadrature_matrix()
    P = sys.free_term.values
    n = P.size
    if not np.all(np.isfinite(W)):
        raise InvalidArgument("quadrature matrix has non-finite entries (kernel not finite on the grid)")
    diag = 1.0 - np.diag(W)
    bad = np.abs(diag[1:]) < DIAGONAL_TOL
    if bad.any():
        i = int(np.nonzero(bad)[0][0]) + 1
        raise DiagonalDegenerate(f"1 - w_ii S(t_i, t_i) = {diag[i]:.3e} at step {i}")
    r = np.zeros(n)
    if start == "free_term":
        r[0] = P[0]
        first = 1
    elif start == "extrapolate":
        if n < 5:
            raise InvalidArgument("extrapolated start needs at least 4 steps")
        # rows 1..3 with r_0 eliminated
        ext = np.array([3.0, -3.0, 1.0])
        A = np.eye(3) - W[1:4, 1:4] - np.outer(W[1:4, 0], ext)
        r[1:4] = np.linalg.solve(A, P[1:4])
        r[0] = ext @ r[1:4]
        first = 4
    else:
        raise InvalidArgument(f"unknown start rule {start!r}")
    for i in range(first, n):
        r[i] = (P[i] + W[i, :i] @ r[:i]) / diag[i]
    return SampledFunction(sys.grid, r)


def gronwall_bound(eps: float, M: float, q: float, t) -> float:
    r"""A-priori bound :math:`\varepsilon E_q(M t^q)` for the weakly singular Gronwall inequality."""
    if eps < 0 or M < 0:
        raise InvalidArgument("eps and M must be non-negative")
    t = np.asarray(t, dtype=float)
    out = eps * mittag_leffler(M * t**q, q, 1.0)
    return float(out) if np.ndim(out) == 0 else out
