r"""Eigenpairs of :math:`X'' + \mu X = 0`, :math:`X(0) = 0`,
:math:`(a\mu - b) X(1) = d X'(1)`, and the biorthogonal system.

With :math:`X(0) = 0` every eigenfunction is, up to scaling, one of
``sin(s x)`` (:math:`\mu = s^2 > 0`), ``sinh(s x)`` (:math:`\mu = -s^2 < 0`)
or ``x`` (:math:`\mu = 0`).  For :math:`ad > 0` the n-th positive
eigenvalue has exactly one root ``s`` in :math:`(n\pi, (n+1)\pi)`; the
lowest eigenvalue is positive, zero or negative according to whether
:math:`-b/d` is below, equal to or above one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import AssumptionViolated, BracketFailure, ExcludedIndex, InvalidArgument

ZERO_EIGENVALUE_TOL = 1e-13
MIN_X1 = 1e-10


class ModeKind(enum.Enum):
    SIN = "sin"
    SINH = "sinh"
    LINEAR = "linear"


@dataclass(frozen=True)
class BoundaryConstants:
    a: float
    b: float
    d: float

    def __post_init__(self):
        if not self.a * self.d > 0:
            raise AssumptionViolated(f"need a*d > 0, got a={self.a}, d={self.d}")

    @property
    def kappa(self) -> float:
        """Ratio a/d (positive)."""
        return self.a / self.d

    @property
    def ratio(self) -> float:
        """The quantity -b/d that decides the sign of the lowest eigenvalue."""
        return -self.b / self.d


@dataclass(frozen=True)
class EigenMode:
    n: int
    mu: float
    s: float
    kind: ModeKind
    norm_sq: float
    x1: float
    int01: float
    denom: float

    @property
    def dx1(self) -> float:
        """X'(1)."""
        if self.kind is ModeKind.SIN:
            return self.s * math.cos(self.s)
        if self.kind is ModeKind.SINH:
            return self.s * math.cosh(self.s)
        return 1.0

    def __call__(self, x):
        return eigenfunction_eval(self, x)


def characteristic(mu: float, c: BoundaryConstants) -> float:
    """Characteristic function whose zeros are the eigenvalues."""
    if mu > 0:
        s = math.sqrt(mu)
        return (c.a * mu - c.b) * math.sin(s) - c.d * s * math.cos(s)
    if mu < 0:
        s = math.sqrt(-mu)
        return (c.a * mu - c.b) * math.sinh(s) - c.d * s * math.cosh(s)
    return -c.b - c.d


def _make_mode(n: int, kind: ModeKind, s: float, c: BoundaryConstants) -> EigenMode:
    if kind is ModeKind.SIN:
        mu = s * s
        norm_sq = 0.5 - math.sin(2 * s) / (4 * s)
        x1 = math.sin(s)
        int01 = (1.0 - math.cos(s)) / s
    elif kind is ModeKind.SINH:
        mu = -s * s
        norm_sq = math.sinh(2 * s) / (4 * s) - 0.5
        x1 = math.sinh(s)
        int01 = (math.cosh(s) - 1.0) / s
    else:
        mu, s = 0.0, 0.0
        norm_sq, x1, int01 = 1.0 / 3.0, 1.0, 0.5
    return EigenMode(n, mu, s, kind, norm_sq, x1, int01, norm_sq + c.kappa * x1 * x1)


def _positive_root(n: int, c: BoundaryConstants) -> float:
    # scaled characteristic g(s) / s avoids the trivial zero at s = 0
    kappa, beta = c.kappa, c.b / c.d

    def g(s):
        return (kappa * s * s - beta) * math.sin(s) / s - math.cos(s)

    lo, hi = n * math.pi, (n + 1) * math.pi
    if n == 0:
        lo = 1e-300
        glo = -(1.0 + beta)
    else:
        glo = g(lo)
    ghi = g(hi)
    if glo == 0.0 and n > 0:
        return lo
    if glo * ghi > 0:
        raise BracketFailure(f"no sign change for branch {n} on ({lo}, {hi})")
    return brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def _hyperbolic_root(c: BoundaryConstants) -> float:
    kappa, beta = c.kappa, c.b / c.d

    def h(s):
        return kappa * s * s + beta + s / math.tanh(s)

    smax = math.sqrt(-(1.0 + beta) / kappa)
    hi = smax * (1.0 + 1e-12) + 1e-12
    lo = min(1e-8, hi / 2)
    if h(lo) >= 0 or h(hi) <= 0:
        raise BracketFailure("hyperbolic branch could not be bracketed")
    return brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)


def compute_eigenmodes(c: BoundaryConstants, count: int) -> list[EigenMode]:
    """Modes 0..count (inclusive), in increasing order of eigenvalue."""
    modes = []
    ratio_gap = 1.0 + c.b / c.d  # positive iff -b/d < 1
    if abs(ratio_gap) < ZERO_EIGENVALUE_TOL:
        modes.append(_make_mode(0, ModeKind.LINEAR, 0.0, c))
    elif ratio_gap < 0:
        modes.append(_make_mode(0, ModeKind.SINH, _hyperbolic_root(c), c))
    else:
        modes.append(_make_mode(0, ModeKind.SIN, _positive_root(0, c), c))
    for n in range(1, count + 1):
        modes.append(_make_mode(n, ModeKind.SIN, _positive_root(n, c), c))
    return modes


def gauss_legendre_panels(panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [0, 1]."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    w = (half[:, None] * wg[None, :]).ravel()
    return x, w


@dataclass
class ModeBasis:
    """Kept modes ``n != n0`` together with the excluded one and quadrature data.

    Array attributes (``mu``, ``s``, ``x1``, ``int01``, ``norm_sq``, ``denom``)
    are indexed like ``modes``.
    """

    modes: list[EigenMode]
    n0: int
    n0_mode: EigenMode
    constants: BoundaryConstants
    quad_order: int = 16
    quad_x: np.ndarray = field(init=False, repr=False)
    quad_w: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if abs(self.n0_mode.x1) < MIN_X1:
            raise AssumptionViolated(
                f"X_{self.n0}(1) = {self.n0_mode.x1:.3e} is too small to build the biorthogonal system"
            )
        smax = max(m.s for m in self.modes + [self.n0_mode])
        panels = max(4, int(math.ceil(smax / math.pi)) + 1)
        self.quad_x, self.quad_w = gauss_legendre_panels(panels, self.quad_order)
        for name in ("mu", "s", "x1", "int01", "norm_sq", "denom"):
            arr = np.array([getattr(m, name) for m in self.modes])
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        self._Xq = self.eval(self.quad_x)
        self._X0q = eigenfunction_eval(self.n0_mode, self.quad_x)

    def __len__(self):
        return len(self.modes)

    @property
    def indices(self) -> np.ndarray:
        return np.array([m.n for m in self.modes])

    @property
    def sup_bound(self) -> float:
        """Uniform bound M >= |X_n(x)| over all modes (including n0) and x in [0, 1]."""
        return max([1.0] + [abs(m.x1) for m in self.modes + [self.n0_mode] if m.kind is not ModeKind.SIN])

    def position(self, n: int) -> int:
        if n == self.n0:
            raise ExcludedIndex(f"index {n} is the excluded mode n0")
        for k, m in enumerate(self.modes):
            if m.n == n:
                return k
        raise IndexError(f"mode {n} not in basis")

    def eval(self, x) -> np.ndarray:
        """Matrix ``X[k, :]`` of kept eigenfunctions at points ``x``."""
        x = np.asarray(x, dtype=float)
        return np.stack([eigenfunction_eval(m, x) for m in self.modes])

    def forward_coeffs(self, values: np.ndarray) -> np.ndarray:
        """``(psi, X_n)`` for all kept modes from samples at ``quad_x``.

        ``values`` has shape ``(nq,)`` or ``(nq, m)`` for several functions."""
        return self._Xq @ (self.quad_w[:, None] * values.reshape(values.shape[0], -1)).reshape(values.shape)

    def n0_coeff(self, values: np.ndarray) -> np.ndarray:
        return self._X0q @ (self.quad_w[:, None] * values.reshape(values.shape[0], -1)).reshape(values.shape)

    def biorthogonal_coeffs(self, values: np.ndarray) -> np.ndarray:
        """``(psi, u_n)`` for all kept modes from samples at ``quad_x``."""
        fwd = self.forward_coeffs(values)
        c0 = self.n0_coeff(values)
        ratio = (self.x1 / self.n0_mode.x1)
        if fwd.ndim == 1:
            return (fwd - ratio * c0) / self.denom
        return (fwd - ratio[:, None] * c0[None, ...]) / self.denom[:, None]

    def biorthogonal_eval(self, x) -> np.ndarray:
        """Matrix of ``u_n(x)`` for all kept modes."""
        x = np.asarray(x, dtype=float)
        X0 = eigenfunction_eval(self.n0_mode, x)
        ratio = self.x1 / self.n0_mode.x1
        return (self.eval(x) - np.multiply.outer(ratio, X0)) / self.denom.reshape((-1,) + (1,) * x.ndim)


def compute_modes(c: BoundaryConstants, count: int, quad_order: int = 16, n0: int = 0) -> ModeBasis:
    """Eigenmodes 0..count with mode ``n0`` set aside."""
    if count < 4:
        raise InvalidArgument(f"need count >= 4, got {count}")
    if not 0 <= n0 <= count:
        raise InvalidArgument(f"n0 must lie in [0, {count}], got {n0}")
    all_modes = compute_eigenmodes(c, count)
    kept = [m for m in all_modes if m.n != n0]
    return ModeBasis(kept, n0, all_modes[n0], c, quad_order)


def eigenfunction_eval(mode: EigenMode, x):
    x = np.asarray(x, dtype=float)
    if mode.kind is ModeKind.SIN:
        out = np.sin(mode.s * x)
    elif mode.kind is ModeKind.SINH:
        out = np.sinh(mode.s * x)
    else:
        out = x.copy()
    return float(out) if out.ndim == 0 else out


def forward_coeff(psi, mode: EigenMode, quad_order: int = 16, panels: int | None = None) -> float:
    """Inner product ``(psi, X_n)`` by composite Gauss-Legendre quadrature."""
    if panels is None:
        panels = max(4, int(math.ceil(mode.s / math.pi)) + 1)
    x, w = gauss_legendre_panels(panels, quad_order)
    return float(np.sum(w * np.asarray(psi(x), dtype=float) * eigenfunction_eval(mode, x)))


def biorthogonal_coeff(psi, basis: ModeBasis, n: int) -> float:
    """Inner product ``(psi, u_n)`` for a kept index ``n``."""
    k = basis.position(n)
    mode = basis.modes[k]
    fx = np.asarray(psi(basis.quad_x), dtype=float)
    w = basis.quad_w
    c_n = np.sum(w * fx * eigenfunction_eval(mode, basis.quad_x))
    c_0 = np.sum(w * fx * eigenfunction_eval(basis.n0_mode, basis.quad_x))
    return float((c_n - mode.x1 / basis.n0_mode.x1 * c_0) / mode.denom)
