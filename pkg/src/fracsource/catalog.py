"""Closed-form test functions with analytic derivatives.

Space factors are numpy ``Polynomial`` objects or eigenfunction shapes;
both support ``deriv(k)``.  A source ``f(x, t)`` is a sum of separable
terms ``g(t) h(x)``.  Anything without ``deriv`` falls back to a Chebyshev
interpolant when derivatives are needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .errors import ConfigError
from .spectral import EigenMode, ModeKind, forward_coeff

_CHEB_DEGREE = 40


def bump(p: int, m: int, scale: float = 1.0) -> Polynomial:
    """``scale * x**p * (1 - x)**m``."""
    return scale * Polynomial([0, 1]) ** p * Polynomial([1, -1]) ** m


@dataclass(frozen=True)
class ModeShape:
    """``scale * X(x)`` for an eigenfunction, with exact derivatives."""

    mode: EigenMode
    scale: float = 1.0
    order: int = 0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        s, k = self.mode.s, self.order
        if self.mode.kind is ModeKind.LINEAR:
            out = x.copy() if k == 0 else (np.ones_like(x) if k == 1 else np.zeros_like(x))
        elif self.mode.kind is ModeKind.SIN:
            # d^k sin(sx) = s^k sin(sx + k pi/2)
            out = s**k * np.sin(s * x + k * math.pi / 2)
        else:
            out = s**k * (np.sinh(s * x) if k % 2 == 0 else np.cosh(s * x))
        return self.scale * out

    def deriv(self, k: int = 1) -> "ModeShape":
        return ModeShape(self.mode, self.scale, self.order + k)


@dataclass(frozen=True)
class Exponential:
    """``scale * exp(rate * t)``."""

    rate: float = 1.0
    scale: float = 1.0

    def __call__(self, t):
        return self.scale * np.exp(self.rate * np.asarray(t, dtype=float))

    def deriv(self, k: int = 1) -> "Exponential":
        return Exponential(self.rate, self.scale * self.rate**k)


@dataclass
class Tabulated:
    """Piecewise-linear interpolant of samples (values outside are clamped)."""

    t: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.t.ndim != 1 or self.t.shape != self.values.shape or self.t.size < 2:
            raise ConfigError("tabulated data need two equal-length columns with at least 2 rows")
        if np.any(np.diff(self.t) <= 0):
            raise ConfigError("tabulated abscissae must be strictly increasing")

    def __call__(self, t):
        return np.interp(np.asarray(t, dtype=float), self.t, self.values)


@dataclass
class SeparableSource:
    """``f(x, t) = sum_k g_k(t) h_k(x)``."""

    terms: list = field(default_factory=list)  # [(g, h), ...]

    def __call__(self, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        out = np.zeros(np.broadcast_shapes(x.shape, t.shape))
        for g, h in self.terms:
            out = out + np.asarray(g(t)) * np.asarray(h(x))
        return out

    def at_time(self, t: float):
        """Space profile ``f(., t)`` as a differentiable object."""
        parts = [(float(g(t)), h) for g, h in self.terms]
        return _Combination(parts)


@dataclass(frozen=True)
class _Combination:
    parts: tuple | list

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c, h in self.parts:
            out = out + c * np.asarray(h(x))
        return out

    def deriv(self, k: int = 1) -> "_Combination":
        return _Combination([(c, space_derivative(h, k)) for c, h in self.parts])


def space_derivative(fn, k: int):
    """k-th derivative of a function on [0, 1], analytic when available."""
    if k == 0:
        return fn
    if hasattr(fn, "deriv"):
        return fn.deriv(k)
    cheb = Chebyshev.interpolate(lambda x: np.asarray(fn(x), dtype=float) + 0.0 * x, _CHEB_DEGREE, domain=[0, 1])
    return cheb.deriv(k)


def profile(f, t: float):
    """``f(., t)`` as a one-argument function."""
    if hasattr(f, "at_time"):
        return f.at_time(t)
    return lambda x: np.asarray(f(x, t), dtype=float) + 0.0 * np.asarray(x, dtype=float)


def c4_norm(fn, x=None) -> float:
    """``sum_{k<=4} max |fn^(k)|`` on a fine grid of [0, 1]."""
    if x is None:
        x = np.linspace(0.0, 1.0, 401)
    return float(sum(np.abs(np.asarray(space_derivative(fn, k)(x))).max() for k in range(5)))


def orthogonalize(psi: Polynomial, n0_mode: EigenMode, helper: Polynomial | None = None) -> Polynomial:
    """Remove the ``X_n0`` component of ``psi`` using ``helper`` (default ``x^3 (1-x)^5``).

    Both inputs satisfy the endpoint conditions, so the result does too.
    """
    if helper is None:
        helper = bump(3, 5)
    a = forward_coeff(psi, n0_mode, quad_order=32)
    b = forward_coeff(helper, n0_mode, quad_order=32)
    if b == 0.0:
        raise ConfigError("helper polynomial is orthogonal to the excluded mode")
    return psi - (a / b) * helper

