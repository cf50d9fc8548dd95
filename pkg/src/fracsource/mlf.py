r"""Two-parameter Mittag-Leffler function on the real axis.

.. math::

    E_{\alpha,\beta}(z) = \sum_{k=0}^\infty \frac{z^k}{\Gamma(\alpha k + \beta)}

Three evaluation branches are used for :math:`0 < \alpha < 1` and
:math:`z \le 0`:

* the power series, where the largest term is small enough for the
  alternating sum to stay accurate in double precision;
* the algebraic asymptotic series
  :math:`-\sum_{k \ge 1} z^{-k} / \Gamma(\beta - \alpha k)`, optimally
  truncated, where its smallest term is below round-off;
* otherwise the Bromwich integral of the Laplace transform
  :math:`s^{\alpha-\beta} / (s^\alpha - z)` on a parabolic contour,
  discretized with the trapezoidal rule.

For :math:`z > 0` (needed only for Gronwall-type bounds) the series is summed
directly; it has no cancellation.  :math:`\alpha = 1` uses closed forms in
terms of the exponential.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, rgamma

from .errors import InvalidArgument, NonConvergent

DEFAULT_TOL = 1e-12
#: largest positive argument accepted
POSITIVE_CAP = 50.0

# alternating series: allowed size of the largest term
_MAX_TERM = 1e2
_MAX_SERIES_TERMS = 4000
_ASYMPTOTIC_TERMS = 80
_CONTOUR_NODES = 36


@dataclass(frozen=True)
class MlfParams:
    q: float
    beta: float = 1.0
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise InvalidArgument(f"order q must lie in (0, 1], got {self.q}")
        if self.beta <= 0.0:
            raise InvalidArgument(f"beta must be positive, got {self.beta}")
        if self.tol <= 0.0:
            raise InvalidArgument(f"tol must be positive, got {self.tol}")


def _series_log_terms(absz: np.ndarray, alpha: float, beta: float, k: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        logz = np.log(absz)[:, None]
        out = k[None, :] * logz - gammaln(alpha * k[None, :] + beta)
    out[:, 0] = -gammaln(beta)
    return out


def _series_length(absz_max: float, alpha: float, beta: float, tol: float) -> int | None:
    """Number of terms after which the series tail is negligible, or None."""
    if absz_max == 0.0:
        return 1
    k = np.arange(_MAX_SERIES_TERMS + 1, dtype=float)
    logt = k * math.log(absz_max) - gammaln(alpha * k + beta)
    small = logt < math.log(tol * 1e-4)
    # terms must also be decreasing from there on
    decreasing = np.diff(logt, append=-np.inf) < 0
    ok = np.nonzero(small & decreasing)[0]
    if ok.size == 0:
        return None
    # first index past the peak that is already negligible
    peak = int(np.argmax(logt))
    ok = ok[ok > peak]
    if ok.size == 0:
        return None
    return int(ok[0]) + 1


def _taylor(z: np.ndarray, alpha: float, beta: float, nterms: int) -> np.ndarray:
    k = np.arange(nterms, dtype=float)
    absz = np.abs(z)
    logt = _series_log_terms(absz, alpha, beta, k)
    sign = np.where(z[:, None] < 0, (-1.0) ** k[None, :], 1.0)
    terms = sign * np.exp(logt)
    terms[absz == 0.0, 1:] = 0.0
    return terms.sum(axis=1)


def _taylor_max_log_term(absz: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    k = np.arange(400, dtype=float)
    return _series_log_terms(np.maximum(absz, 1e-300), alpha, beta, k).max(axis=1)


def _asymptotic(z: np.ndarray, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Optimally truncated algebraic expansion; returns (value, size of first omitted term)."""
    k = np.arange(1, _ASYMPTOTIC_TERMS + 1, dtype=float)
    terms = -(z[:, None] ** (-k[None, :])) * rgamma(beta - alpha * k)[None, :]
    # truncate on a smooth envelope: 1/Gamma vanishes near its poles, and a
    # term that happens to be tiny there says nothing about the tail
    x = beta - alpha * k
    with np.errstate(over="ignore"):
        env = np.where(x > 0.5, np.abs(rgamma(x)), np.exp(gammaln(1.0 - x)) / np.pi)
    mag = np.abs(z[:, None]) ** (-k[None, :]) * env[None, :]
    kmin = np.argmin(mag, axis=1)
    mask = np.arange(k.size)[None, :] < kmin[:, None]
    value = np.where(mask, terms, 0.0).sum(axis=1)
    err = mag[np.arange(z.size), kmin]
    return value, err


def _contour(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    # parabolic contour for the Bromwich integral at t = 1
    n = _CONTOUR_NODES
    th = -np.pi + (np.arange(n) + 0.5) * (2.0 * np.pi / n)
    s = n * (0.1309 - 0.1194 * th**2 + 0.25j * th)
    ds = n * (-0.2388 * th + 0.25j)
    F = s ** (alpha - beta) / (s**alpha - z[:, None])
    return (np.exp(s) * ds * F).sum(axis=1).imag / n


def _exponential_asymptotic(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = z ** (1.0 / alpha)
        main = z ** ((1.0 - beta) / alpha) * np.exp(x) / alpha
    alg, _ = _asymptotic(z, alpha, beta)
    return main + alg


def _alpha_one(z: np.ndarray, beta: float, tol: float) -> np.ndarray:
    out = np.empty_like(z)
    m = int(round(beta))
    if abs(beta - m) < 1e-15 and m >= 1:
        small = np.abs(z) <= 1.0
        if small.any():
            n = _series_length(1.0, 1.0, beta, tol)
            out[small] = _taylor(z[small], 1.0, beta, n)
        big = ~small
        if big.any():
            zb = z[big]
            with np.errstate(over="ignore"):
                acc = np.exp(zb)
            term = np.ones_like(zb)
            for k in range(m - 1):
                acc = acc - term
                term = term * zb / (k + 1)
            with np.errstate(over="ignore", invalid="ignore"):
                out[big] = acc / zb ** (m - 1)
        return out
    n = _series_length(float(np.abs(z).max(initial=0.0)), 1.0, beta, tol)
    if n is None or (np.any(z < 0) and _taylor_max_log_term(np.abs(z), 1.0, beta).max() > math.log(_MAX_TERM)):
        raise NonConvergent(f"E_(1,{beta}) supported only for integer beta or moderate |z|")
    return _taylor(z, 1.0, beta, n)


def _rgamma_lower(beta: float) -> float:
    """A double not above 1/Gamma(beta), used as an upper bound.

    For integer beta the factorial is exact and one division is correctly
    rounded.  Otherwise library values can be an ulp high, so the smaller
    of two estimates is rounded down once more."""
    if beta == int(beta) and beta <= 20:
        return 1.0 / math.factorial(int(beta) - 1)
    est = min(float(rgamma(beta)), 1.0 / math.gamma(beta))
    return float(np.nextafter(est, 0.0))


def mittag_leffler(z, alpha: float, beta: float = 1.0, tol: float = DEFAULT_TOL):
    """Evaluate :math:`E_{\\alpha,\\beta}(z)` for real ``z`` (scalar or array).

    Supported: ``0 < alpha <= 1``, ``beta > 0``, ``z <= POSITIVE_CAP``.
    """
    if not 0.0 < alpha <= 1.0:
        raise InvalidArgument(f"alpha must lie in (0, 1], got {alpha}")
    if beta <= 0.0:
        raise InvalidArgument(f"beta must be positive, got {beta}")
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=float)).ravel()
    shape = np.shape(z)
    if np.any(np.isnan(zz)):
        raise InvalidArgument("argument contains NaN")
    if np.any(zz > POSITIVE_CAP):
        raise NonConvergent(f"positive arguments are capped at {POSITIVE_CAP}")

    if alpha == 1.0:
        out = _alpha_one(zz, beta, tol)
    else:
        out = np.empty_like(zz)
        todo = np.ones(zz.size, dtype=bool)

        pos = zz > 0.0
        if pos.any():
            # beyond z**(1/alpha) = 40 the exponential part swamps the rest
            big = pos & (zz ** (1.0 / alpha) >= 40.0)
            small = pos & ~big
            if small.any():
                n = _series_length(float(zz[small].max()), alpha, beta, tol)
                if n is None:
                    raise NonConvergent(f"series for E_({alpha},{beta}) does not settle")
                out[small] = _taylor(zz[small], alpha, beta, n)
            if big.any():
                out[big] = _exponential_asymptotic(zz[big], alpha, beta)
            todo &= ~pos

        zero = zz == 0.0
        out[zero] = _rgamma_lower(beta)
        todo &= ~zero

        if todo.any():
            idx = np.nonzero(todo)[0]
            logmax = _taylor_max_log_term(np.abs(zz[idx]), alpha, beta)
            use = idx[logmax <= math.log(_MAX_TERM)]
            if use.size:
                n = _series_length(float(np.abs(zz[use]).max()), alpha, beta, tol)
                out[use] = _taylor(zz[use], alpha, beta, n)
                todo[use] = False

        if todo.any():
            idx = np.nonzero(todo)[0]
            val, err = _asymptotic(zz[idx], alpha, beta)
            good = err <= 1e-4 * tol
            out[idx[good]] = val[good]
            todo[idx[good]] = False

        if todo.any():
            idx = np.nonzero(todo)[0]
            out[idx] = _contour(zz[idx], alpha, beta)

    if not np.all(np.isfinite(out) | (zz > 0)):
        raise NonConvergent("Mittag-Leffler evaluation produced a non-finite value")
    if beta >= alpha:
        # completely monotone on z <= 0: the exact range is [0, 1/Gamma(beta)]
        neg = zz <= 0.0
        out[neg] = np.clip(out[neg], 0.0, _rgamma_lower(beta))
    if scalar:
        return float(out[0])
    return out.reshape(shape)


def eval_mlf(params: MlfParams, z):
    return mittag_leffler(z, params.q, params.beta, params.tol)


def _check_order(q: float) -> None:
    if not 0.0 < q <= 1.0:
        raise InvalidArgument(f"order q must lie in (0, 1], got {q}")


def eval_eq(t, lam, q: float):
    """Relaxation kernel :math:`e_q(t, \\lambda) = E_q(-\\lambda t^q)`."""
    _check_order(q)
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(t < 0) or np.any(lam < 0):
        raise InvalidArgument("eval_eq requires t >= 0 and lambda >= 0")
    out = mittag_leffler(-lam * t**q, q, 1.0)
    return float(out) if np.ndim(out) == 0 else out


def eval_eqq(t, lam, q: float):
    """Impulse-response kernel :math:`t^{q-1} E_{q,q}(-\\lambda t^q)`, ``t > 0``."""
    _check_order(q)
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if np.any(t <= 0):
        raise InvalidArgument("eval_eqq requires t > 0")
    if np.any(lam < 0):
        raise InvalidArgument("eval_eqq requires lambda >= 0")
    out = t ** (q - 1.0) * mittag_leffler(-lam * t**q, q, q)
    return float(out) if np.ndim(out) == 0 else out


def convolution_identity_check(q: float, gamma: float, t0: float, t: float) -> float:
    r"""Closed form of :math:`\int_{t_0}^t (t-\tau)^{q-1} E_{q,q}(-\gamma (t-\tau)^q)\,d\tau`."""
    _check_order(q)
    if gamma <= 0:
        raise InvalidArgument("gamma must be positive")
    if t <= t0 or t0 < 0:
        raise InvalidArgument("need 0 <= t0 < t")
    return (1.0 - mittag_leffler(-gamma * (t - t0) ** q, q, 1.0)) / gamma


def kernel_moments(z, lam: float, q: float) -> tuple[np.ndarray, np.ndarray]:
    r"""Zeroth and first moments of :math:`k(s) = s^{q-1} E_{q,q}(-\lambda s^q)`.

    Returns ``(G0, G1)`` with :math:`G_0(z) = \int_0^z k(s)\,ds` and
    :math:`G_1(z) = \int_0^z s\,k(s)\,ds`, evaluated through
    :math:`E_{q,q+1}` and :math:`E_{q,q+2}`.  Valid for any real ``lam``
    (negative values give growing kernels).
    """
    z = np.asarray(z, dtype=float)
    arg = -lam * z**q
    e1 = mittag_leffler(arg, q, q + 1.0)
    e2 = mittag_leffler(arg, q, q + 2.0)
    g0 = z**q * e1
    g1 = z ** (q + 1.0) * (e1 - e2)
    return g0, g1
