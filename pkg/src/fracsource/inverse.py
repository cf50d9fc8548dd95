r"""Recovery of the time factor ``r(t)`` of the source from energy data.

Fractional differentiation of the energy relation gives the second-kind
equation

.. math::

    r(t)\,\sigma(t) = D^q(E - E(0)) - D^q(F - F(0))
        + \int_0^t (t-\tau)^{q-1} \sum_n \mu_n E_{q,q}(-\mu_n (t-\tau)^q)
          f_n(\tau) \Big(\int_0^1 X_n\Big) r(\tau)\,d\tau ,

with :math:`\sigma(t) = \sum_n f_n(t) \int_0^1 X_n` (the truncated series for
:math:`\int_0^1 f(x,t)\,dx`) and ``F`` the energy of the source-free field.

Two discretizations are offered.

``"consistent"`` (default)
    The energy relation is first discretized as
    :math:`E - F = \int_0^1 \varphi\text{-part} + K_h r` with the same exact
    kernel product integration the direct solver uses, and the L1 operator
    is then applied to both sides.  Data generated by the direct solver are
    reproduced to round-off, and the scheme stays accurate when many modes
    with :math:`\mu_n \Delta t^q \gg 1` are kept.

``"pointwise"``
    The second-kind equation discretized term by term: L1 on ``E``, the
    analytic series for :math:`D^q(F - F(0))`, and the integral term by
    product integration with each mode's kernel integrated exactly.  The
    equation nearly cancels (``P`` is a small remainder of ``r``), so the
    L1 error on the sub-grid content of ``E`` is strongly amplified; kept
    for comparison.

In both cases the value at ``t_0`` is closed by cubic extrapolation.
"""

from __future__ import annotations

import math
import time as _time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import savgol_filter
from scipy.special import rgamma

from . import catalog
from .direct import (
    Field,
    ModeCoefficients,
    ProblemSpec,
    energy,
    homogeneous_energy,
    mode_coefficients,
    mode_lag_weights,
    relaxation,
    solve_direct,
)
from .errors import DataIncompatible, DenominatorTooSmall, InvalidArgument, NonConvergent
from .fracops import SampledFunction, l1_coefficients, weight_matrix
from .mlf import mittag_leffler
from .spectral import ModeBasis, eigenfunction_eval
from .volterra import VolterraSystem, solve_second_kind

COMPAT_TOL = 1e-6
DENOM_MIN = 1e-8
ENDPOINT_TOL = 1e-6
METHODS = ("consistent", "pointwise")


@dataclass
class InverseInput:
    spec: ProblemSpec
    E: SampledFunction
    smoothing: int | None = None  # moving least-squares window (odd, >= 5), None = off
    compat_tol: float = COMPAT_TOL
    denom_min: float = DENOM_MIN

    def __post_init__(self):
        if self.E.grid != self.spec.grid:
            raise InvalidArgument("energy samples must live on the problem's time grid")
        if self.smoothing is not None and (self.smoothing < 5 or self.smoothing % 2 == 0):
            raise InvalidArgument("smoothing window must be an odd integer >= 5")

    def energy_values(self) -> np.ndarray:
        E = self.E.values
        if self.smoothing is None:
            return E.copy()
        # Local quadratic least-squares fit over a sliding window, done in the
        # variable s = t^q where the leading c t^q behaviour is linear (a fit in
        # t biases the first samples, and the Volterra memory keeps that error).
        # E(0) is fixed by compatibility with phi and is not smoothed.
        t = self.spec.grid.nodes
        s = t**self.spec.q
        su = np.linspace(0.0, s[-1], s.size)
        Es = savgol_filter(np.interp(su, s, E), self.smoothing, 2, mode="interp")
        out = CubicSpline(su, Es)(s)
        out[0] = E[0]
        return out


@dataclass
class InverseSolution:
    r: SampledFunction
    u: Field
    residual: float
    diagnostics: dict = field(default_factory=dict)


def l1_matrix(q: float, nt: int, dt: float) -> np.ndarray:
    """Dense L1 matrix ``L`` with ``(L g)_i = D^q (g - g_0)(t_i)``; row 0 is zero.

    ``q = 1`` gives the backward difference."""
    if not 0.0 < q <= 1.0:
        raise InvalidArgument(f"q must lie in (0, 1], got {q}")
    c = l1_coefficients(q, nt)
    scale = rgamma(2.0 - q) / dt**q
    i = np.arange(nt + 1)
    lag = np.subtract.outer(i, i)
    # coefficient of g_j in row i: c[i-j] - c[i-j-1], with c[-1] := 0 and column 0 getting -c[i-1]
    cpad = np.concatenate([[0.0], c])
    L = np.where(lag >= 0, cpad[np.clip(lag, -1, nt) + 1] - cpad[np.clip(lag, 0, nt)], 0.0)
    L[:, 0] = -cpad[i]
    L[0, :] = 0.0
    return scale * L


def energy_denominator(coeffs: ModeCoefficients, basis: ModeBasis) -> np.ndarray:
    """Truncated series ``sum_n f_n(t) int X_n`` (tends to ``int f dx``)."""
    return basis.int01 @ coeffs.f_n


def _check_inputs(inp: InverseInput, basis: ModeBasis, coeffs: ModeCoefficients) -> np.ndarray:
    E0 = float(inp.E.values[0])
    phi_int = inp.spec.phi_integral()
    if abs(E0 - phi_int) > inp.compat_tol:
        raise DataIncompatible(f"E(0) = {E0:.6g} but the integral of phi is {phi_int:.6g}")
    sigma = energy_denominator(coeffs, basis)
    exact = inp.spec.f_integral()
    low = float(min(np.abs(sigma).min(), np.abs(exact).min()))
    if low < inp.denom_min:
        raise DenominatorTooSmall(f"min |int f dx| = {low:.3e} below {inp.denom_min:.1e}")
    return sigma


def homogeneous_derivative(spec: ProblemSpec, basis: ModeBasis, coeffs: ModeCoefficients) -> np.ndarray:
    """Analytic ``D^q(F - F(0)) = -sum phi_n mu_n E_q(-mu_n t^q) int X_n``."""
    t = spec.grid.nodes
    out = np.zeros_like(t)
    for k, mode in enumerate(basis.modes):
        if coeffs.phi_n[k] != 0.0 and mode.mu != 0.0:
            out -= coeffs.phi_n[k] * mode.mu * mode.int01 * relaxation(mode.mu, spec.q, t)
    return out


def assemble_free_term(inp: InverseInput, basis: ModeBasis, coeffs: ModeCoefficients | None = None,
                       method: str = "consistent") -> SampledFunction:
    """Free term ``P(t_i)``; the entry at ``t_0`` is a cubic extrapolation."""
    spec = inp.spec
    if coeffs is None:
        coeffs = mode_coefficients(spec, basis)
    sigma = _check_inputs(inp, basis, coeffs)
    grid = spec.grid
    E = inp.energy_values()
    L = l1_matrix(spec.q, grid.Nt, grid.dt)
    if method == "consistent":
        F = homogeneous_energy(spec, basis, coeffs)
        num = L @ ((E - E[0]) - (F - F[0]))
    elif method == "pointwise":
        num = L @ (E - E[0]) - homogeneous_derivative(spec, basis, coeffs)
    else:
        raise InvalidArgument(f"unknown method {method!r}; choose from {METHODS}")
    P = num / sigma
    P[0] = 3.0 * P[1] - 3.0 * P[2] + P[3]
    return SampledFunction(grid, P)


@dataclass
class SmoothKernel:
    r"""Smooth part ``S(t, tau)`` of the kernel, ``Q = (t - tau)^{q-1} S``.

    Calling it evaluates ``S`` at arbitrary points (mode coefficients of
    ``f(., tau)`` are recomputed by quadrature); ``table`` gives the values
    on the time grid, and ``bound`` is the reported constant ``C`` with
    ``|Q(t, tau)| <= C (t - tau)^{q-1}``.
    """

    spec: ProblemSpec
    basis: ModeBasis
    coeffs: ModeCoefficients = field(repr=False)
    table: np.ndarray = field(init=False, repr=False)
    bound: float = field(init=False)

    def __post_init__(self):
        q, grid = self.spec.q, self.spec.grid
        lags = grid.nodes
        sigma = energy_denominator(self.coeffs, self.basis)
        nt = grid.Nt
        lag = np.subtract.outer(np.arange(nt + 1), np.arange(nt + 1))
        low = lag >= 0
        S = np.zeros((nt + 1, nt + 1))
        for k, mode in enumerate(self.basis.modes):
            if mode.mu == 0.0:
                continue
            e = mittag_leffler(-mode.mu * lags**q, q, q)
            w = mode.mu * mode.int01 * self.coeffs.f_n[k]
            S += np.where(low, e[np.clip(lag, 0, None)], 0.0) * w[None, :]
        S /= sigma[:, None]
        self.table = S
        self.bound = float(np.abs(S).max())

    def diagonal(self) -> np.ndarray:
        """``S(t_i, t_i) = sum mu_n f_n(t_i) int X_n / (Gamma(q) sigma(t_i))``."""
        return np.diag(self.table).copy()

    def __call__(self, t, tau):
        q = self.spec.q
        t = np.atleast_1d(np.asarray(t, dtype=float))
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        t, tau = np.broadcast_arrays(t, tau)
        if np.any(tau > t) or np.any(tau < 0):
            raise InvalidArgument("kernel needs 0 <= tau <= t")
        xq = self.basis.quad_x
        out = np.empty(t.shape)
        for idx in np.ndindex(t.shape):
            ti, si = float(t[idx]), float(tau[idx])
            f_tau = self.basis.biorthogonal_coeffs(np.asarray(self.spec.f(xq, si), dtype=float) + 0.0 * xq)
            f_t = self.basis.biorthogonal_coeffs(np.asarray(self.spec.f(xq, ti), dtype=float) + 0.0 * xq)
            e = mittag_leffler(-self.basis.mu * (ti - si) ** q, q, q)
            out[idx] = np.sum(self.basis.mu * e * f_tau * self.basis.int01) / np.sum(f_t * self.basis.int01)
        return out if out.size > 1 else float(out.ravel()[0])


def assemble_kernel(inp: InverseInput, basis: ModeBasis, coeffs: ModeCoefficients | None = None) -> SmoothKernel:
    if coeffs is None:
        coeffs = mode_coefficients(inp.spec, basis)
    _check_inputs(inp, basis, coeffs)
    return SmoothKernel(inp.spec, basis, coeffs)


def _mode_weight_sum(spec: ProblemSpec, basis: ModeBasis, coeffs: ModeCoefficients, scale) -> np.ndarray:
    # sum_n scale_n W^n[i, j] f_n(t_j) with the exact-kernel product weights W^n
    grid = spec.grid
    nt = grid.Nt
    K = np.zeros((nt + 1, nt + 1))
    for k, mode in enumerate(basis.modes):
        if scale[k] == 0.0:
            continue
        a, b = mode_lag_weights(float(mode.mu), float(spec.q), nt, grid.dt)
        K += scale[k] * weight_matrix(a, b) * coeffs.f_n[k][None, :]
    return K


def _kernel_weights(spec: ProblemSpec, basis: ModeBasis, coeffs: ModeCoefficients,
                    sigma: np.ndarray) -> np.ndarray:
    """Quadrature matrix of ``int Q r`` with every mode's kernel integrated exactly."""
    return _mode_weight_sum(spec, basis, coeffs, basis.mu * basis.int01) / sigma[:, None]


def _consistent_weights(spec: ProblemSpec, basis: ModeBasis, coeffs: ModeCoefficients,
                        sigma: np.ndarray) -> np.ndarray:
    """Quadrature matrix ``W = I - L K_h / sigma`` of the consistent scheme."""
    grid = spec.grid
    nt = grid.Nt
    K = _mode_weight_sum(spec, basis, coeffs, basis.int01)
    A = l1_matrix(spec.q, nt, grid.dt) @ K / sigma[:, None]
    return np.eye(nt + 1) - A


def solve_inverse(inp: InverseInput, basis: ModeBasis, method: str = "consistent",
                  x=None) -> InverseSolution:
    t0 = _time.perf_counter()
    spec = inp.spec
    coeffs = mode_coefficients(spec, basis)
    P = assemble_free_term(inp, basis, coeffs, method)
    kernel = SmoothKernel(spec, basis, coeffs)
    sigma = energy_denominator(coeffs, basis)
    if method == "consistent":
        W = _consistent_weights(spec, basis, coeffs, sigma)
    else:
        W = _kernel_weights(spec, basis, coeffs, sigma)
    system = VolterraSystem(spec.grid, P, spec.q, weights=W)
    r = solve_second_kind(system, start="extrapolate")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        u = solve_direct(spec, basis, r, x=x, coeffs=coeffs)
    for w in caught:
        warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    E_fit = energy(u)
    residual = float(np.abs(E_fit - inp.E.values).max())
    diagnostics = {
        "method": method,
        "residual": residual,
        "kernel_bound_C": kernel.bound,
        "tail_indicator": u.tail_indicator,
        "warnings": [str(w.message) for w in caught],
    }
    diagnostics["constants"] = stability_constants(inp, basis, coeffs, r)
    diagnostics["runtime_ms"] = (_time.perf_counter() - t0) * 1e3
    return InverseSolution(r, u, residual, diagnostics)


# ---------------------------------------------------------------- assumptions


@dataclass
class Check:
    name: str
    value: float
    tol: float
    passed: bool

    @property
    def status(self) -> str:
        return "pass" if self.passed else "warn"

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "tol": self.tol, "status": self.status}


@dataclass
class AssumptionReport:
    checks: list[Check] = field(default_factory=list)

    def add(self, name: str, value: float, tol: float, larger_is_ok: bool = False) -> None:
        value = float(value)
        ok = value >= tol if larger_is_ok else abs(value) <= tol
        self.checks.append(Check(name, value, tol, bool(ok)))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_list(self) -> list[dict]:
        return [c.to_dict() for c in self.checks]


def _endpoint_checks(report: AssumptionReport, label: str, psi, tol: float) -> None:
    conditions = [("(0)", 0.0, 0), ("''(0)", 0.0, 2), ("(1)", 1.0, 0), ("'(1)", 1.0, 1),
                  ("''(1)", 1.0, 2), ("'''(1)", 1.0, 3)]
    for suffix, x0, k in conditions:
        val = float(np.asarray(catalog.space_derivative(psi, k)(np.array([x0])))[0])
        report.add(f"{label}{suffix}", val, tol)


def validate_assumptions(inp: InverseInput, basis: ModeBasis, n_times: int = 5,
                         tol: float = ENDPOINT_TOL) -> AssumptionReport:
    """Numerical surrogates of the smoothness and compatibility hypotheses.

    Never raises for violated hypotheses; every entry carries pass/warn."""
    spec = inp.spec
    report = AssumptionReport()
    _endpoint_checks(report, "phi", spec.phi, tol)
    x0, w0 = basis.quad_x, basis.quad_w
    X0 = eigenfunction_eval(basis.n0_mode, x0)
    phi_q = np.asarray(spec.phi(x0), dtype=float) + 0.0 * x0
    report.add("(phi, X_n0)", float(w0 @ (phi_q * X0)), tol)
    times = np.linspace(0.0, spec.T, n_times)
    for t in times:
        prof = catalog.profile(spec.f, float(t))
        _endpoint_checks(report, f"f(.,{t:g})", prof, tol)
    fq = np.asarray(spec.f(x0[:, None], times[None, :]), dtype=float) + 0.0 * x0[:, None]
    report.add("max_t |(f(.,t), X_n0)|", float(np.abs((w0 * X0) @ fq).max()), tol)
    report.add("min_t |int f dx|", float(np.abs(spec.f_integral()).min()), inp.denom_min, larger_is_ok=True)
    report.add("E(0) - int phi dx", float(inp.E.values[0] - spec.phi_integral()), inp.compat_tol)
    return report


# ------------------------------------------------------------------ constants


def _c4_estimate(psi_list, basis: ModeBasis) -> float:
    """Largest ratio ``sum |mu_n (psi, u_n)| / ||psi||_C4`` over the given functions."""
    best = 0.0
    xq = basis.quad_x
    for psi in psi_list:
        norm = catalog.c4_norm(psi)
        if norm == 0.0:
            continue
        vals = np.asarray(psi(xq), dtype=float) + 0.0 * xq
        best = max(best, float(np.sum(np.abs(basis.mu * basis.biorthogonal_coeffs(vals)))) / norm)
    return best


def _safe_eq(z: float, q: float) -> float | None:
    try:
        return float(mittag_leffler(z, q, 1.0))
    except NonConvergent:
        return None


def stability_constants(inp: InverseInput, basis: ModeBasis, coeffs: ModeCoefficients | None = None,
                        r: SampledFunction | None = None, n_times: int = 9) -> dict:
    """Continuous-dependence constants evaluated on the inputs.

    ``c4`` (the constant of ``sum |mu_n (psi, u_n)| <= c4 ||psi||_C4``) is
    estimated by the largest observed ratio over ``phi`` and ``f(., t)``.
    Values that overflow the Mittag-Leffler range are reported as None.
    """
    spec = inp.spec
    q, T = spec.q, spec.T
    M = basis.sup_bound
    times = np.linspace(0.0, T, n_times)
    profiles = [catalog.profile(spec.f, float(t)) for t in times]
    N0 = float(np.abs(spec.f_integral()).min())
    N1 = max(catalog.c4_norm(p) for p in profiles)
    N2 = catalog.c4_norm(spec.phi)
    E = inp.E.values
    N3 = float(np.abs(E).max() + np.abs(np.gradient(E, spec.grid.dt)).max())
    c4 = _c4_estimate(profiles + [spec.phi], basis)
    rg1 = float(rgamma(1.0 - q)) if q < 1.0 else 0.0
    tq = T**q
    N4 = c4 * N2 * M
    N5 = tq / q * rg1 * N3
    eps2 = N1 * M * c4 / N0
    eps3 = _safe_eq(eps2 * tq, q)
    M1 = (N4 + N5) / N0**2
    M2 = c4 * M * N1 / N0**2
    M3 = tq / q * rg1 * N1 / N0**2
    rnorm = float(np.abs(r.values).max()) if r is not None else 0.0
    if eps3 is None:
        M4 = None
    else:
        cross = rnorm * tq / (q * math.gamma(q)) * N1 * M * c4 / N0**2
        M4 = max(eps3 * M2, eps3 * M3, eps3 * M1 + eps3 * cross)
    return {"N0": N0, "N1": N1, "N2": N2, "N3": N3, "N4": N4, "N5": N5,
            "M1": M1, "M2": M2, "M3": M3, "M4": M4, "M": M, "c4": c4, "eps2": eps2, "eps3": eps3}


def c1_norm(values: np.ndarray, dt: float) -> float:
    """``max |g| + max |g'|`` of grid samples (central differences)."""
    values = np.asarray(values, dtype=float)
    return float(np.abs(values).max() + np.abs(np.gradient(values, dt)).max())
