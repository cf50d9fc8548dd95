r"""Series solution of the direct problem for a known source factor ``r(t)``.

Each kept mode obeys :math:`D^q(v_n - v_n(0)) + \mu_n v_n = r f_n`, solved by

.. math::

    v_n(t) = \varphi_n E_q(-\mu_n t^q)
        + \int_0^t (t-\tau)^{q-1} E_{q,q}(-\mu_n (t-\tau)^q) r(\tau) f_n(\tau)\,d\tau .

The convolution is discretized by product integration with the whole
Mittag-Leffler kernel as weight (its moments are available in closed form),
so only ``r f_n`` is interpolated.  This keeps high modes with large
:math:`\mu_n \Delta t^q` accurate.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import AssumptionWarning, InvalidArgument, TruncationWarning
from .fracops import SampledFunction, TimeGrid, lag_weights_from_moments, apply_lag_weights
from .mlf import kernel_moments, mittag_leffler
from .spectral import BoundaryConstants, ModeBasis, compute_modes

#: residual |(f, X_n0)| above which a warning is emitted
ORTHOGONALITY_TOL = 1e-8


@dataclass
class ProblemSpec:
    """Data of the direct / inverse problem on ``[0, 1] x [0, T]``.

    ``f(x, t)`` and ``phi(x)`` must accept numpy arrays and broadcast.
    """

    q: float
    constants: BoundaryConstants
    T: float
    Nt: int
    f: Callable
    phi: Callable
    n_modes: int = 64
    quad_order: int = 16
    n0: int = 0
    tail_tol: float = 1e-4

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise InvalidArgument(f"q must lie in (0, 1], got {self.q}")
        if self.n_modes < 4:
            raise InvalidArgument("n_modes must be >= 4")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.T, self.Nt)

    def basis(self) -> ModeBasis:
        # one more eigenpair so that n_modes modes remain after removing n0
        return compute_modes(self.constants, self.n_modes, self.quad_order, self.n0)

    def f_integral(self) -> np.ndarray:
        """``int_0^1 f(x, t) dx`` on the time grid."""
        from .spectral import gauss_legendre_panels

        x, w = gauss_legendre_panels(8, 16)
        vals = np.asarray(self.f(x[:, None], self.grid.nodes[None, :]), dtype=float)
        vals = np.broadcast_to(vals, (x.size, self.Nt + 1))
        return w @ vals

    def phi_integral(self) -> float:
        from .spectral import gauss_legendre_panels

        x, w = gauss_legendre_panels(8, 16)
        return float(w @ np.broadcast_to(np.asarray(self.phi(x), dtype=float), x.shape))


@dataclass
class ModeCoefficients:
    phi_n: np.ndarray  # (K,)
    f_n: np.ndarray  # (K, Nt+1)
    phi_n0_residual: float
    f_n0_residual: float


def mode_coefficients(spec: ProblemSpec, basis: ModeBasis) -> ModeCoefficients:
    """Biorthogonal coefficients of ``phi`` and ``f(., t_i)`` for every kept mode."""
    xq = basis.quad_x
    t = spec.grid.nodes
    phi_q = np.broadcast_to(np.asarray(spec.phi(xq), dtype=float), xq.shape)
    f_q = np.broadcast_to(np.asarray(spec.f(xq[:, None], t[None, :]), dtype=float), (xq.size, t.size))
    phi_n = basis.biorthogonal_coeffs(np.ascontiguousarray(phi_q))
    f_n = basis.biorthogonal_coeffs(np.ascontiguousarray(f_q))
    res_phi = float(abs(basis.n0_coeff(np.ascontiguousarray(phi_q))))
    res_f = float(np.abs(basis.n0_coeff(np.ascontiguousarray(f_q))).max())
    return ModeCoefficients(phi_n, f_n, res_phi, res_f)


@lru_cache(maxsize=4096)
def mode_lag_weights(mu: float, q: float, nt: int, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Product-integration lag coefficients for the kernel
    ``s**(q-1) * E_{q,q}(-mu s**q)``."""
    s = np.arange(nt + 1) * dt
    g0, g1 = kernel_moments(s, mu, q)
    a, b = lag_weights_from_moments(g0, g1, dt)
    a.setflags(write=False)
    b.setflags(write=False)
    return a, b


def relaxation(mu: float, q: float, t: np.ndarray) -> np.ndarray:
    """``E_q(-mu t**q)`` (``mu`` may be negative for a hyperbolic mode)."""
    return mittag_leffler(-mu * np.asarray(t, dtype=float) ** q, q, 1.0)


def evolve_mode(mu: float, phi_n: float, f_n: SampledFunction, r: SampledFunction, q: float) -> SampledFunction:
    """Mode amplitude ``v_n(t_i)`` for a given source factor."""
    grid = r.grid
    a, b = mode_lag_weights(float(mu), float(q), grid.Nt, grid.dt)
    v = phi_n * relaxation(mu, q, grid.nodes) + apply_lag_weights(a, b, r.values * f_n.values)
    return SampledFunction(grid, v)


@dataclass
class Field:
    """Truncated series solution with its mode amplitudes."""

    x: np.ndarray
    t: np.ndarray
    values: np.ndarray = field(repr=False)  # (nx, nt)
    amplitudes: np.ndarray = field(repr=False)  # (K, nt)
    basis: ModeBasis = field(repr=False)
    tail_indicator: float = 0.0

    def at(self, x) -> np.ndarray:
        """Evaluate the series at other space points (rows) for all times."""
        return self.basis.eval(np.asarray(x, dtype=float)).T @ self.amplitudes


def mode_amplitudes(spec: ProblemSpec, basis: ModeBasis, r: SampledFunction,
                    coeffs: ModeCoefficients | None = None) -> np.ndarray:
    grid = spec.grid
    if coeffs is None:
        coeffs = mode_coefficients(spec, basis)
    v = np.empty((len(basis), grid.Nt + 1))
    for k, mode in enumerate(basis.modes):
        v[k] = evolve_mode(mode.mu, coeffs.phi_n[k], SampledFunction(grid, coeffs.f_n[k]), r, spec.q).values
    return v


def solve_direct(spec: ProblemSpec, basis: ModeBasis, r: SampledFunction, x=None,
                 coeffs: ModeCoefficients | None = None) -> Field:
    """Truncated series solution on space points ``x`` (default 101 uniform)."""
    if coeffs is None:
        coeffs = mode_coefficients(spec, basis)
    for name, res in (("phi", coeffs.phi_n0_residual), ("f", coeffs.f_n0_residual)):
        if res > ORTHOGONALITY_TOL:
            warnings.warn(
                f"{name} is not orthogonal to the excluded mode X_{basis.n0}: residual {res:.3e}",
                AssumptionWarning,
                stacklevel=2,
            )
    v = mode_amplitudes(spec, basis, r, coeffs)
    if x is None:
        x = np.linspace(0.0, 1.0, 101)
    x = np.asarray(x, dtype=float)
    X = basis.eval(x)
    u = X.T @ v
    tail = float(np.abs(v[-1]).max() * basis.sup_bound)
    if tail > spec.tail_tol:
        warnings.warn(f"last retained mode still contributes {tail:.3e}", TruncationWarning, stacklevel=2)
    return Field(x, spec.grid.nodes, u, v, basis, tail)


def energy(u: Field) -> np.ndarray:
    """``int_0^1 u dx`` from mode amplitudes and exact mode integrals."""
    return u.basis.int01 @ u.amplitudes


def energy_sampled(u: Field, grid: TimeGrid) -> SampledFunction:
    return SampledFunction(grid, energy(u))


def homogeneous_energy(spec: ProblemSpec, basis: ModeBasis, coeffs: ModeCoefficients | None = None) -> np.ndarray:
    """``F(t) = sum_n phi_n E_q(-mu_n t^q) int X_n``, energy of the source-free solution."""
    if coeffs is None:
        coeffs = mode_coefficients(spec, basis)
    t = spec.grid.nodes
    out = np.zeros_like(t)
    for k, mode in enumerate(basis.modes):
        if coeffs.phi_n[k] != 0.0:
            out += coeffs.phi_n[k] * mode.int01 * relaxation(mode.mu, spec.q, t)
    return out


def synthetic_energy(spec: ProblemSpec, r_fn, refine: int = 4, basis: ModeBasis | None = None) -> SampledFunction:
    """Energy data for a known ``r``, computed on a ``refine``-times finer time
    grid and sampled back onto ``spec.grid`` (avoids solving the inverse
    problem with exactly the forward discretization)."""
    if refine < 1:
        raise InvalidArgument("refine must be >= 1")
    fine = dataclasses.replace(spec, Nt=spec.Nt * refine)
    if basis is None:
        basis = fine.basis()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionWarning)
        u = solve_direct(fine, basis, SampledFunction.from_callable(fine.grid, r_fn))
    return SampledFunction(spec.grid, energy(u)[::refine])
