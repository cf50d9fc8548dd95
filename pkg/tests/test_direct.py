import dataclasses
import warnings

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from conftest import case_a_spec, orthogonal_source, r_case_a
from fracsource import catalog
from fracsource.direct import (
    ProblemSpec,
    energy,
    evolve_mode,
    homogeneous_energy,
    mode_coefficients,
    relaxation,
    solve_direct,
    synthetic_energy,
)
from fracsource.errors import AssumptionWarning, InvalidArgument, TruncationWarning
from fracsource.fracops import SampledFunction, TimeGrid
from fracsource.spectral import BoundaryConstants

C = BoundaryConstants(1.0, 0.0, 1.0)
ZERO = np.polynomial.Polynomial([0.0])


def spec_with(phi=ZERO, f=None, q=0.5, nt=128, n_modes=32, **kw):
    f = f or orthogonal_source()
    return ProblemSpec(q, C, 1.0, nt, f, phi, n_modes=n_modes, **kw)


def r_of(spec, fn):
    return SampledFunction.from_callable(spec.grid, fn)


class TestCoefficients:
    def test_mode_phi_gives_delta(self):
        spec = spec_with()
        basis = spec.basis()
        k = 3
        spec = dataclasses.replace(spec, phi=catalog.ModeShape(basis.modes[k]))
        phi_n = mode_coefficients(spec, basis).phi_n
        expect = np.zeros(len(basis))
        expect[k] = 1.0
        assert np.abs(phi_n - expect).max() < 1e-12

    def test_zero_phi(self):
        spec = spec_with()
        assert np.all(mode_coefficients(spec, spec.basis()).phi_n == 0.0)

    def test_separable(self):
        spec = spec_with()
        basis = spec.basis()
        fn = mode_coefficients(spec, basis).f_n
        ratio = fn / np.exp(spec.grid.nodes)[None, :]
        assert np.abs(ratio - ratio[:, :1]).max() < 1e-14 * np.abs(ratio).max() * 10


class TestEvolveMode:
    grid = TimeGrid(1.0, 256)

    def test_homogeneous(self):
        zero = SampledFunction(self.grid, np.zeros(257))
        v = evolve_mode(3.0, 0.7, zero, zero, 0.5)
        assert np.allclose(v.values, 0.7 * relaxation(3.0, 0.5, self.grid.nodes), rtol=1e-15)

    @pytest.mark.parametrize("mu,q", [(0.74, 0.5), (40.0, 0.3), (10.0, 0.9)])
    def test_unit_forcing_closed_form(self, mu, q):
        one = SampledFunction(self.grid, np.ones(257))
        v = evolve_mode(mu, 0.0, one, one, q)
        exact = (1 - relaxation(mu, q, self.grid.nodes)) / mu
        assert np.abs(v.values - exact).max() < 1e-12

    def test_classical_decay(self):
        zero = SampledFunction(self.grid, np.zeros(257))
        v = evolve_mode(2.5, 1.0, zero, zero, 1.0)
        assert np.allclose(v.values, np.exp(-2.5 * self.grid.nodes), rtol=1e-14)

    def test_hyperbolic_mode(self):
        # mu < 0: growth E_q(|mu| t^q)
        one = SampledFunction(self.grid, np.ones(257))
        v = evolve_mode(-0.76, 0.0, one, one, 1.0)
        assert np.abs(v.values - np.expm1(0.76 * self.grid.nodes) / 0.76).max() < 1e-5


class TestSolveDirect:
    def test_single_mode(self, quiet):
        spec = spec_with()
        basis = spec.basis()
        k = 2
        mode = basis.modes[k]
        spec = dataclasses.replace(spec, phi=catalog.ModeShape(mode))
        u = solve_direct(spec, basis, r_of(spec, lambda t: 0 * t))
        exact = np.outer(catalog.ModeShape(mode)(u.x), relaxation(mode.mu, spec.q, u.t))
        assert np.abs(u.values - exact).max() < 1e-12
        E = energy(u)
        assert np.allclose(E, relaxation(mode.mu, spec.q, u.t) * (1 - np.cos(mode.s)) / mode.s, rtol=1e-11)

    def test_zero(self):
        spec = spec_with()
        u = solve_direct(spec, spec.basis(), r_of(spec, lambda t: 0 * t))
        assert np.all(u.values == 0.0) and np.all(energy(u) == 0.0)

    def test_q_one_matches_classical(self):
        spec = spec_with(q=1.0, nt=256, n_modes=32, phi=catalog.orthogonalize(catalog.bump(3, 4), spec_with().basis().n0_mode))
        basis = spec.basis()
        co = mode_coefficients(spec, basis)
        x = np.linspace(0, 1, 41)
        u = solve_direct(spec, basis, r_of(spec, r_case_a), x=x, coeffs=co)
        # classical oracle: the same modes, each ODE v' = -mu v + r f_n solved to tight tolerance
        t = spec.grid.nodes
        V = np.empty((len(basis), t.size))
        for k, m in enumerate(basis.modes):
            fk = co.f_n[k, 0]  # f_n(t) = fk e^t
            sol = solve_ivp(lambda s, v: -m.mu * v + r_case_a(s) * fk * np.exp(s), (0, 1), [co.phi_n[k]],
                            t_eval=t, rtol=1e-12, atol=1e-14, method="DOP853")
            V[k] = sol.y[0]
        ref = basis.eval(x).T @ V
        assert np.abs(u.values - ref).max() < 1e-4

    def test_energy_at_zero_matches_phi_integral(self):
        phi = catalog.orthogonalize(catalog.bump(3, 4), spec_with().basis().n0_mode)
        spec = spec_with(phi=phi, n_modes=64)
        u = solve_direct(spec, spec.basis(), r_of(spec, r_case_a))
        assert energy(u)[0] == pytest.approx(spec.phi_integral(), abs=1e-6)
        assert homogeneous_energy(spec, spec.basis())[0] == pytest.approx(energy(u)[0], rel=1e-14)

    def test_boundary_conditions(self):
        phi = catalog.orthogonalize(catalog.bump(3, 4), spec_with().basis().n0_mode)
        spec = spec_with(phi=phi, n_modes=48)
        basis = spec.basis()
        u = solve_direct(spec, basis, r_of(spec, r_case_a))
        assert np.abs(u.values[0]).max() < 1e-14
        c = spec.constants
        # a u_xx + d u_x + b u at x = 1, term by term from the closed forms
        per_mode = np.array([-c.a * m.mu * m.x1 + c.d * m.dx1 + c.b * m.x1 for m in basis.modes])
        resid = np.abs(per_mode @ u.amplitudes).max()
        assert resid <= max(u.tail_indicator, 1e-12)

    def test_majorant(self):
        spec = spec_with(n_modes=40)
        basis = spec.basis()
        co = mode_coefficients(spec, basis)
        r = r_of(spec, r_case_a)
        u = solve_direct(spec, basis, r, coeffs=co)
        for k, m in enumerate(basis.modes):
            if m.mu > 0:
                bound = abs(co.phi_n[k]) + np.abs(r.values).max() * np.abs(co.f_n[k]).max() / m.mu
                assert np.abs(u.amplitudes[k]).max() <= bound * (1 + 1e-12)

    def test_linearity(self):
        phi = catalog.orthogonalize(catalog.bump(3, 4), spec_with().basis().n0_mode)
        s1 = spec_with(phi=phi)
        s0 = spec_with()
        basis = s1.basis()
        r = r_of(s1, r_case_a)
        zero = r_of(s1, lambda t: 0 * t)
        u = solve_direct(s1, basis, r).values
        uphi = solve_direct(s1, basis, zero).values
        uf = solve_direct(s0, basis, r).values
        assert np.abs(u - uphi - uf).max() < 1e-14

    def test_warnings(self):
        spec = case_a_spec(nt=32, n_modes=8, tail_tol=1e-12)
        with pytest.warns(AssumptionWarning):
            with pytest.warns(TruncationWarning):
                solve_direct(spec, spec.basis(), r_of(spec, r_case_a))
        spec = spec_with(nt=32, n_modes=16)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            solve_direct(spec, spec.basis(), r_of(spec, r_case_a))

    def test_spec_validation(self):
        with pytest.raises(InvalidArgument):
            spec_with(q=1.5)
        with pytest.raises(InvalidArgument):
            spec_with(n_modes=2)

    def test_synthetic_energy_converges(self):
        spec = spec_with(nt=64)
        fine = synthetic_energy(spec, r_case_a, refine=8).values
        coarse = energy(solve_direct(spec, spec.basis(), r_of(spec, r_case_a)))
        assert fine.shape == coarse.shape
        assert np.abs(fine - coarse).max() < 1e-4
        with pytest.raises(InvalidArgument):
            synthetic_energy(spec, r_case_a, refine=0)
