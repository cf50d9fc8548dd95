import math

import numpy as np
import pytest
from scipy.special import erfcx, gamma

from fracsource.errors import DiagonalDegenerate, InvalidArgument, InvalidOrder
from fracsource.fracops import SampledFunction, TimeGrid, _power_lag_weights
from fracsource.mlf import mittag_leffler
from fracsource.volterra import VolterraSystem, gronwall_bound, solve_second_kind


def abel(q, lam, nt, P=None):
    grid = TimeGrid(1.0, nt)
    P = SampledFunction.from_callable(grid, P or (lambda t: 1.0 + 0 * t))
    return VolterraSystem(grid, P, q, kernel=lambda t, s: lam / gamma(q))


def test_zero_kernel_returns_free_term():
    sys = abel(0.5, 0.0, 16, np.cos)
    assert np.array_equal(solve_second_kind(sys).values, sys.free_term.values)


def test_abel_resolvent():
    r = solve_second_kind(abel(0.5, 1.0, 1024))
    assert r.values[-1] == pytest.approx(erfcx(-1.0), rel=1e-4)
    assert r.values[-1] == pytest.approx(5.00898, rel=1e-4)


@pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
def test_resolvent_convergence_order(q):
    errs = []
    for n in (64, 128, 256):
        r = solve_second_kind(abel(q, 1.0, n))
        errs.append(np.abs(r.values - mittag_leffler(r.t**q, q)).max())
    assert np.all(np.log2(np.array(errs[:-1]) / np.array(errs[1:])) >= q)


def test_q_one_gives_exponential():
    lam = 1.3
    r = solve_second_kind(abel(1.0, lam, 256))
    assert np.abs(r.values - np.exp(lam * r.t)).max() < 1e-4 * math.exp(lam)


def test_gronwall_examples():
    assert gronwall_bound(0.0, 3.0, 0.5, 2.0) == 0.0
    assert gronwall_bound(0.7, 0.0, 0.5, 2.0) == 0.7
    assert gronwall_bound(1.0, 1.0, 0.5, 1.0) == pytest.approx(5.00898, abs=1e-5)
    with pytest.raises(InvalidArgument):
        gronwall_bound(-1.0, 1.0, 0.5, 1.0)


def test_linearity():
    nt = 64
    k = lambda t, s: np.cos(t - s) - 0.5  # noqa: E731
    grid = TimeGrid(1.0, nt)
    p1 = SampledFunction.from_callable(grid, np.sin)
    p2 = SampledFunction.from_callable(grid, np.exp)
    r1 = solve_second_kind(VolterraSystem(grid, p1, 0.4, kernel=k)).values
    r2 = solve_second_kind(VolterraSystem(grid, p2, 0.4, kernel=k)).values
    both = SampledFunction(grid, 2.0 * p1.values - 3.0 * p2.values)
    r12 = solve_second_kind(VolterraSystem(grid, both, 0.4, kernel=k)).values
    assert np.abs(r12 - (2 * r1 - 3 * r2)).max() <= 1e-13 * np.abs(r12).max()


@pytest.mark.parametrize("q", [0.3, 0.7])
def test_perturbation_containment(q):
    nt, T = 128, 1.0
    grid = TimeGrid(T, nt)
    k = lambda t, s: 2.0 * np.sin(3 * t) * np.cos(s)  # noqa: E731
    MS = 2.0
    rng = np.random.default_rng(5)
    P = SampledFunction.from_callable(grid, np.cos)
    dP = 1e-3 * rng.standard_normal(nt + 1)
    r = solve_second_kind(VolterraSystem(grid, P, q, kernel=k)).values
    rt = solve_second_kind(VolterraSystem(grid, SampledFunction(grid, P.values + dP), q, kernel=k)).values
    bound = gronwall_bound(np.abs(dP).max(), MS * gamma(q), q, T) * (1 + grid.dt**q)
    assert np.abs(r - rt).max() <= bound


def test_weights_form_matches_kernel_form():
    grid = TimeGrid(1.0, 32)
    P = SampledFunction.from_callable(grid, np.cos)
    sys = VolterraSystem(grid, P, 0.5, kernel=lambda t, s: 0.3 + 0 * t * s)
    W = sys.quadrature_matrix()
    r1 = solve_second_kind(sys).values
    r2 = solve_second_kind(VolterraSystem(grid, P, 0.5, weights=W)).values
    assert np.array_equal(r1, r2)


def test_extrapolated_start_is_consistent():
    # smooth solution: r_0 inherits the O(dt^2) error of r_1..r_3
    r = solve_second_kind(abel(1.0, 1.0, 256), start="extrapolate")
    assert r.values[0] == pytest.approx(1.0, abs=1e-6)
    assert np.abs(r.values - np.exp(r.t)).max() < 1e-5


def test_diagonal_degenerate():
    nt, q = 16, 0.5
    grid = TimeGrid(1.0, nt)
    a, b = _power_lag_weights(q, nt, grid.dt)
    S = 1.0 / (a[0] + b[0])
    P = SampledFunction.from_callable(grid, np.cos)
    with pytest.raises(DiagonalDegenerate):
        solve_second_kind(VolterraSystem(grid, P, q, kernel=lambda t, s: S + 0 * t))


def test_system_validation():
    grid = TimeGrid(1.0, 8)
    P = SampledFunction(grid, np.zeros(9))
    with pytest.raises(InvalidOrder):
        VolterraSystem(grid, P, 1.5, kernel=lambda t, s: t)
    with pytest.raises(InvalidArgument):
        VolterraSystem(grid, P, 0.5)
    with pytest.raises(InvalidArgument):
        VolterraSystem(grid, P, 0.5, weights=np.zeros((3, 3)))
    with pytest.raises(InvalidArgument):
        VolterraSystem(TimeGrid(2.0, 8), P, 0.5, kernel=lambda t, s: t)
    with pytest.raises(InvalidArgument):
        solve_second_kind(VolterraSystem(grid, P, 0.5, kernel=lambda t, s: t), start="nope")
    with pytest.raises(InvalidArgument):
        solve_second_kind(VolterraSystem(grid, P, 0.5, kernel=lambda t, s: np.inf + t))
