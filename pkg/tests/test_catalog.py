import numpy as np
import pytest

from fracsource import catalog
from fracsource.errors import ConfigError
from fracsource.spectral import BoundaryConstants, compute_eigenmodes, forward_coeff

MODES = compute_eigenmodes(BoundaryConstants(1.0, -2.0, 1.0), 3)


@pytest.mark.parametrize("mode", MODES[:2])
def test_mode_shape_derivatives(mode):
    x = np.linspace(0.05, 0.95, 7)
    h = 1e-4
    shape = catalog.ModeShape(mode, 2.0)
    for k in range(3):
        d = shape.deriv(k)
        fd = (d(x + h) - d(x - h)) / (2 * h)
        assert np.allclose(fd, shape.deriv(k + 1)(x), rtol=1e-6, atol=1e-6)


def test_linear_mode_shape():
    m = compute_eigenmodes(BoundaryConstants(1.0, -1.0, 1.0), 2)[0]
    s = catalog.ModeShape(m)
    assert np.array_equal(s(np.array([0.25])), [0.25])
    assert s.deriv(1)(0.3) == 1.0 and s.deriv(2)(0.3) == 0.0


def test_exponential_and_bump():
    e = catalog.Exponential(-2.0, 3.0)
    assert e.deriv(2)(0.0) == pytest.approx(12.0)
    b = catalog.bump(3, 4)
    assert b(0.5) == pytest.approx(0.5**7)
    assert b.deriv(2)(0.0) == 0.0 and b.deriv(3)(1.0) == 0.0


def test_tabulated():
    tab = catalog.Tabulated([0, 1, 2], [0, 10, 0])
    assert tab(0.5) == 5.0 and tab(3.0) == 0.0
    with pytest.raises(ConfigError):
        catalog.Tabulated([0, 0, 1], [1, 2, 3])
    with pytest.raises(ConfigError):
        catalog.Tabulated([0], [1])


def test_separable_source_and_profile():
    f = catalog.SeparableSource([(catalog.Exponential(1.0), catalog.bump(1, 3))])
    prof = catalog.profile(f, 0.5)
    x = np.linspace(0, 1, 5)
    assert np.allclose(prof(x), f(x, 0.5))
    assert prof.deriv(2)(0.0) == pytest.approx(-6 * np.exp(0.5))
    plain = catalog.profile(lambda x, t: x * t, 2.0)
    assert plain(0.25) == 0.5


def test_chebyshev_fallback_derivative():
    d = catalog.space_derivative(lambda x: np.sin(3 * x), 2)
    x = np.linspace(0, 1, 9)
    assert np.allclose(d(x), -9 * np.sin(3 * x), atol=1e-9)


def test_c4_norm_of_polynomial():
    # x^2: sup norms 1, 2, 2, 0, 0
    assert catalog.c4_norm(np.polynomial.Polynomial([0, 0, 1])) == pytest.approx(5.0)


def test_orthogonalize():
    m0 = MODES[0]
    psi = catalog.orthogonalize(catalog.bump(3, 4), m0)
    assert abs(forward_coeff(psi, m0, quad_order=32)) < 1e-15
    with pytest.raises(ConfigError):
        catalog.orthogonalize(catalog.bump(3, 4), m0, helper=np.polynomial.Polynomial([0.0]))
