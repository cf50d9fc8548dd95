import warnings

import numpy as np
import pytest

from fracsource import catalog
from fracsource.direct import ProblemSpec
from fracsource.errors import AssumptionWarning
from fracsource.spectral import BoundaryConstants, compute_eigenmodes

# criterion id -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict = {}


def r_case_a(t):
    return 1.0 + np.asarray(t, dtype=float) ** 2


def case_a_source():
    return catalog.SeparableSource([(catalog.Exponential(1.0), catalog.bump(1, 3))])


def case_a_spec(nt=256, n_modes=64, q=0.5, phi=None, **kw):
    c = BoundaryConstants(1.0, 0.0, 1.0)
    if phi is None:
        phi = np.polynomial.Polynomial([0.0])
    return ProblemSpec(q, c, 1.0, nt, case_a_source(), phi, n_modes=n_modes, **kw)


def orthogonal_source(c=None, n0=0):
    """Case A profile with its X_n0 component removed."""
    c = c or BoundaryConstants(1.0, 0.0, 1.0)
    h = catalog.orthogonalize(catalog.bump(1, 3), compute_eigenmodes(c, max(n0, 4))[n0])
    return catalog.SeparableSource([(catalog.Exponential(1.0), h)])


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AssumptionWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0][2:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}: {detail}")
