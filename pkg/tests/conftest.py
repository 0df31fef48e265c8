import math

import pytest
from hypothesis import strategies as st

from ttwlab.model import ModelParameters, PhaseState

RATIONAL_KS = [(1, 1), (2, 1), (3, 1), (1, 2), (3, 2), (5, 2)]


@pytest.fixture
def unit_symmetric():
    return ModelParameters.rational(1.0, 1.0, 1.0, 1, 1)


@pytest.fixture
def unit_asymmetric():
    return ModelParameters.rational(1.0, 1.0, 2.0, 1, 1)


@st.composite
def params_and_states(draw, rational=True):
    omega = draw(st.floats(0.3, 3.0))
    alpha = draw(st.floats(0.2, 4.0))
    beta = draw(st.floats(0.2, 4.0))
    if rational:
        m, n = draw(st.sampled_from(RATIONAL_KS + [(1, 3), (4, 3)]))
        params = ModelParameters.rational(omega, alpha, beta, m, n)
    else:
        params = ModelParameters.irrational(omega, alpha, beta, draw(st.floats(0.3, 3.0)))
    frac = draw(st.floats(0.02, 0.98))
    state = PhaseState(draw(st.floats(0.2, 3.0)), frac * params.sector_width,
                       draw(st.floats(-3.0, 3.0)), draw(st.floats(-3.0, 3.0)))
    return params, state


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
