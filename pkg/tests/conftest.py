import warnings

import pytest

from nessflow.model import JunctionSpec, PairFormFactor, RadialFormFactor, ReservoirState

ACCEPTANCE_LINES = []


@pytest.fixture
def gaussian():
    return RadialFormFactor.gaussian()


def make_spec(bI=1.0, muI=1.0, bII=1.0, muII=1.0, kernel=None, d=3, g=1.0, xi=1.0, pair=False):
    k1 = None if pair else (kernel or RadialFormFactor.gaussian())
    k2 = PairFormFactor() if pair else None
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return JunctionSpec(d, ReservoirState(bI, muI), ReservoirState(bII, muII), k1, k2, g, xi)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
