import numpy as np
import pytest

from atomarray_om.fock import HilbertDims, ModelParams, fig4_model


@pytest.fixture
def fig4():
    return fig4_model()


@pytest.fixture
def dims4():
    return HilbertDims(4, 16)


@pytest.fixture
def linear_cavity():
    # g = 0; weak phonon damping removes the decoupled phonon's degeneracy
    return ModelParams(delta_L=0.3, omega_m=1.0, g=0.0, kappa=0.275, Omega=0.01, gamma_m=0.1)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# one line per acceptance criterion, printed after the run whatever the capture mode
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def acceptance_report():
    def report(number: int, passed: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[number])
        return passed
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
