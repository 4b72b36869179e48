import numpy as np
import pytest

from cpcs.models import make_two_level
from cpcs.pulses import Pulse
from cpcs.units import fs_to_au

OMEGA = 7.35e-2
GAMMA = 3.3e-3
MU = 3.93


@pytest.fixture
def tls():
    return make_two_level(OMEGA, GAMMA, MU)


@pytest.fixture
def template():
    return Pulse(1.4e-3, 0.0, 100.0, OMEGA)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def random_density(rng, d):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = z @ z.conj().T
    return rho / np.trace(rho)


T72 = fs_to_au(72.0)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE = {}


def record_criterion(number, title, passed, detail):
    line = f"AC{number:02d} {'PASS' if passed else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
