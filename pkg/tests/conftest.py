import math

import numpy as np
import pytest
from scipy.special import erf

from igbtdrive.device_model import CircuitParams, DeviceParams
from igbtdrive.gate_drive import TURN_OFF, TURN_ON
from igbtdrive.transient_sim import SimConfig, Waveforms


@pytest.fixture(scope="session")
def dev():
    return DeviceParams()


@pytest.fixture(scope="session")
def circ():
    return CircuitParams()


@pytest.fixture(scope="session")
def cfg():
    return SimConfig()


def make_edge(v_ce, dt, edge=TURN_ON, i_c=None, v_ge=None):
    v_ce = np.asarray(v_ce, dtype=float)
    z = np.zeros_like(v_ce)
    return Waveforms(
        dt,
        0.0,
        z.copy() if v_ge is None else np.asarray(v_ge, dtype=float),
        v_ce,
        z.copy() if i_c is None else np.asarray(i_c, dtype=float),
        z.copy(),
        edge,
    )


def erf_edge(n, dt, center, sigma, v_hi=130.0, v_lo=2.0):
    """Falling edge whose derivative is a Gaussian of std ``sigma``."""
    t = dt * np.arange(n)
    g = 0.5 * (1 - erf((t - center) / (math.sqrt(2) * sigma)))
    return v_lo + (v_hi - v_lo) * g


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line and assert it."""

    def check(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
