import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riveq import Dissipation, EnergyDensity, Loading, RISystem, ViscousCorrection

settings.register_profile(
    "riveq", max_examples=int(os.environ.get("RIVEQ_EXAMPLES", "25")), deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("riveq")


def quartic_system(mu=0.0, alpha=0.5, interval=(0.0, 1.2), slope=1.0, scale=1.0):
    d = ViscousCorrection.none() if mu == 0 else ViscousCorrection.quadratic(mu)
    return RISystem(EnergyDensity.quartic_double_well(scale), Loading.linear(slope, 0.0, interval),
                    Dissipation(alpha, alpha), d)


def play_system(mu=1.0):
    d = ViscousCorrection.none() if mu == 0 else ViscousCorrection.quadratic(mu)
    return RISystem(EnergyDensity.polynomial([0.0, 0.0, 0.5]), Loading.linear(1.0, 0.0, (0.0, 2.0)),
                    Dissipation(1.0, 1.0), d)


def composite_energy():
    """Two sextic wells joined by a linear piece on [1, 1.5]; C^1 at the joints."""
    P = np.polynomial.polynomial
    dw1 = P.polyadd(P.polymul(P.polymul([-1, 0, 1], [-1, 0, 1]), [-1, 0.4]), [0.5])
    w1 = P.polyint(dw1)
    c1 = P.polyval(1.0, w1)
    w2 = np.array([c1 - 0.5, 0.5])
    c2 = P.polyval(1.5, w2)
    shifted = np.zeros(1)
    for k, a in enumerate(w1):
        shifted = P.polyadd(shifted, a * P.polypow([-0.5, 1], k))
    w3 = P.polyadd(shifted, [c2 - c1])
    return EnergyDensity.composite([((-math.inf, 1.0), w1), ((1.0, 1.5), w2), ((1.5, math.inf), w3)])


def composite_system(mu=2.7):
    return RISystem(composite_energy(), Loading.linear(1.0, 0.0, (0.0, 2.0)), Dissipation(0.5, 0.5),
                    ViscousCorrection.quadratic(mu))


@pytest.fixture
def quartic0():
    return quartic_system(0.0)


@pytest.fixture
def quartic1():
    return quartic_system(1.0)


_ACCEPTANCE = pytest.StashKey()


@pytest.fixture
def acceptance(request):
    """record(n, ok, detail): one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, {})

    def record(n, ok, detail):
        lines[n] = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        print(lines[n])

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
