import math
from pathlib import Path

import pytest

from ionring import TrapConfig, builtin_ca40

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

TWO_PI = 2 * math.pi
OMEGA = TWO_PI * 20e6
OMEGA_Z = TWO_PI * 1e6


def octupole(V0, r0):
    return TrapConfig(8, V0, OMEGA, r0, OMEGA_Z)


@pytest.fixture(scope="session")
def ca():
    return builtin_ca40()


@pytest.fixture(scope="session")
def trap20():
    """Octupole giving a 20 um ring."""
    return octupole(394.4, 200e-6)


@pytest.fixture(scope="session")
def trap40():
    """Octupole giving a 40 um ring."""
    return octupole(1578.0, 400e-6)


def matches_printed(value, printed, decimals=None, exponent=0):
    """True if value, shown with the same digits as ``printed``, is within one unit of the last digit.

    ``exponent`` handles scientific notation: printed 8e-17 is (8, decimals=0, exponent=-17).
    """
    scale = 10.0 ** exponent
    if decimals is None:
        decimals = 0
    shown = round(value / scale, decimals)
    return abs(shown - printed) <= 10.0 ** -decimals * (1 + 1e-9)


def within_factor(value, reference, factor):
    r = value / reference
    return 1 / factor <= r <= factor
