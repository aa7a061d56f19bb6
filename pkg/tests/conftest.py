import sys

import numpy as np
import pytest
from hypothesis import settings

from kleinian.group_engine import DomainSpec, MarkedGroup
from kleinian.moebius import Moebius, triple_transitive
from kleinian.sphere_geom import disk_from_center

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def schottky(sep=3.0, r=1.0):
    """Genus-2 classical Schottky group: disks of radius r at +-sep and +-sep*i."""
    def pair(c1, c2):
        # exterior of |z - c1| < r onto |z - c2| < r
        return Moebius(c2, r * r - c1 * c2, 1, -c1)
    a = pair(-sep, sep)
    b = pair(-sep * 1j, sep * 1j)
    disks = tuple(disk_from_center(c, r) for c in (-sep, sep, -sep * 1j, sep * 1j))
    return MarkedGroup(("a", "b"), (a, b)), DomainSpec(disks, ((0, 1), (2, 3)))


def schottky_triples():
    """Same configuration with pairing maps built from boundary triples."""
    a = triple_transitive((-2, -3 + 1j, -4), (2, 3 + 1j, 4))
    b = triple_transitive((-2j, -3j - 1, -4j), (2j, 3j - 1, 4j))
    disks = tuple(disk_from_center(c, 1.0) for c in (-3, 3, -3j, 3j))
    return MarkedGroup(("a", "b"), (a, b)), DomainSpec(disks, ((0, 1), (2, 3)))


@pytest.fixture
def genus2():
    return schottky_triples()


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
