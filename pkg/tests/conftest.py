import sys

import numpy as np
import pytest

from hybridopt import geometry as geo
from hybridopt.catalog import annulus_twostate


@pytest.fixture(scope="session")
def annulus():
    """Coarse annulus 1 < r < 2 on the h = 0.2 background mesh."""
    P = annulus_twostate()
    bg = geo.generate_background_mesh(P.geometry, 0.2)
    ls = geo.init_levelset(bg, geo.Disk((0.0, 0.0), 2.0))
    sub = geo.extract_submesh(ls, P.spec)
    return P, bg, ls, sub


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        terminalreporter.write_line(results[n])
