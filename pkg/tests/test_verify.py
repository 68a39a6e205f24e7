import pytest

from hybridopt import gclosure as gc
from hybridopt.verify import SUITES, UnknownSuite, verify


def _names(rep, suite):
    return {c.name: c for c in rep.checks[suite]}


@pytest.mark.parametrize("suite", SUITES)
def test_suite_passes(suite):
    rep = verify(suite)
    failed = [c.name for c in rep.checks[suite] if not c.passed]
    assert rep.passed, failed


def test_tampered_F_is_caught():
    def low(theta, M, alpha, beta):
        return gc.maximize_F(theta, M, alpha, beta)[0] - 1e-2

    checks = _names(verify("gclosure", F=low), "gclosure")
    assert not checks["oracle_dominance"].passed
    assert not checks["anchor_identity"].passed


def test_tampered_F_high_fails_grid_oracle():
    def high(theta, M, alpha, beta):
        return gc.maximize_F(theta, M, alpha, beta)[0] + 1e-2

    checks = _names(verify("gclosure", F=high), "gclosure")
    assert checks["oracle_dominance"].passed
    assert not checks["grid_oracle"].passed


def test_unknown_suite():
    with pytest.raises(UnknownSuite):
        verify("everything")


def test_report_dict():
    d = verify("gclosure").to_dict()
    assert set(d) == {"seed", "passed", "suites"}
    assert all({"name", "passed", "value", "tolerance", "detail"} == set(c)
               for c in d["suites"]["gclosure"])
