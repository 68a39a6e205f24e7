import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hybridopt import gclosure as gc

ALPHA, BETA = 1.0, 2.0

thetas = st.floats(0.0, 1.0)
entries = st.floats(-5.0, 5.0, allow_nan=False)


def _sym(a, b, c):
    return np.array([[a, b], [b, c]])


def test_lambda_bounds_examples():
    b = gc.lambda_bounds(0.0, ALPHA, BETA)
    assert (b.lambda_minus, b.lambda_plus) == (BETA, BETA)
    b = gc.lambda_bounds(1.0, ALPHA, BETA)
    assert (b.lambda_minus, b.lambda_plus) == (ALPHA, ALPHA)
    b = gc.lambda_bounds(0.5, ALPHA, BETA)
    assert b.lambda_minus == pytest.approx(4.0 / 3.0, abs=1e-15)
    assert b.lambda_plus == pytest.approx(1.5, abs=1e-15)


@pytest.mark.parametrize("args", [(-0.1, 1.0, 2.0), (1.1, 1.0, 2.0), (0.5, 2.0, 1.0),
                                  (0.5, 0.0, 1.0), (float("nan"), 1.0, 2.0)])
def test_lambda_bounds_domain_errors(args):
    with pytest.raises(gc.DomainError):
        gc.lambda_bounds(*args)


@given(thetas)
def test_bound_chain(t):
    b = gc.lambda_bounds(t, ALPHA, BETA)
    assert ALPHA <= b.lambda_minus <= b.lambda_plus <= BETA
    # strict away from the endpoints (rounding merges the means very close to them)
    if 1e-6 < t < 1.0 - 1e-6:
        assert b.lambda_minus < b.lambda_plus


def test_membership_corners_and_outside():
    b = gc.lambda_bounds(0.3, ALPHA, BETA)
    lm, lp = b.lambda_minus, b.lambda_plus
    assert gc.in_gclosure(0.3, np.diag([lm, lp]), ALPHA, BETA)
    assert gc.in_gclosure(0.3, np.diag([lp, lm]), ALPHA, BETA)
    assert not gc.in_gclosure(0.3, np.diag([lp, lp]), ALPHA, BETA)
    assert not gc.in_gclosure(0.3, np.diag([lm, lm]), ALPHA, BETA)
    # isotropic Hashin-Shtrikman-type interior point
    assert gc.in_gclosure(0.3, 0.5 * (lm + lp) * np.eye(2), ALPHA, BETA)


def test_anchor_values():
    assert gc.maximize_F(0.5, np.eye(2), ALPHA, BETA)[0] == pytest.approx(20.0 / 7.0, abs=1e-12)
    assert gc.maximize_F(0.5, -np.eye(2), ALPHA, BETA)[0] == pytest.approx(-14.0 / 5.0, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(thetas, entries, entries, entries)
def test_F_dominates_samples(t, a, b, c):
    M = _sym(a, b, c)
    F = gc.maximize_F(t, M, ALPHA, BETA)[0]
    A = gc.sample_gclosure(t, ALPHA, BETA, 200, np.random.default_rng(0))
    assert np.max(np.einsum("kab,ab->k", A, M)) <= F + 1e-9 * (1.0 + abs(F))


@settings(max_examples=40, deadline=None)
@given(thetas, entries, entries, entries)
def test_argmax_feasible_and_attains(t, a, b, c):
    M = _sym(a, b, c)
    A = gc.argmax_A(t, M, ALPHA, BETA)
    F = gc.maximize_F(t, M, ALPHA, BETA)[0]
    assert np.allclose(A, A.T)
    assert gc.in_gclosure(t, A, ALPHA, BETA, 1e-8)
    assert np.sum(A * M) == pytest.approx(F, abs=1e-9 * (1.0 + abs(F)))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.02, 0.98), entries, entries, entries)
def test_dF_matches_fd(t, a, b, c):
    M = _sym(a, b, c)
    d = gc.dF_dtheta(t, M, ALPHA, BETA)
    fd = gc.dF_dtheta_fd(t, M, ALPHA, BETA)
    assert abs(d - fd) <= 1e-4 * max(abs(fd), 1e-6 * (1.0 + np.abs(M).max()))


def test_grid_oracle_agrees(rng):
    for _ in range(20):
        t = rng.uniform()
        M = rng.normal(size=(2, 2))
        M = M + M.T
        F = gc.maximize_F(t, M, ALPHA, BETA)[0]
        assert abs(F - gc.grid_oracle(t, M, ALPHA, BETA)) <= 1e-3 * (1.0 + abs(F))


def test_vectorised_matches_scalar(rng):
    t = rng.uniform(size=50)
    M = rng.normal(size=(50, 2, 2))
    M = M + np.swapaxes(M, 1, 2)
    F = gc.maximize_F(t, M, ALPHA, BETA)[0]
    for i in range(50):
        assert F[i] == pytest.approx(gc.maximize_F(t[i], M[i], ALPHA, BETA)[0], rel=1e-14)


def test_F_zero_matrix():
    assert gc.maximize_F(0.4, np.zeros((2, 2)), ALPHA, BETA)[0] == 0.0


def test_solve_theta_update_root(rng):
    M = rng.normal(size=(30, 2, 2))
    M = M + np.swapaxes(M, 1, 2)
    t0 = rng.uniform(0.1, 0.9, 30)
    # choose the shift so that t0 is an exact root
    l = gc.dF_dtheta(t0, M, ALPHA, BETA)
    t = gc.solve_theta_update(l, np.zeros(30), M, ALPHA, BETA)
    q = gc.update_map(t, l, 0.0, M, ALPHA, BETA)
    assert np.all(np.abs(q) < 1e-6 * (1.0 + np.abs(l)))
    assert np.all((t >= 0.0) & (t <= 1.0))


def test_solve_theta_update_endpoints_and_tie():
    M = np.diag([1.0, 0.5])
    assert gc.solve_theta_update(1e6, 0.0, M, ALPHA, BETA) == 0.0
    assert gc.solve_theta_update(-1e6, 0.0, M, ALPHA, BETA) == 1.0
    Z = np.zeros((2, 2))
    assert gc.solve_theta_update(0.0, 0.0, Z, ALPHA, BETA, tie_value=0.37) == 0.37


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_dF_monotone_for_definite_M(sign, rng):
    grid = np.linspace(0.0, 1.0, 101)
    for _ in range(10):
        B = rng.normal(size=(2, 2))
        M = sign * (B @ B.T)
        d = np.diff(gc.dF_dtheta(grid, np.broadcast_to(M, (101, 2, 2)), ALPHA, BETA))
        # concave in theta for negative semidefinite M, convex for positive
        assert np.all(sign * d >= -1e-10)
