"""Two-phase G-closure K(theta) in two dimensions.

K(theta) is the set of symmetric 2x2 conductivity tensors reachable by mixing
an isotropic phase ``alpha`` (volume fraction ``theta``) with an isotropic
phase ``beta > alpha``.  Its eigenvalue pairs form a lens R(theta) bounded by
two hyperbolic arcs that meet at the laminate corners (lam-, lam+) and
(lam+, lam-).

All public functions broadcast over numpy arrays of ``theta`` and matrices
``M`` of shape ``(..., 2, 2)`` so the optimality-criteria loop can process
every triangle at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Raised when theta or the phase conductivities are out of range."""


@dataclass(frozen=True)
class GClosureBounds:
    theta: float
    alpha: float
    beta: float
    lambda_minus: float
    lambda_plus: float


def _check_phases(alpha, beta):
    if not (0.0 < alpha < beta):
        raise DomainError(f"need 0 < alpha < beta, got alpha={alpha}, beta={beta}")


def _check_theta(theta):
    theta = np.asarray(theta, dtype=float)
    if np.any(~np.isfinite(theta)) or np.any(theta < 0.0) or np.any(theta > 1.0):
        raise DomainError("theta must lie in [0, 1]")
    return theta


def harmonic_arithmetic(theta, alpha, beta):
    """Vectorised (lam-, lam+) without argument checks."""
    theta = np.asarray(theta, dtype=float)
    lam_minus = alpha * beta / (alpha + theta * (beta - alpha))
    lam_plus = beta - theta * (beta - alpha)
    return lam_minus, lam_plus


def lambda_bounds(theta: float, alpha: float, beta: float) -> GClosureBounds:
    """Harmonic and arithmetic means bounding the eigenvalues of K(theta)."""
    _check_phases(alpha, beta)
    t = float(_check_theta(theta))
    lm, lp = harmonic_arithmetic(t, alpha, beta)
    # exact endpoint values; the formulas above round at theta = 0, 1
    if t == 0.0:
        lm = lp = float(beta)
    elif t == 1.0:
        lm = lp = float(alpha)
    return GClosureBounds(t, float(alpha), float(beta), float(lm), float(lp))


def sym_eig(M):
    """Eigen-decomposition of symmetric 2x2 matrices.

    Returns ``(m1, m2, c, s)`` with ``m1 >= m2`` and ``(c, s)`` the unit
    eigenvector of ``m1``.  For equal eigenvalues the identity rotation is
    returned.
    """
    M = np.asarray(M, dtype=float)
    a = M[..., 0, 0]
    b = 0.5 * (M[..., 0, 1] + M[..., 1, 0])
    d = M[..., 1, 1]
    mean = 0.5 * (a + d)
    half = 0.5 * (a - d)
    rad = np.hypot(half, b)
    m1 = mean + rad
    m2 = mean - rad
    ang = 0.5 * np.arctan2(b, half)
    degenerate = rad <= 1e-14 * (np.abs(mean) + rad + 1e-300)
    ang = np.where(degenerate, 0.0, ang)
    return m1, m2, np.cos(ang), np.sin(ang)


def _constraint_gaps(l1, l2, theta, alpha, beta):
    """Signed violations of the three constraint families (<= 0 is feasible).

    The reciprocal-sum constraints are multiplied through by the positive
    denominators so that they stay bounded at theta in {0, 1}.
    """
    lm, lp = harmonic_arithmetic(theta, alpha, beta)
    box = np.maximum.reduce([lm - l1, lm - l2, l1 - lp, l2 - lp])
    # sum 1/(l_j - alpha) <= 1/(lm - alpha) + 1/(lp - alpha)
    a1, a2, am, aM = l1 - alpha, l2 - alpha, lm - alpha, lp - alpha
    g_alpha = am * aM * (a1 + a2) - (am + aM) * a1 * a2
    # sum 1/(beta - l_j) <= 1/(beta - lm) + 1/(beta - lp)
    b1, b2, bm, bM = beta - l1, beta - l2, beta - lp, beta - lm
    g_beta = bm * bM * (b1 + b2) - (bm + bM) * b1 * b2
    return box, g_alpha, g_beta


def eigenpair_feasible(l1, l2, theta, alpha, beta, tol=0.0):
    """Membership of eigenvalue pairs in R(theta) (vectorised)."""
    box, ga, gb = _constraint_gaps(np.asarray(l1, float), np.asarray(l2, float),
                                   np.asarray(theta, float), alpha, beta)
    scale = (beta - alpha) ** 3
    return (box <= tol) & (ga <= tol * scale) & (gb <= tol * scale)


def in_gclosure(theta, A, alpha, beta, tol=1e-8) -> bool:
    """True iff the symmetric matrix ``A`` belongs to K(theta) within ``tol``."""
    _check_phases(alpha, beta)
    A = np.asarray(A, dtype=float)
    if np.max(np.abs(A - np.swapaxes(A, -1, -2))) > tol:
        return False
    l1, l2, _, _ = sym_eig(A)
    return bool(np.all(eigenpair_feasible(l1, l2, theta, alpha, beta, tol)))


def _arc_terms(theta, alpha, beta):
    """Reciprocal sums S_alpha, S_beta and their theta-derivatives.

    S_alpha = (theta*c + 2 alpha) / (alpha c (1 - theta)),
    S_beta  = (alpha + beta + theta*c) / (beta c theta),   c = beta - alpha.
    Only the reciprocals are returned, they are finite on [0, 1].
    """
    c = beta - alpha
    inv_sa = alpha * c * (1.0 - theta) / (theta * c + 2.0 * alpha)
    inv_sb = beta * c * theta / (alpha + beta + theta * c)
    d_inv_sa = -alpha * c * (alpha + beta) / (theta * c + 2.0 * alpha) ** 2
    d_inv_sb = beta * c * (alpha + beta) / (alpha + beta + theta * c) ** 2
    return inv_sa, inv_sb, d_inv_sa, d_inv_sb


def _maximize_sorted(theta, m1, m2, alpha, beta):
    """Maximum of l1*m1 + l2*m2 over R(theta) for m1 >= m2 (vectorised).

    Returns ``(F, l1, l2, dF)`` where ``dF`` is the theta-derivative of F
    (envelope form, one-sided where the active piece switches).
    """
    theta, m1, m2 = np.broadcast_arrays(np.asarray(theta, float),
                                        np.asarray(m1, float), np.asarray(m2, float))
    c = beta - alpha
    lm, lp = harmonic_arithmetic(theta, alpha, beta)
    dlm = -alpha * beta * c / (alpha + theta * c) ** 2
    dlp = -c * np.ones_like(theta)

    # laminate corner: larger eigenvalue paired with larger m
    F = m1 * lp + m2 * lm
    l1 = lp.copy()
    l2 = lm.copy()
    dF = m1 * dlp + m2 * dlm

    inv_sa, inv_sb, d_inv_sa, d_inv_sb = _arc_terms(theta, alpha, beta)

    # beta-arc: both m >= 0, minimise m1 a1 + m2 a2 with a = beta - l
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = (m2 > 0.0)
        r = np.sqrt(np.where(pos, m1 / np.where(pos, m2, 1.0), 1.0))
        # arc stationary point stays inside the lens iff theta <= (beta/r - alpha)/c
        on_beta = pos & (theta * c <= beta / r - alpha)
        K = (np.sqrt(np.maximum(m1, 0.0)) + np.sqrt(np.maximum(m2, 0.0))) ** 2
        sq1 = np.sqrt(np.where(pos, m1, 1.0))
        sq2 = np.sqrt(np.where(pos, m2, 1.0))
        a1 = (sq1 + sq2) / sq1 * inv_sb
        a2 = (sq1 + sq2) / sq2 * inv_sb
        Fb = beta * (m1 + m2) - K * inv_sb
        dFb = -K * d_inv_sb

        # alpha-arc: both m <= 0, minimise |m1| a1 + |m2| a2 with a = l - alpha
        neg = (m1 < 0.0)
        n1 = np.where(neg, -m1, 1.0)
        n2 = np.where(neg, -m2, 1.0)
        rn = np.sqrt(n2 / n1)
        on_alpha = neg & (theta * c >= (rn - 1.0) * alpha)
        Kn = (np.sqrt(n1) + np.sqrt(n2)) ** 2
        b1 = (np.sqrt(n1) + np.sqrt(n2)) / np.sqrt(n1) * inv_sa
        b2 = (np.sqrt(n1) + np.sqrt(n2)) / np.sqrt(n2) * inv_sa
        Fa = alpha * (m1 + m2) - Kn * inv_sa
        dFa = -Kn * d_inv_sa

    F = np.where(on_beta, Fb, np.where(on_alpha, Fa, F))
    dF = np.where(on_beta, dFb, np.where(on_alpha, dFa, dF))
    l1 = np.where(on_beta, beta - a1, np.where(on_alpha, alpha + b1, l1))
    l2 = np.where(on_beta, beta - a2, np.where(on_alpha, alpha + b2, l2))

    # endpoint tensors are exactly beta*I and alpha*I
    end0 = theta == 0.0
    end1 = theta == 1.0
    F = np.where(end0, beta * (m1 + m2), np.where(end1, alpha * (m1 + m2), F))
    l1 = np.where(end0, beta, np.where(end1, alpha, l1))
    l2 = np.where(end0, beta, np.where(end1, alpha, l2))
    return F, l1, l2, dF


def maximize_F(theta, M, alpha, beta):
    """F(theta, M) = max over K(theta) of A:M, with the optimal eigenvalues.

    Scalar ``theta`` and a single 2x2 ``M`` give Python floats; arrays are
    processed elementwise.
    """
    _check_phases(alpha, beta)
    theta = _check_theta(theta)
    m1, m2, _, _ = sym_eig(M)
    F, l1, l2, _ = _maximize_sorted(theta, m1, m2, alpha, beta)
    if np.ndim(F) == 0:
        return float(F), (float(l1), float(l2))
    return F, (l1, l2)


def dF_dtheta(theta, M, alpha, beta):
    """theta-derivative of F(., M).

    Closed form on each smooth piece of the lens maximisation; at a switch
    between pieces the two one-sided slopes coincide because the maximiser
    moves continuously onto the corner.
    """
    _check_phases(alpha, beta)
    theta = _check_theta(theta)
    m1, m2, _, _ = sym_eig(M)
    _, _, _, dF = _maximize_sorted(theta, m1, m2, alpha, beta)
    return float(dF) if np.ndim(dF) == 0 else dF


def dF_dtheta_fd(theta, M, alpha, beta, step=1e-5):
    """Guarded central difference of ``maximize_F`` (one-sided at endpoints)."""
    theta = float(theta)
    hs = min(step, theta, 1.0 - theta)
    if hs <= 0.0:
        if theta == 0.0:
            return (maximize_F(step, M, alpha, beta)[0] - maximize_F(0.0, M, alpha, beta)[0]) / step
        return (maximize_F(1.0, M, alpha, beta)[0] - maximize_F(1.0 - step, M, alpha, beta)[0]) / step
    return (maximize_F(theta + hs, M, alpha, beta)[0]
            - maximize_F(theta - hs, M, alpha, beta)[0]) / (2.0 * hs)


def assemble_tensor(l1, l2, c, s):
    """R diag(l1, l2) R^T with R = [[c, -s], [s, c]] (vectorised)."""
    l1, l2, c, s = np.broadcast_arrays(l1, l2, c, s)
    A = np.empty(l1.shape + (2, 2))
    A[..., 0, 0] = l1 * c * c + l2 * s * s
    A[..., 1, 1] = l1 * s * s + l2 * c * c
    A[..., 0, 1] = A[..., 1, 0] = (l1 - l2) * c * s
    return A


def argmax_A(theta, M, alpha, beta):
    """A tensor in K(theta) attaining F(theta, M), sharing M's eigenvectors."""
    _check_phases(alpha, beta)
    theta = _check_theta(theta)
    m1, m2, c, s = sym_eig(M)
    _, l1, l2, _ = _maximize_sorted(theta, m1, m2, alpha, beta)
    return assemble_tensor(l1, l2, c, s)


def update_map(theta, l, g_gap, M, alpha, beta):
    """The pointwise optimality function l + g_gap - dF/dtheta(theta, M)."""
    m1, m2, _, _ = sym_eig(M)
    _, _, _, dF = _maximize_sorted(theta, m1, m2, alpha, beta)
    return l + g_gap - dF


def solve_theta_update(l, g_gap, M, alpha, beta, *, tie_value=None,
                       tol=1e-10, max_iter=60):
    """Zero in [0, 1] of theta -> l + g_gap - dF/dtheta(theta, M).

    Vectorised bisection.  Without a sign change the result is 0 where the
    map is positive throughout and 1 otherwise.  Where the map is flat
    (``M = 0`` and ``l + g_gap = 0`` within 1e-12) ``tie_value`` is used
    when given.
    """
    _check_phases(alpha, beta)
    m1, m2, _, _ = sym_eig(M)
    l = np.asarray(l, dtype=float)
    g_gap = np.asarray(g_gap, dtype=float)
    shift = np.broadcast_to(l + g_gap, m1.shape).astype(float)

    def q(t):
        return shift - _maximize_sorted(t, m1, m2, alpha, beta)[3]

    q0 = q(np.zeros_like(m1))
    q1 = q(np.ones_like(m1))
    theta = np.where(q0 > 0.0, 0.0, 1.0)
    theta = np.where((q0 > 0.0) & (q1 > 0.0), 0.0, theta)
    theta = np.where((q0 <= 0.0) & (q1 <= 0.0), 1.0, theta)
    change = ((q0 > 0.0) & (q1 < 0.0)) | ((q0 < 0.0) & (q1 > 0.0))
    if np.any(change):
        lo = np.zeros(int(change.sum()))
        hi = np.ones_like(lo)
        s_lo = np.sign(q0[change])
        sub_m1, sub_m2, sub_shift = m1[change], m2[change], shift[change]
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            qm = sub_shift - _maximize_sorted(mid, sub_m1, sub_m2, alpha, beta)[3]
            same = np.sign(qm) == s_lo
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
            if np.max(hi - lo) <= tol:
                break
        theta = theta.copy()
        theta[change] = 0.5 * (lo + hi)
    if tie_value is not None:
        flat = (np.abs(m1) + np.abs(m2) == 0.0) & (np.abs(shift) <= 1e-12)
        theta = np.where(flat, tie_value, theta)
    return float(theta) if np.ndim(theta) == 0 else theta


def sample_gclosure(theta, alpha, beta, n, rng):
    """Rejection samples of K(theta): feasible eigenpairs, random rotations."""
    lm, lp = harmonic_arithmetic(theta, alpha, beta)
    out = []
    while sum(len(o) for o in out) < n:
        pts = rng.uniform(lm, lp, size=(4 * n, 2))
        ok = eigenpair_feasible(pts[:, 0], pts[:, 1], theta, alpha, beta)
        out.append(pts[ok])
        if lp - lm < 1e-15:
            out.append(np.full((n, 2), lm))
    pts = np.concatenate(out)[:n]
    ang = rng.uniform(0.0, np.pi, size=n)
    return assemble_tensor(pts[:, 0], pts[:, 1], np.cos(ang), np.sin(ang))


def grid_oracle(theta, M, alpha, beta, n=400):
    """Brute-force max of A:M over an n x n eigenpair grid in M's eigenbasis
    and its swap; independent of the arc formulas."""
    lm, lp = harmonic_arithmetic(theta, alpha, beta)
    m1, m2, _, _ = sym_eig(M)
    g = np.linspace(lm, lp, n)
    L1, L2 = np.meshgrid(g, g, indexing="ij")
    ok = eigenpair_feasible(L1, L2, theta, alpha, beta, tol=1e-12)
    vals = np.where(ok, L1 * m1 + L2 * m2, -np.inf)
    return float(vals.max())
