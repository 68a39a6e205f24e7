"""Optimality-criteria updates of the local fraction and conductivity.

Each sweep solves the state and adjoint problems, forms M per triangle,
finds the multiplier l that meets the phase-quantity constraint and sets
(theta, A) pointwise from the optimality conditions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gclosure as gc
from .fem import ProblemSpec, StateProblem, compute_M, evaluate_objective
from .geometry import TriMesh


class MultiplierFailure(RuntimeError):
    pass


@dataclass
class DesignField:
    mesh: TriMesh
    theta: np.ndarray
    A: np.ndarray

    @classmethod
    def initial(cls, mesh: TriMesh, spec: ProblemSpec) -> "DesignField":
        """theta = 1 and A = alpha I on every triangle."""
        t = mesh.n_triangles
        return cls(mesh, np.ones(t), np.broadcast_to(spec.alpha * np.eye(2), (t, 2, 2)).copy())

    @property
    def theta_mass(self) -> float:
        return float(np.sum(self.theta * self.mesh.areas))

    def check(self, spec: ProblemSpec, tol: float = 1e-6) -> None:
        th = self.theta
        if th.shape != (self.mesh.n_triangles,) or np.any(th < 0.0) or np.any(th > 1.0):
            raise ValueError("theta must lie in [0, 1] on every triangle")
        bad = [i for i in range(len(th))
               if not gc.in_gclosure(th[i], self.A[i], spec.alpha, spec.beta, tol)]
        if bad:
            raise ValueError(f"{len(bad)} tensors outside K(theta), first at triangle {bad[0]}")


@dataclass
class MultiplierState:
    l: float
    bracket: tuple[float, float]
    history: list[tuple[float, float]] = field(default_factory=list)
    theta: np.ndarray | None = None

    @property
    def theta_mass(self) -> float:
        return self.history[-1][1] if self.history else float("nan")

    def monotone(self) -> bool:
        """theta_mass nonincreasing in l over the recorded evaluations."""
        if len(self.history) < 2:
            return True
        h = np.array(sorted(self.history))
        return bool(np.all(np.diff(h[:, 1]) <= 1e-12 * max(1.0, np.abs(h[:, 1]).max())))


def cost_gap(mesh: TriMesh, u: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Per-triangle lumped mean of g_alpha - g_beta."""
    U = np.atleast_2d(u).T
    x = mesh.vertices
    d = spec.g_alpha.value(x, U) - spec.g_beta.value(x, U)
    return d[mesh.triangles].mean(axis=1)


def update_theta_field(mesh: TriMesh, u, p, M, spec: ProblemSpec, l: float,
                       gap: np.ndarray | None = None) -> np.ndarray:
    """Pointwise zero of theta -> l + g_gap - dF/dtheta(theta, M_T)."""
    if gap is None:
        gap = cost_gap(mesh, u, spec)
    tie = spec.q_alpha / mesh.total_area
    return gc.solve_theta_update(l, gap, M, spec.alpha, spec.beta, tie_value=tie)


def multiplier_scale(gap: np.ndarray, M: np.ndarray, beta: float) -> float:
    norm = np.linalg.norm(M.reshape(len(M), -1), ord=2, axis=1) if len(M) else np.zeros(0)
    s = float(np.max(np.abs(gap), initial=0.0) + beta * np.max(norm, initial=0.0))
    return s if s > 0.0 else 1.0


def find_multiplier(mesh: TriMesh, u, p, M, spec: ProblemSpec, q_target: float,
                    rtol: float = 1e-3, max_iter: int = 200,
                    max_expand: int = 100) -> MultiplierState:
    """Bisection on l for sum_T theta_T(l) |T| = q_target."""
    area = mesh.total_area
    if not (0.0 < q_target < area):
        raise MultiplierFailure(f"q_target {q_target} outside (0, |Omega| = {area})")
    gap = cost_gap(mesh, u, spec)
    areas = mesh.areas
    history: list[tuple[float, float]] = []

    def mass(l):
        th = update_theta_field(mesh, u, p, M, spec, l, gap)
        m = float(np.sum(th * areas))
        history.append((float(l), m))
        return th, m

    tol = rtol * q_target
    a = 10.0 * spec.beta * multiplier_scale(gap, M, spec.beta)
    lo, hi = -a, a
    th_lo, m_lo = mass(lo)
    th_hi, m_hi = mass(hi)
    for _ in range(max_expand):
        if m_lo >= q_target - tol and m_hi <= q_target + tol:
            break
        if m_lo < q_target - tol:
            lo *= 2.0
            th_lo, m_lo = mass(lo)
        if m_hi > q_target + tol:
            hi *= 2.0
            th_hi, m_hi = mass(hi)
    else:
        raise MultiplierFailure("could not bracket the multiplier")
    for th, m, l in ((th_lo, m_lo, lo), (th_hi, m_hi, hi)):
        if abs(m - q_target) <= tol:
            return MultiplierState(l, (lo, hi), history, th)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        th, m = mass(mid)
        if abs(m - q_target) <= tol:
            return MultiplierState(mid, (lo, hi), history, th)
        if m > q_target:
            lo = mid
        else:
            hi = mid
    raise MultiplierFailure(f"no multiplier within tolerance after {max_iter} bisections")


@dataclass
class OCResult:
    design: DesignField
    l: float
    u: np.ndarray
    p: np.ndarray
    M: np.ndarray
    objective: float
    multipliers: list[MultiplierState]
    adjoint_residual: float = 0.0


def oc_sweeps(mesh: TriMesh, spec: ProblemSpec, design0: DesignField, k_H: int,
              state: StateProblem | None = None, rtol: float = 1e-3,
              check: bool = False) -> OCResult:
    """Run k_H sweeps and return the design with the last multiplier.

    The returned u, p, M belong to the design entering the last sweep.
    """
    if k_H < 1:
        raise ValueError("k_H must be at least 1")
    state = state or StateProblem(mesh, spec)
    design = design0
    mults = []
    worst = 0.0
    for _ in range(k_H):
        system = state.system(design.A)
        u = state.solve_state(design.A, system)
        p = state.solve_adjoint(design.A, design.theta, u, system)
        worst = max(worst, self_adjoint_defect(u, p))
        M = compute_M(mesh, u, p)
        ms = find_multiplier(mesh, u, p, M, spec, spec.q_alpha, rtol=rtol)
        theta = ms.theta
        A = gc.argmax_A(theta, M, spec.alpha, spec.beta)
        design = DesignField(mesh, theta, A)
        if check:
            design.check(spec)
        mults.append(ms)
    J = evaluate_objective(mesh, design.theta, u, spec)
    return OCResult(design, mults[-1].l, u, p, M, J, mults, worst)


def self_adjoint_defect(u: np.ndarray, p: np.ndarray) -> float:
    """max |p + u| / max |u| (zero for the compliance-type catalog costs)."""
    scale = float(np.max(np.abs(u), initial=0.0))
    return float(np.max(np.abs(p + u), initial=0.0)) / scale if scale > 0 else 0.0


def oc_inner_loop(mesh: TriMesh, spec: ProblemSpec, design0: DesignField, k_H: int,
                  **kwargs) -> DesignField:
    return oc_sweeps(mesh, spec, design0, k_H, **kwargs).design
