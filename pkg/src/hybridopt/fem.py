"""P1 finite elements for the multi-state diffusion system and its adjoint.

Stiffness matrices are exact for piecewise-constant conductivities; loads,
adjoint right-hand sides and cost integrals use vertex-lumped quadrature
(weight |T|/3 at each vertex of T).  The same rules are differentiated in
``hybridopt.shape`` so discrete sensitivities are exact derivatives of the
discrete functionals.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .geometry import TriMesh

Field = Callable[[np.ndarray], np.ndarray]


class FEMError(RuntimeError):
    pass


class SingularElement(FEMError):
    pass


class SolverDivergence(FEMError):
    pass


class NoDirichletBoundary(FEMError):
    pass


@dataclass(frozen=True)
class CostIntegrand:
    """g(x, u) with its partial derivatives.

    ``value(x, u)`` -> (n,), ``du(x, u)`` -> (n, m), ``dx(x, u)`` -> (n, 2),
    for points ``x`` of shape (n, 2) and states ``u`` of shape (n, m).
    """

    value: Callable[[np.ndarray, np.ndarray], np.ndarray]
    du: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dx: Callable[[np.ndarray, np.ndarray], np.ndarray]


def _never(x):
    return np.zeros(len(x), dtype=bool)


@dataclass(frozen=True)
class ProblemSpec:
    alpha: float
    beta: float
    V: float
    q_alpha: float
    f: Sequence[Field]
    grad_f: Sequence[Field]
    h: Sequence[Field]
    g_alpha: CostIntegrand
    g_beta: CostIntegrand
    Q1: Field
    Q2: Field = _never

    def __post_init__(self):
        if not (0.0 < self.alpha < self.beta):
            raise ValueError("need 0 < alpha < beta")
        if not (0.0 < self.q_alpha < self.V):
            raise ValueError("need 0 < q_alpha < V")
        if not (len(self.f) == len(self.grad_f) == len(self.h)):
            raise ValueError("f, grad_f and h must have one entry per state")

    @property
    def m(self) -> int:
        return len(self.f)


@dataclass
class StateSolution:
    mesh: TriMesh
    u: np.ndarray
    p: np.ndarray | None = None


def check_tensor_field(A: np.ndarray, alpha: float, beta: float, tol: float = 1e-9) -> None:
    A = np.asarray(A)
    if np.max(np.abs(A[:, 0, 1] - A[:, 1, 0]), initial=0.0) > tol:
        raise ValueError("tensor field is not symmetric")
    ev = np.linalg.eigvalsh(A)
    if ev.min() < alpha - tol or ev.max() > beta + tol:
        raise ValueError("tensor eigenvalues leave [alpha, beta]")


def isotropic(value: float, n: int) -> np.ndarray:
    return np.broadcast_to(value * np.eye(2), (n, 2, 2)).copy()


def assemble_stiffness(mesh: TriMesh, A: np.ndarray) -> sp.csr_matrix:
    """Global P1 stiffness sum_T |T| (A_T grad l_j) . grad l_i."""
    area = mesh.areas
    if np.any(area < 1e-14):
        raise SingularElement(f"triangle area below 1e-14 ({area.min():.3e})")
    G = mesh.grad_basis
    A = np.asarray(A, dtype=float)
    local = area[:, None, None] * np.einsum("tia,tab,tjb->tij", G, A, G)
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_mass(mesh: TriMesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix."""
    area = mesh.areas
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = area[:, None, None] * ref[None]
    rows = np.repeat(mesh.triangles, 3, axis=1).ravel()
    cols = np.tile(mesh.triangles, (1, 3)).ravel()
    n = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def lumped_weights(mesh: TriMesh, per_triangle: np.ndarray | None = None) -> np.ndarray:
    """Vertex weights sum_{T ni v} w_T |T| / 3."""
    w = mesh.areas / 3.0 if per_triangle is None else mesh.areas * per_triangle / 3.0
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.triangles, np.repeat(w[:, None], 3, axis=1))
    return out


class LinearSystem:
    """SPD matrix with symmetrically eliminated Dirichlet vertices."""

    def __init__(self, K: sp.csr_matrix, fixed: np.ndarray, rtol: float = 1e-10):
        n = K.shape[0]
        self.K = K
        self.n = n
        self.fixed = np.asarray(fixed, dtype=np.int64)
        mask = np.ones(n, dtype=bool)
        mask[self.fixed] = False
        self.free = np.flatnonzero(mask)
        self.rtol = rtol
        self.K_ff = K[self.free][:, self.free].tocsc()
        self.K_fc = K[self.free][:, self.fixed]

    @cached_property
    def _lu(self):
        if self.K_ff.shape[0] == 0:
            return None
        try:
            return splu(self.K_ff, permc_spec="MMD_AT_PLUS_A")
        except RuntimeError as exc:
            raise SolverDivergence(str(exc)) from exc

    def solve(self, rhs: np.ndarray, fixed_values: np.ndarray | None = None) -> np.ndarray:
        """Solve for one or several right-hand sides (columns of ``rhs``)."""
        rhs = np.asarray(rhs, dtype=float)
        single = rhs.ndim == 1
        R = rhs[:, None] if single else rhs
        X = np.zeros_like(R)
        if fixed_values is not None:
            Vc = np.asarray(fixed_values, dtype=float)
            Vc = Vc[:, None] if Vc.ndim == 1 else Vc
            X[self.fixed] = Vc
            b = R[self.free] - self.K_fc @ Vc
        else:
            b = R[self.free]
        if self._lu is not None:
            xf = self._lu.solve(np.ascontiguousarray(b))
            res = np.linalg.norm(self.K_ff @ xf - b, axis=0)
            scale = np.maximum(np.linalg.norm(b, axis=0), 1e-300)
            if np.any(res > self.rtol * scale) and np.any(np.linalg.norm(b, axis=0) > 0):
                raise SolverDivergence(f"relative residual {np.max(res / scale):.2e}")
            X[self.free] = xf
        return X[:, 0] if single else X


class StateProblem:
    """Discrete state/adjoint problems of one ProblemSpec on one mesh."""

    def __init__(self, mesh: TriMesh, spec: ProblemSpec):
        self.mesh = mesh
        self.spec = spec
        g0 = mesh.boundary_vertices(["Gamma0"])
        g1 = np.setdiff1d(mesh.boundary_vertices(["Gamma1"]), g0)
        if len(g0) + len(g1) == 0:
            raise NoDirichletBoundary("Gamma0 and Gamma1 are both empty")
        self.gamma0 = g0
        self.gamma1 = g1
        self.fixed = np.concatenate([g0, g1])
        x = mesh.vertices
        self.x = x
        self.fixed_values = np.zeros((len(self.fixed), spec.m))
        for i, hi in enumerate(spec.h):
            if len(g0):
                self.fixed_values[: len(g0), i] = hi(x[g0])
        self.lumped = lumped_weights(mesh)
        self.f_nodal = np.column_stack([fi(x) for fi in spec.f])

    def system(self, A: np.ndarray) -> LinearSystem:
        return LinearSystem(assemble_stiffness(self.mesh, A), self.fixed)

    def load(self) -> np.ndarray:
        return self.lumped[:, None] * self.f_nodal

    def solve_state(self, A: np.ndarray, system: LinearSystem | None = None) -> np.ndarray:
        system = system or self.system(A)
        return system.solve(self.load(), self.fixed_values).T

    def adjoint_rhs(self, theta: np.ndarray, u: np.ndarray) -> np.ndarray:
        w_a = lumped_weights(self.mesh, theta)
        w_b = lumped_weights(self.mesh, 1.0 - theta)
        U = np.asarray(u).T
        return (w_a[:, None] * self.spec.g_alpha.du(self.x, U)
                + w_b[:, None] * self.spec.g_beta.du(self.x, U))

    def solve_adjoint(self, A, theta, u, system: LinearSystem | None = None) -> np.ndarray:
        system = system or self.system(A)
        return system.solve(self.adjoint_rhs(theta, u)).T


def solve_state(mesh: TriMesh, A: np.ndarray, spec: ProblemSpec) -> np.ndarray:
    """Nodal states, shape (m, n_vertices)."""
    return StateProblem(mesh, spec).solve_state(A)


def solve_adjoint(mesh: TriMesh, A: np.ndarray, u: np.ndarray, spec: ProblemSpec,
                  theta: np.ndarray | None = None) -> np.ndarray:
    """Nodal adjoint states, shape (m, n_vertices); zero on Gamma0 and Gamma1.

    ``theta`` weights the two cost densities; it may be omitted when
    ``g_alpha`` and ``g_beta`` coincide (theta = 1 is used).
    """
    if theta is None:
        theta = np.ones(mesh.n_triangles)
    return StateProblem(mesh, spec).solve_adjoint(A, theta, u)


def gradients(mesh: TriMesh, w: np.ndarray) -> np.ndarray:
    """Per-triangle gradients of nodal fields: (m, n) -> (m, t, 2)."""
    w = np.atleast_2d(w)
    return np.einsum("mtj,tjb->mtb", w[:, mesh.triangles], mesh.grad_basis)


def compute_M(mesh: TriMesh, u: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Per-triangle Sym sum_i grad u_i (x) grad p_i, shape (t, 2, 2)."""
    gu = gradients(mesh, u)
    gp = gradients(mesh, p)
    outer = np.einsum("mta,mtb->tab", gu, gp)
    return 0.5 * (outer + np.swapaxes(outer, 1, 2))


def _vertex_cost(mesh: TriMesh, u: np.ndarray, spec: ProblemSpec):
    U = np.atleast_2d(u).T
    x = mesh.vertices
    return spec.g_alpha.value(x, U), spec.g_beta.value(x, U)


def evaluate_objective(mesh: TriMesh, theta: np.ndarray, u: np.ndarray, spec: ProblemSpec) -> float:
    """Lumped sum_T |T|/3 sum_{v in T} [theta g_alpha + (1 - theta) g_beta](x_v)."""
    ga, gb = _vertex_cost(mesh, u, spec)
    tri = mesh.triangles
    theta = np.asarray(theta, dtype=float)
    per_tri = mesh.areas / 3.0 * (theta * ga[tri].sum(axis=1) + (1.0 - theta) * gb[tri].sum(axis=1))
    return float(np.sum(per_tri))


def evaluate_design_variation(mesh: TriMesh, theta, A, u, p, delta_theta, delta_A,
                              spec: ProblemSpec) -> float:
    """Directional derivative of the objective in (theta, A)."""
    ga, gb = _vertex_cost(mesh, u, spec)
    tri = mesh.triangles
    gap = (ga - gb)[tri].sum(axis=1) / 3.0
    term1 = np.sum(mesh.areas * np.asarray(delta_theta) * gap)
    M = compute_M(mesh, u, p)
    term2 = np.sum(mesh.areas * np.einsum("tab,tab->t", np.asarray(delta_A), M))
    return float(term1 - term2)


def interpolate_centroids(mesh: TriMesh, w: np.ndarray) -> np.ndarray:
    """Centroid values of nodal fields: (m, n) -> (m, t)."""
    return np.atleast_2d(w)[:, mesh.triangles].mean(axis=2)
