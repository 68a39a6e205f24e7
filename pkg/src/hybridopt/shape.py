"""Shape sensitivity of the discrete Lagrangian and level-set transport.

The discrete Lagrangian on the active mesh is

    L(x) = sum_T |T|/3 sum_{v in T} [theta g_alpha + (1 - theta) g_beta](x_v, u_v)
           + l sum_T theta_T |T|,

with u solving the P1 system of ``hybridopt.fem``.  ``assemble_shape_derivative``
returns its exact derivative with respect to the vertex positions, obtained
from the volumetric shape-derivative integrals with deformation field
psi = lambda_v e, where lambda_v is a hat function.  Deformed triangles obey
d grad(lambda) = -grad(psi)^T grad(lambda) and d|T| = |T| div(psi).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fem import (LinearSystem, ProblemSpec, StateProblem, assemble_mass,
                  assemble_stiffness, compute_M, evaluate_objective, gradients,
                  isotropic, lumped_weights)
from .geometry import LevelSetField, TriMesh


class TangledMesh(RuntimeError):
    pass


@dataclass
class ShapeGradient:
    """Nodal covector G with G[v] . e = L'(Omega; lambda_v e)."""

    values: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def pair(self, psi: np.ndarray) -> float:
        return float(np.sum(self.values * psi))


def _vertex_scatter(mesh: TriMesh, per_corner: np.ndarray) -> np.ndarray:
    """Sum (t, 3, 2) corner vectors into (n, 2) vertex vectors."""
    out = np.zeros((mesh.n_vertices, 2))
    np.add.at(out, mesh.triangles.ravel(), per_corner.reshape(-1, 2))
    return out


def _nodal_cost(mesh: TriMesh, u: np.ndarray, spec: ProblemSpec):
    x = mesh.vertices
    U = np.atleast_2d(u).T
    return (spec.g_alpha.value(x, U), spec.g_beta.value(x, U),
            spec.g_alpha.dx(x, U), spec.g_beta.dx(x, U))


def constrained_vertices(mesh: TriMesh) -> np.ndarray:
    """Vertices that never move: Gamma0 and the outer boundary of D."""
    return mesh.boundary_vertices(["Gamma0", "OuterD"])


def assemble_shape_derivative(mesh: TriMesh, design, u: np.ndarray, p: np.ndarray,
                              spec: ProblemSpec, l: float) -> ShapeGradient:
    """Nodal gradient of the Lagrangian with respect to vertex positions."""
    theta = np.asarray(design.theta, dtype=float)
    A = np.asarray(design.A, dtype=float)
    area = mesh.areas
    G = mesh.grad_basis
    tri = mesh.triangles
    x = mesh.vertices

    # stiffness term: |T| [2 M A g - (A:M) g]
    M = compute_M(mesh, u, p)
    MA = np.einsum("tab,tbc->tac", M, A)
    AM = np.einsum("tab,tab->t", A, M)
    stiff = area[:, None, None] * (2.0 * np.einsum("tab,tjb->tja", MA, G) - AM[:, None, None] * G)

    # divergence term: (lumped integral of the density) * g
    ga, gb, dxa, dxb = _nodal_cost(mesh, u, spec)
    fp = sum(f(x) * p[i] for i, f in enumerate(spec.f))
    th3 = theta[:, None]
    dens = th3 * ga[tri] + (1.0 - th3) * gb[tri] + fp[tri]
    S = area / 3.0 * dens.sum(axis=1) + l * theta * area
    div = S[:, None, None] * G

    corner = stiff + div
    out = _vertex_scatter(mesh, corner)

    # pointwise terms at the quadrature vertices
    w_a = lumped_weights(mesh, theta)
    w_b = lumped_weights(mesh, 1.0 - theta)
    w = lumped_weights(mesh)
    pgf = sum(p[i][:, None] * gf(x) for i, gf in enumerate(spec.grad_f))
    out += w_a[:, None] * dxa + w_b[:, None] * dxb + w[:, None] * pgf

    out[constrained_vertices(mesh)] = 0.0
    return ShapeGradient(out)


def deformed_mesh(mesh: TriMesh, psi: np.ndarray, eps: float) -> TriMesh:
    verts = mesh.vertices + eps * np.asarray(psi, dtype=float)
    new = TriMesh(verts, mesh.triangles, mesh.boundary_edges, mesh.boundary_tags)
    if np.any(new.signed_areas <= 0.0):
        raise TangledMesh(f"{int(np.sum(new.signed_areas <= 0))} inverted triangles")
    return new


def evaluate_transported_objective(mesh: TriMesh, design, spec: ProblemSpec, l: float,
                                   psi: np.ndarray, eps: float) -> float:
    """J + l * mass on the mesh moved by eps * psi, theta and A riding along."""
    moved = deformed_mesh(mesh, psi, eps) if eps != 0.0 else mesh
    state = StateProblem(moved, spec)
    u = state.solve_state(design.A)
    J = evaluate_objective(moved, design.theta, u, spec)
    return J + l * float(np.sum(np.asarray(design.theta) * moved.areas))


def transported_state(mesh: TriMesh, design, spec: ProblemSpec, psi, eps) -> np.ndarray:
    """Nodal states on the deformed mesh, i.e. u(eps psi) composed with T."""
    moved = deformed_mesh(mesh, psi, eps) if eps != 0.0 else mesh
    return StateProblem(moved, spec).solve_state(design.A)


def velocity_gradient(mesh: TriMesh, psi: np.ndarray) -> np.ndarray:
    """Per-triangle Jacobian grad(psi)[a, b] = d psi_a / d x_b."""
    return np.einsum("tja,tjb->tab", np.asarray(psi)[mesh.triangles], mesh.grad_basis)


def material_derivative_solve(mesh: TriMesh, design, u: np.ndarray, spec: ProblemSpec,
                              psi: np.ndarray) -> np.ndarray:
    """Derivative of the nodal states along the vertex motion psi."""
    psi = np.asarray(psi, dtype=float)
    A = np.asarray(design.A, dtype=float)
    D = velocity_gradient(mesh, psi)
    div = np.trace(D, axis1=1, axis2=2)
    B = (np.einsum("tab,tbc->tac", D, A) + np.einsum("tab,tcb->tac", A, D)
         - div[:, None, None] * A)
    area = mesh.areas
    G = mesh.grad_basis
    tri = mesh.triangles
    x = mesh.vertices
    gu = gradients(mesh, u)
    rhs = np.zeros((mesh.n_vertices, spec.m))
    for i, (f, gf) in enumerate(zip(spec.f, spec.grad_f)):
        Bgu = np.einsum("tab,tb->ta", B, gu[i])
        local = area[:, None] * np.einsum("ta,tja->tj", Bgu, G)
        fv = f(x)
        local += area[:, None] / 3.0 * (np.sum(gf(x)[tri] * psi[tri], axis=2)
                                          + div[:, None] * fv[tri])
        np.add.at(rhs[:, i], tri.ravel(), local.ravel())
    state = StateProblem(mesh, spec)
    return state.system(A).solve(rhs).T


class RieszMap:
    """H1(D) Riesz map with homogeneous Dirichlet data on constrained vertices."""

    def __init__(self, mesh: TriMesh):
        self.mesh = mesh
        K = assemble_stiffness(mesh, isotropic(1.0, mesh.n_triangles)) + assemble_mass(mesh)
        self.system = LinearSystem(sp.csr_matrix(K), constrained_vertices(mesh))

    def __call__(self, G: np.ndarray) -> np.ndarray:
        """psi with (grad psi, grad phi) + (psi, phi) = -<G, phi>."""
        return self.system.solve(-np.asarray(G, dtype=float))


def descent_direction(mesh: TriMesh, shape_gradient, riesz: RieszMap | None = None) -> np.ndarray:
    """H1 representative of the negative shape gradient on the background mesh."""
    G = shape_gradient.values if isinstance(shape_gradient, ShapeGradient) else shape_gradient
    if not np.any(G):
        return np.zeros((mesh.n_vertices, 2))
    riesz = riesz or RieszMap(mesh)
    return riesz(G)


def volume_gradient(mesh: TriMesh) -> np.ndarray:
    """Nodal derivative of sum_T |T| with respect to vertex positions."""
    corner = mesh.areas[:, None, None] * mesh.grad_basis
    out = _vertex_scatter(mesh, corner)
    out[constrained_vertices(mesh)] = 0.0
    return out


def project_volume(psi: np.ndarray, G_vol: np.ndarray, riesz: RieszMap) -> np.ndarray:
    """H1-orthogonal projection of psi onto first-order volume-preserving fields."""
    if not np.any(G_vol):
        return psi
    psi_v = -riesz(G_vol)
    denom = float(np.sum(G_vol * psi_v))
    if denom <= 0.0:
        return psi
    return psi - float(np.sum(G_vol * psi)) / denom * psi_v


def advect_levelset(ls: LevelSetField, psi: np.ndarray, tau: float) -> LevelSetField:
    """Semi-Lagrangian step: phi_new(v) = phi(x_v - tau psi(v))."""
    psi = np.asarray(psi, dtype=float)
    if tau == 0.0 or not np.any(psi):
        return ls.with_phi(ls.phi)
    mesh = ls.mesh
    moving = np.flatnonzero(np.any(psi != 0.0, axis=1))
    feet = mesh.vertices[moving] - tau * psi[moving]
    tri, bary = mesh.locator.locate(feet)
    phi = ls.phi.copy()
    inside = tri >= 0
    idx = mesh.triangles[tri[inside]]
    phi[moving[inside]] = np.sum(ls.phi[idx] * bary[inside], axis=1)
    return ls.with_phi(phi)
