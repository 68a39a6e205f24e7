"""Oracle and finite-difference verification suites (seeded, deterministic)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import gclosure as gc
from . import geometry as geo
from .catalog import annulus_spec, annulus_twostate, fourier_exact, square_fourier
from .fem import (CostIntegrand, ProblemSpec, StateProblem, assemble_mass,
                  assemble_stiffness, evaluate_design_variation, evaluate_objective,
                  isotropic)
from .oc import DesignField, find_multiplier, oc_sweeps, update_theta_field
from .shape import (RieszMap, assemble_shape_derivative, constrained_vertices,
                    descent_direction, evaluate_transported_objective,
                    material_derivative_solve, transported_state)

SEED = 42
SUITES = ("gclosure", "fem", "shape", "oc")


class UnknownSuite(ValueError):
    pass


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": float(self.value),
                "tolerance": float(self.tolerance), "detail": self.detail}


@dataclass
class Report:
    checks: dict[str, list[Check]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for cs in self.checks.values() for c in cs)

    def to_dict(self) -> dict:
        return {"seed": SEED, "passed": self.passed,
                "suites": {s: [c.to_dict() for c in cs] for s, cs in self.checks.items()}}


def _check_le(name, value, tol, detail="") -> Check:
    return Check(name, bool(value <= tol), float(value), float(tol), detail)


def _check_ge(name, value, tol, detail="") -> Check:
    return Check(name, bool(value >= tol), float(value), float(tol), detail)


# ---------------------------------------------------------------------------
# gclosure

FMap = Callable[[float, np.ndarray, float, float], float]


def _default_F(theta, M, alpha, beta) -> float:
    return gc.maximize_F(theta, M, alpha, beta)[0]


def random_cases(rng, n):
    thetas = rng.uniform(0.0, 1.0, n)
    Ms = rng.normal(size=(n, 2, 2))
    Ms = 0.5 * (Ms + np.swapaxes(Ms, 1, 2))
    return thetas, Ms


def suite_gclosure(F: FMap | None = None, n_cases: int = 200, n_samples: int = 1000,
                   grid_n: int = 400) -> list[Check]:
    F = F or _default_F
    rng = np.random.default_rng(SEED)
    alpha, beta = 1.0, 2.0
    thetas, Ms = random_cases(rng, n_cases)
    dom_viol = 0.0
    grid_gap = 0.0
    for th, M in zip(thetas, Ms):
        val = F(th, M, alpha, beta)
        A = gc.sample_gclosure(th, alpha, beta, n_samples, rng)
        best = float(np.max(np.einsum("kab,ab->k", A, M)))
        dom_viol = max(dom_viol, best - val)
        g = gc.grid_oracle(th, M, alpha, beta, grid_n)
        grid_gap = max(grid_gap, abs(val - g) / (1.0 + abs(val)))
    checks = [
        _check_le("oracle_dominance", dom_viol, 1e-9, "max over cases of sampled A:M - F"),
        _check_le("grid_oracle", grid_gap, 1e-3, "max |F - grid max| / (1 + |F|)"),
    ]
    rot = 0.0
    hom = 0.0
    for th, M in zip(thetas[:100], Ms[:100]):
        a = rng.uniform(0.0, 2.0 * np.pi)
        R = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        rot = max(rot, abs(F(th, R @ M @ R.T, alpha, beta) - F(th, M, alpha, beta)))
        c = rng.uniform(0.1, 10.0)
        hom = max(hom, abs(F(th, c * M, alpha, beta) - c * F(th, M, alpha, beta)))
    checks.append(_check_le("rotation_invariance", rot, 1e-10))
    checks.append(_check_le("positive_homogeneity", hom, 1e-10))
    a1 = abs(F(0.5, np.eye(2), alpha, beta) - 20.0 / 7.0)
    a2 = abs(F(0.5, -np.eye(2), alpha, beta) + 14.0 / 5.0)
    checks.append(_check_le("anchor_identity", a1, 1e-9, "F(0.5, I) = 20/7"))
    checks.append(_check_le("anchor_minus_identity", a2, 1e-9, "F(0.5, -I) = -14/5"))
    # derivative against central differences at interior points
    th_s = rng.uniform(0.05, 0.95, 100)
    _, M_s = random_cases(rng, 100)
    rel = 0.0
    for th, M in zip(th_s, M_s):
        d = gc.dF_dtheta(th, M, alpha, beta)
        fd = gc.dF_dtheta_fd(th, M, alpha, beta)
        rel = max(rel, abs(d - fd) / max(abs(fd), 1e-8 * (1.0 + np.abs(M).max())))
    checks.append(_check_le("dF_dtheta_vs_fd", rel, 1e-4, "max relative error, 100 points"))
    feas = 0
    match = 0.0
    for th, M in zip(thetas, Ms):
        A = gc.argmax_A(th, M, alpha, beta)
        feas += int(not gc.in_gclosure(th, A, alpha, beta, 1e-8))
        val = gc.maximize_F(th, M, alpha, beta)[0]
        match = max(match, abs(np.sum(A * M) - val) / (1.0 + abs(val)))
    checks.append(_check_le("argmax_feasible", feas, 0, "argmax tensors outside K(theta)"))
    checks.append(_check_le("argmax_attains_F", match, 1e-8))
    # monotone update map (either direction per M; see README)
    bad = 0
    grid = np.linspace(0.01, 0.99, 99)
    for M in Ms[:100]:
        d = np.diff(gc.dF_dtheta(grid, np.broadcast_to(M, (99, 2, 2)), alpha, beta))
        bad += int(not (np.all(d <= 1e-12) or np.all(d >= -1e-12)))
    checks.append(_check_le("update_map_monotone", bad, 0, "matrices with non-monotone dF/dtheta"))
    return checks


# ---------------------------------------------------------------------------
# fem

def fourier_errors(n: int | None, hs=(0.04, 0.02)) -> list[float]:
    errs = []
    for h in hs:
        P = square_fourier(n)
        bg = geo.generate_background_mesh(P.geometry, h)
        sub = geo.extract_submesh(geo.init_levelset(bg, P.omega0), P.spec).mesh
        u = StateProblem(sub, P.spec).solve_state(isotropic(1.0, sub.n_triangles))[0]
        ex = fourier_exact(sub.vertices, n)
        Mm = assemble_mass(sub)
        e = u - ex
        errs.append(math.sqrt(float(e @ Mm @ e) / float(ex @ Mm @ ex)))
    return errs


def fem_test_spec() -> ProblemSpec:
    """Annulus data with distinct cost densities, for design-variation checks."""
    base = annulus_spec()
    ga = base.g_alpha

    def value_b(x, u):
        return ga.value(x, u) + 0.5 * np.sum(u * u, axis=1)

    def du_b(x, u):
        return ga.du(x, u) + u

    g_beta = CostIntegrand(value_b, du_b, ga.dx)
    return ProblemSpec(base.alpha, base.beta, base.V, base.q_alpha, base.f, base.grad_f,
                       base.h, base.g_alpha, g_beta, base.Q1, base.Q2)


def coarse_annulus(h: float = 0.3):
    P = annulus_twostate()
    bg = geo.generate_background_mesh(P.geometry, h)
    return geo.extract_submesh(geo.init_levelset(bg, geo.Disk((0.0, 0.0), 2.0)), P.spec).mesh


def random_design(mesh, rng, alpha=1.0, beta=2.0) -> DesignField:
    t = mesh.n_triangles
    theta = rng.uniform(0.05, 0.95, t)
    A = np.empty((t, 2, 2))
    for i in range(t):
        A[i] = gc.sample_gclosure(theta[i], alpha, beta, 1, rng)[0]
    return DesignField(mesh, theta, A)


def design_variation_errors(eps_list=(1e-2, 1e-3, 1e-4), seed: int = SEED):
    rng = np.random.default_rng(seed)
    spec = fem_test_spec()
    mesh = coarse_annulus()
    d = random_design(mesh, rng)
    st = StateProblem(mesh, spec)
    u = st.solve_state(d.A)
    p = st.solve_adjoint(d.A, d.theta, u)
    c = mesh.centroids
    dth = np.sin(c[:, 0]) * np.cos(c[:, 1])
    S = np.stack([np.cos(c[:, 0]), 0.5 * np.sin(c[:, 1]), np.cos(c[:, 0] + c[:, 1])], axis=1)
    dA = np.empty((len(c), 2, 2))
    dA[:, 0, 0], dA[:, 0, 1], dA[:, 1, 0], dA[:, 1, 1] = S[:, 0], S[:, 1], S[:, 1], S[:, 2]
    J0 = evaluate_objective(mesh, d.theta, u, spec)
    dJ = evaluate_design_variation(mesh, d.theta, d.A, u, p, dth, dA, spec)
    one_sided, central = [], []
    for eps in eps_list:
        Jp = evaluate_objective(mesh, d.theta + eps * dth, st.solve_state(d.A + eps * dA), spec)
        Jm = evaluate_objective(mesh, d.theta - eps * dth, st.solve_state(d.A - eps * dA), spec)
        one_sided.append(abs((Jp - J0) / eps - dJ))
        central.append(abs((Jp - Jm) / (2.0 * eps) - dJ))
    return dJ, one_sided, central, mesh.n_triangles


def suite_fem() -> list[Check]:
    checks = []
    for n, label in ((None, "cosh_square"), (4, "sinh_strip")):
        e = fourier_errors(n)
        checks.append(_check_le(f"{label}_l2_error_h0.02", e[-1], 1e-3))
        checks.append(_check_ge(f"{label}_halving_factor", e[0] / e[1], 3.5))
    # self-adjoint identity for the compliance-type cost
    P = annulus_twostate()
    bg = geo.generate_background_mesh(P.geometry, 0.1)
    mesh = geo.extract_submesh(geo.init_levelset(bg, P.omega0), P.spec).mesh
    rng = np.random.default_rng(SEED)
    d = random_design(mesh, rng)
    st = StateProblem(mesh, P.spec)
    u = st.solve_state(d.A)
    p = st.solve_adjoint(d.A, d.theta, u)
    checks.append(_check_le("self_adjoint", float(np.max(np.abs(p + u)) / np.max(np.abs(u))), 1e-9))
    dJ, one_sided, central, _ = design_variation_errors()
    order = min(math.log10(central[i] / central[i + 1]) for i in range(len(central) - 1))
    checks.append(_check_ge("design_variation_fd_order", order, 1.0,
                            "central differences, eps = 1e-2, 1e-3, 1e-4"))
    # one-sided quotient: error / eps must stay constant (first order)
    c = np.array(one_sided) / np.array([1e-2, 1e-3, 1e-4])
    checks.append(_check_le("design_variation_one_sided_constant", float(c.max() / c.min()), 1.1,
                            f"errors {one_sided[0]:.2e}, {one_sided[1]:.2e}, {one_sided[2]:.2e}"))
    return checks


# ---------------------------------------------------------------------------
# shape

def shape_setup(h: float = 0.05, outer: float = 1.9):
    """Annulus data on 1 < r < ``outer`` with a one-sweep OC design."""
    P = annulus_twostate()
    spec = P.spec
    bg = geo.generate_background_mesh(P.geometry, h)
    sub = geo.extract_submesh(geo.init_levelset(bg, geo.Disk((0.0, 0.0), outer)), spec)
    mesh = sub.mesh
    res = oc_sweeps(mesh, spec, DesignField.initial(mesh, spec), 1)
    st = StateProblem(mesh, spec)
    u = st.solve_state(res.design.A)
    p = st.solve_adjoint(res.design.A, res.design.theta, u)
    return bg, sub, spec, res.design, res.l, u, p


def smooth_fields(mesh, rng, n: int, scale: float = 0.3):
    """Random polynomial fields vanishing on the unit circle and on fixed vertices."""
    x = mesh.vertices
    r = np.hypot(x[:, 0], x[:, 1])
    basis = np.stack([np.ones_like(r), x[:, 0], x[:, 1], x[:, 0] ** 2,
                      x[:, 0] * x[:, 1], x[:, 1] ** 2], axis=1)
    fixed = constrained_vertices(mesh)
    out = []
    for _ in range(n):
        c = rng.normal(size=(2, basis.shape[1]))
        psi = scale * (r - 1.0)[:, None] * (basis @ c.T)
        psi[fixed] = 0.0
        out.append(psi)
    return out


def suite_shape() -> list[Check]:
    bg, sub, spec, design, l, u, p = shape_setup()
    mesh = sub.mesh
    rng = np.random.default_rng(SEED)
    G = assemble_shape_derivative(mesh, design, u, p, spec, l)
    L0 = evaluate_transported_objective(mesh, design, spec, l, np.zeros((mesh.n_vertices, 2)), 0.0)
    worst = 0.0
    decreasing = True
    taylor = np.inf
    K = assemble_stiffness(mesh, isotropic(1.0, mesh.n_triangles))
    for psi in smooth_fields(mesh, rng, 5):
        dL = G.pair(psi)
        errs = []
        for eps in (1e-3, 5e-4):
            Le = evaluate_transported_objective(mesh, design, spec, l, psi, eps)
            errs.append(abs((Le - L0) / eps - dL) / abs(dL))
        worst = max(worst, errs[0])
        decreasing &= errs[1] < errs[0]
        ud = material_derivative_solve(mesh, design, u, spec, psi)
        rem = []
        for eps in (1e-2, 5e-3, 2.5e-3):
            e = transported_state(mesh, design, spec, psi, eps) - u - eps * ud
            rem.append(math.sqrt(sum(float(ei @ K @ ei) for ei in e)))
        taylor = min(taylor, math.log2(rem[0] / rem[1]), math.log2(rem[1] / rem[2]))
    checks = [
        _check_le("shape_derivative_fd", worst, 0.02, "max relative error at eps=1e-3"),
        Check("shape_derivative_fd_decreasing", bool(decreasing), float(decreasing), 1.0),
        _check_ge("material_derivative_order", taylor, 1.8),
    ]
    riesz = RieszMap(bg)
    worst_pair = -np.inf
    for _ in range(3):
        Gr = _inject_gradient(sub, bg.n_vertices, G.values * rng.uniform(0.5, 2.0))
        psi = descent_direction(bg, Gr, riesz)
        worst_pair = max(worst_pair, float(np.sum(Gr * psi)))
    checks.append(_check_le("descent_pairing", worst_pair, -1e-14, "max <G, psi> (must be < 0)"))
    return checks


def _inject_gradient(sub, n, values):
    out = np.zeros((n, 2))
    out[sub.vertex_map] = values
    return out


# ---------------------------------------------------------------------------
# oc

def suite_oc() -> list[Check]:
    P = annulus_twostate()
    spec = P.spec
    bg = geo.generate_background_mesh(P.geometry, 0.1)
    ls = geo.volume_correct(geo.init_levelset(bg, P.omega0), spec.V)
    mesh = geo.extract_submesh(ls, spec).mesh
    d0 = DesignField.initial(mesh, spec)
    res = oc_sweeps(mesh, spec, d0, 1)
    checks = [_check_le("mass_constraint", abs(res.design.theta_mass - spec.q_alpha) / spec.q_alpha, 1e-3)]
    checks.append(Check("theta_not_constant", bool(np.ptp(res.design.theta) > 0.0),
                        float(np.ptp(res.design.theta)), 0.0))
    bad = sum(not gc.in_gclosure(t, A, spec.alpha, spec.beta, 1e-6)
              for t, A in zip(res.design.theta, res.design.A))
    checks.append(_check_le("design_feasible", bad, 0))
    ms = res.multipliers[-1]
    checks.append(Check("multiplier_monotone", ms.monotone(), float(ms.monotone()), 1.0))
    # optimality-condition audit: sign of q against theta
    th = update_theta_field(mesh, res.u, res.p, res.M, spec, res.l)
    q = res.l - gc.dF_dtheta(th, res.M, spec.alpha, spec.beta)
    viol = np.sum((q > 1e-8) & (th > 1e-9)) + np.sum((q < -1e-8) & (th < 1 - 1e-9))
    checks.append(_check_le("optimality_sign_audit", float(viol), 0.0))
    # flat map: zero sources give M = 0 and the tie rule
    flat = ProblemSpec(spec.alpha, spec.beta, spec.V, spec.q_alpha,
                       (lambda x: np.zeros(len(x)),) * 2, spec.grad_f, spec.h,
                       spec.g_alpha, spec.g_alpha, spec.Q1, spec.Q2)
    res0 = oc_sweeps(mesh, flat, DesignField.initial(mesh, flat), 1)
    checks.append(_check_le("flat_map_mass", abs(res0.design.theta_mass - spec.q_alpha) / spec.q_alpha, 1e-3))
    return checks


_RUNNERS = {"gclosure": suite_gclosure, "fem": suite_fem, "shape": suite_shape, "oc": suite_oc}


def verify(suite: str, F: FMap | None = None) -> Report:
    """Run one suite (or ``all``); ``F`` replaces the F map in the gclosure suite."""
    if suite == "all":
        names = list(SUITES)
    elif suite in _RUNNERS:
        names = [suite]
    else:
        raise UnknownSuite(suite)
    rep = Report()
    for name in names:
        rep.checks[name] = suite_gclosure(F) if name == "gclosure" else _RUNNERS[name]()
    return rep
