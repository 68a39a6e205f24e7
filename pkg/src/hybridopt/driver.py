"""Outer loop of the hybrid method: OC inside the domain, shape steps on its boundary."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import geometry as geo
from .catalog import Problem, get_problem, UnknownProblem
from .config import ConfigError, RunConfig
from .fem import StateProblem, compute_M, evaluate_objective
from .oc import DesignField, OCResult, oc_sweeps, self_adjoint_defect
from .radii import (boundary_rms, free_edge_rms, levelset_mean_radius,
                    material_interface_radii, radial_profile)
from .shape import (RieszMap, advect_levelset, assemble_shape_derivative,
                    descent_direction, project_volume, volume_gradient)
from .vtkio import write_vtk

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ("k", "J", "lagrangian", "volume", "theta_mass", "l", "tau",
                   "grad_norm", "rejected", "flag")

# multiplier tolerance inside the driver; tighter than the 1e-3 contract so
# that line-search comparisons are not dominated by constraint slack
DRIVER_MASS_RTOL = 1e-6


class RunAborted(RuntimeError):
    def __init__(self, k: int, exc: Exception):
        super().__init__(f"iteration {k}: {type(exc).__name__}: {exc}")
        self.k = k
        self.cause = exc


@dataclass
class Record:
    k: int
    J: float
    lagrangian: float
    volume: float
    theta_mass: float
    l: float
    tau: float
    grad_norm: float
    rejected: int
    flag: int = 0

    def row(self) -> list[str]:
        out = []
        for name in HISTORY_COLUMNS:
            v = getattr(self, name)
            out.append(str(v) if isinstance(v, (int, np.integer)) else "%.17g" % v)
        return out


@dataclass
class RunHistory:
    records: list[Record] = field(default_factory=list)

    def append(self, rec: Record) -> None:
        self.records.append(rec)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(HISTORY_COLUMNS)
            for r in self.records:
                w.writerow(r.row())

    def check(self, V: float, q_alpha: float, volume_tol: float) -> dict:
        vol = self.column("volume")
        mass = self.column("theta_mass")
        ks = self.column("k")
        return {
            "volume_ok": bool(np.all(np.abs(vol - V) <= volume_tol * V)),
            "theta_mass_ok": bool(np.all(np.abs(mass - q_alpha) <= 1e-3 * q_alpha)),
            "k_contiguous": bool(np.array_equal(ks, np.arange(len(ks)))),
            "max_volume_dev": float(np.max(np.abs(vol - V)) / V) if len(vol) else 0.0,
            "max_theta_mass_dev": float(np.max(np.abs(mass - q_alpha)) / q_alpha) if len(mass) else 0.0,
        }


@dataclass
class DomainState:
    """Everything known about one candidate domain."""

    ls: geo.LevelSetField
    sub: geo.Submesh
    oc: OCResult
    u: np.ndarray
    p: np.ndarray
    adjoint_defect: float

    @property
    def mesh(self) -> geo.TriMesh:
        return self.sub.mesh

    @property
    def volume(self) -> float:
        return self.mesh.total_area

    @property
    def lagrangian(self) -> float:
        return self.oc.objective + self.oc.l * self.oc.design.theta_mass


@dataclass
class RunResult:
    history: RunHistory
    design: DesignField
    levelset: geo.LevelSetField
    submesh: geo.Submesh
    summary: dict
    u: np.ndarray
    p: np.ndarray


def _evaluate_domain(problem: Problem, ls: geo.LevelSetField, k_H: int) -> DomainState:
    spec = problem.spec
    sub = geo.extract_submesh(ls, spec)
    mesh = sub.mesh
    state = StateProblem(mesh, spec)
    res = oc_sweeps(mesh, spec, DesignField.initial(mesh, spec), k_H, state=state,
                    rtol=DRIVER_MASS_RTOL)
    # state and adjoint for the design that leaves the OC loop
    design = res.design
    system = state.system(design.A)
    u = state.solve_state(design.A, system)
    p = state.solve_adjoint(design.A, design.theta, u, system)
    J = evaluate_objective(mesh, design.theta, u, spec)
    res = dataclasses.replace(res, u=u, p=p, M=compute_M(mesh, u, p), objective=J)
    defect = max(res.adjoint_residual, self_adjoint_defect(u, p))
    return DomainState(ls, sub, res, u, p, defect)


def _prepare_levelset(ls: geo.LevelSetField, V: float, reinit: bool) -> geo.LevelSetField:
    if V < ls.mesh.total_area:
        ls = geo.volume_correct(ls, V)
        if reinit:
            ls = geo.volume_correct(geo.reinitialize(ls), V)
    return ls


def _inject(sub: geo.Submesh, n: int, values: np.ndarray) -> np.ndarray:
    out = np.zeros((n,) + values.shape[1:])
    out[sub.vertex_map] = values
    return out


def dump_fields(path, bg: geo.TriMesh, st: DomainState, psi: np.ndarray | None,
                h_target: float, problem: str) -> None:
    sub = st.sub
    n, t = bg.n_vertices, bg.n_triangles
    pd = {}
    m = st.u.shape[0]
    for i in range(m):
        pd[f"u{i + 1}"] = _inject(sub, n, st.u[i])
    for i in range(m):
        pd[f"p{i + 1}"] = _inject(sub, n, st.p[i])
    pd["phi"] = st.ls.phi
    if psi is not None:
        pd["psi_x"] = psi[:, 0]
        pd["psi_y"] = psi[:, 1]
    d = st.oc.design
    cd = {"theta": np.zeros(t), "a11": np.zeros(t), "a12": np.zeros(t), "a22": np.zeros(t),
          "active": np.zeros(t)}
    tm = sub.triangle_map
    cd["theta"][tm] = d.theta
    cd["a11"][tm] = d.A[:, 0, 0]
    cd["a12"][tm] = d.A[:, 0, 1]
    cd["a22"][tm] = d.A[:, 1, 1]
    cd["active"][tm] = 1.0
    title = f"hybridopt problem={problem} h_target={h_target!r}"
    write_vtk(path, bg.vertices, bg.triangles, pd, cd, title)


def run_hybrid(config: RunConfig, write: bool = True) -> RunResult:
    try:
        problem = get_problem(config.problem)
    except UnknownProblem as exc:
        raise ConfigError(f"unknown problem {config.problem!r}") from exc
    spec = problem.spec
    out = Path(config.out_dir)
    if write:
        out.mkdir(parents=True, exist_ok=True)

    k = 0
    try:
        bg = geo.generate_background_mesh(problem.geometry, config.h_target)
        ls = _prepare_levelset(geo.init_levelset(bg, problem.omega0), spec.V, False)
        cur = _evaluate_domain(problem, ls, config.k_homog)
        history = RunHistory()
        riesz = RieszMap(bg) if config.k_shape > 0 else None
        tau = config.tau0
        cap_len = 2.0 * config.h_target
        worst_defect = cur.adjoint_defect
        psi = np.zeros((bg.n_vertices, 2))
        pending_reinit = False
        last_reinit = -1

        for k in range(config.k_shape):
            G = assemble_shape_derivative(cur.mesh, cur.oc.design, cur.u, cur.p, spec, cur.oc.l)
            G_bg = _inject(cur.sub, bg.n_vertices, G.values)
            psi = descent_direction(bg, G_bg, riesz)
            psi = project_volume(psi, _inject(cur.sub, bg.n_vertices, volume_gradient(cur.mesh)), riesz)
            L0 = cur.lagrangian
            vmax = float(np.max(np.linalg.norm(psi, axis=1), initial=0.0))
            tau_k = min(tau, cap_len / vmax) if vmax > 0 else tau
            if (k + 1) % config.reinit_every == 0:
                pending_reinit = True
            forced = pending_reinit and k - last_reinit > 4 * config.reinit_every
            use_reinit = pending_reinit
            rejected, flag = 0, 0
            while True:
                ls_t = _prepare_levelset(advect_levelset(cur.ls, psi, tau_k), spec.V, use_reinit)
                trial = _evaluate_domain(problem, ls_t, config.k_homog)
                worst_defect = max(worst_defect, trial.adjoint_defect)
                # both sides carry the current multiplier
                L_t = trial.oc.objective + cur.oc.l * trial.oc.design.theta_mass
                if L_t <= L0 + 1e-8 * abs(L0):
                    break
                if use_reinit and forced:
                    flag = 2
                    break
                if use_reinit:
                    # postpone redistancing rather than shrink the step for it
                    use_reinit = False
                    continue
                if rejected == 10:
                    flag = 1
                    break
                rejected += 1
                tau_k *= 0.5
            if use_reinit:
                pending_reinit = False
                last_reinit = k
            history.append(Record(k, cur.oc.objective, L0, cur.volume, cur.oc.design.theta_mass,
                                  cur.oc.l, tau_k, G.norm, rejected, flag))
            if write and config.dump_fields and k % config.dump_every == 0:
                dump_fields(out / f"fields_k{k:04d}.vtk", bg, cur, psi, config.h_target, problem.name)
            tau = tau_k * (2.0 if rejected == 0 else 1.0)
            cur = trial
            log.info("k=%d L=%.10g tau=%.3g rejected=%d", k, L0, tau_k, rejected)

        k = config.k_shape
        pre = cur
        if config.k_final_homog > 0:
            final = _evaluate_domain(problem, cur.ls, config.k_final_homog)
        else:
            final = cur
        worst_defect = max(worst_defect, final.adjoint_defect)
        history.append(Record(k, final.oc.objective, final.lagrangian, final.volume,
                              final.oc.design.theta_mass, final.oc.l, 0.0, 0.0, 0, 0))
    except (ConfigError, RunAborted):
        raise
    except Exception as exc:
        raise RunAborted(k, exc) from exc

    design = final.oc.design
    prof = radial_profile(final.mesh, design.theta, config.h_target)
    r_out = levelset_mean_radius(final.ls)
    th = design.theta
    a = final.mesh.areas
    classical = float(a[(th <= 0.01) | (th >= 0.99)].sum() / a.sum())
    summary = {
        "config": config.to_dict(),
        "n_background_triangles": int(bg.n_triangles),
        "n_active_triangles": int(final.mesh.n_triangles),
        "radii": sorted(prof.radii),
        "interface_radii": material_interface_radii(prof.radii, r_out, config.h_target),
        "outer_mean_radius": r_out,
        "not_radial": prof.not_radial,
        "outer_rms_levelset": boundary_rms(final.ls, 2.0),
        "outer_rms_staircase": free_edge_rms(final.mesh, 2.0),
        "classical_fraction": classical,
        "volume": final.volume,
        "theta_mass": design.theta_mass,
        "J_before_refinement": pre.oc.objective,
        "J_final": final.oc.objective,
        "lagrangian_before_refinement": pre.lagrangian,
        "lagrangian_final": final.lagrangian,
        "max_adjoint_defect": worst_defect,
        "line_search_flags": int(sum(r.flag for r in history.records)),
        "invariants": history.check(spec.V, spec.q_alpha, config.volume_tol),
    }
    if write:
        history.write_csv(out / "history.csv")
        if config.dump_fields:
            dump_fields(out / f"fields_k{config.k_shape:04d}.vtk", bg, final, None,
                        config.h_target, problem.name)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunResult(history, design, final.ls, final.sub, summary, final.u, final.p)
