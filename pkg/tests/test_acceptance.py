"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary (see conftest.py) and by running this file directly.
Criteria 1 and 2 are long benchmark runs (a few minutes each).
"""
import math
import subprocess
import sys

import numpy as np
import pytest

from hybridopt import geometry as geo
from hybridopt.catalog import annulus_fixed
from hybridopt.config import RunConfig, format_config
from hybridopt.driver import run_hybrid
from hybridopt.oc import DesignField, oc_sweeps
from hybridopt.radii import measure_interface_radii
from hybridopt.verify import verify

RADII = (1.1928, 1.7096)
RADIUS_TOL = 0.05
V = 3.0 * math.pi
Q = 1.5 * math.pi

# criterion 2 needs a fine mesh: the mixed band at each interface is a few
# triangles wide, so the classical area fraction grows like 1 - O(h)
FIXED_ANNULUS_H = 0.01

RESULTS: dict[int, str] = {}


def record(n: int, ok: bool, detail: str) -> None:
    RESULTS[n] = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(RESULTS[n])
    assert ok, RESULTS[n]


def _radii_ok(found) -> bool:
    return len(found) == 2 and all(abs(a - b) <= RADIUS_TOL for a, b in zip(found, RADII))


@pytest.fixture(scope="module")
def benchmark(tmp_path_factory):
    out = tmp_path_factory.mktemp("annulus")
    cfg = RunConfig(problem="annulus_twostate", h_target=0.1, k_shape=400, k_homog=1,
                    k_final_homog=30, out_dir=str(out), dump_fields=False)
    return run_hybrid(cfg)


@pytest.mark.slow
def test_criterion_1_annulus_benchmark(benchmark):
    s = benchmark.summary
    h = benchmark.history
    radii = s["interface_radii"]
    vol = h.column("volume")
    mass = h.column("theta_mass")
    vol_dev = float(np.max(np.abs(vol - V)) / V)
    mass_dev = float(np.max(np.abs(mass - Q)) / Q)
    rms = s["outer_rms_levelset"]
    ok = _radii_ok(radii) and rms <= 0.05 and vol_dev <= 0.01 and mass_dev <= 0.005
    record(1, ok, f"radii {', '.join('%.4f' % r for r in radii)}; outer rms {rms:.4f}; "
                  f"max volume dev {vol_dev:.2e}; max theta-mass dev {mass_dev:.2e}; "
                  f"{s['n_active_triangles']} active of {s['n_background_triangles']} triangles")


@pytest.mark.slow
def test_objective_trace(benchmark):
    """Lagrangian at fixed multiplier nonincreasing over accepted unflagged steps."""
    h = benchmark.history
    s = benchmark.summary
    J, l, m, flag = (h.column(c) for c in ("J", "l", "theta_mass", "flag"))
    n = len(J) - 1  # the last row is the refined design
    bad = 0
    for k in range(n - 1):
        L0 = J[k] + l[k] * m[k]
        L1 = J[k + 1] + l[k] * m[k + 1]
        if flag[k] == 0 and L1 > L0 + 1e-8 * abs(L0):
            bad += 1
    strict = s["J_final"] < s["J_before_refinement"]
    print(f"objective trace: {bad} increases at unflagged steps, "
          f"{int(np.sum(flag[:n] > 0))} flagged steps, "
          f"J {s['J_before_refinement']:.6f} -> {s['J_final']:.6f} after refinement")
    assert bad == 0 and strict


@pytest.mark.slow
def test_criterion_2_fixed_annulus():
    P = annulus_fixed()
    bg = geo.generate_background_mesh(P.geometry, FIXED_ANNULUS_H)
    mesh = geo.extract_submesh(geo.init_levelset(bg, P.omega0), P.spec).mesh
    res = oc_sweeps(mesh, P.spec, DesignField.initial(mesh, P.spec), 30)
    th = res.design.theta
    a = mesh.areas
    frac = float(a[(th <= 0.01) | (th >= 0.99)].sum() / a.sum())
    radii = measure_interface_radii(mesh, th, FIXED_ANNULUS_H)
    ok = frac >= 0.95 and _radii_ok(radii)
    record(2, ok, f"classical fraction {frac:.4f} at h={FIXED_ANNULUS_H}; "
                  f"radii {', '.join('%.4f' % r for r in radii)}")


@pytest.fixture(scope="module")
def fem_checks():
    return {c.name: c for c in verify("fem").checks["fem"]}


@pytest.fixture(scope="module")
def gclosure_checks():
    return {c.name: c for c in verify("gclosure").checks["gclosure"]}


@pytest.fixture(scope="module")
def shape_checks():
    return {c.name: c for c in verify("shape").checks["shape"]}


def test_criterion_3_fem_exactness(fem_checks):
    names = ["cosh_square_l2_error_h0.02", "cosh_square_halving_factor",
             "sinh_strip_l2_error_h0.02", "sinh_strip_halving_factor"]
    c = [fem_checks[n] for n in names]
    record(3, all(x.passed for x in c),
           f"square err {c[0].value:.2e} factor {c[1].value:.2f}; "
           f"strip err {c[2].value:.2e} factor {c[3].value:.2f}")


def test_criterion_4_gclosure_oracles(gclosure_checks):
    names = ["oracle_dominance", "grid_oracle", "anchor_identity", "anchor_minus_identity"]
    c = [gclosure_checks[n] for n in names]
    record(4, all(x.passed for x in c),
           f"dominance violation {c[0].value:.2e}; grid gap {c[1].value:.2e}; "
           f"anchors {c[2].value:.1e}, {c[3].value:.1e}")


def test_criterion_5_derivatives(gclosure_checks, fem_checks, shape_checks):
    a = gclosure_checks["dF_dtheta_vs_fd"]
    b = fem_checks["design_variation_fd_order"]
    b1 = fem_checks["design_variation_one_sided_constant"]
    c = shape_checks["shape_derivative_fd"]
    c1 = shape_checks["shape_derivative_fd_decreasing"]
    d = shape_checks["material_derivative_order"]
    ok = all(x.passed for x in (a, b, b1, c, c1, d))
    record(5, ok, f"(a) dF rel err {a.value:.2e}; (b) FD order {b.value:.2f}, "
                  f"one-sided ratio {b1.value:.3f}; (c) shape rel err {c.value:.2e}, "
                  f"decreasing {bool(c1.value)}; (d) Taylor order {d.value:.2f}")


@pytest.mark.slow
def test_criterion_6_self_adjoint(benchmark, fem_checks):
    worst = max(benchmark.summary["max_adjoint_defect"], fem_checks["self_adjoint"].value)
    record(6, worst <= 1e-9, f"max |p + u| / max |u| = {worst:.2e} over all pipeline solves")


def test_criterion_7_determinism(tmp_path):
    cfg = RunConfig(h_target=0.15, k_shape=20, k_final_homog=5, dump_fields=False)
    blobs = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        path = tmp_path / f"run{i}.cfg"
        path.write_text(format_config(cfg.replace(out_dir=str(out))))
        subprocess.run([sys.executable, "-m", "hybridopt", "run", str(path)], check=True,
                       capture_output=True)
        blobs.append((out / "history.csv").read_bytes())
    rows = blobs[0].count(b"\n")
    record(7, blobs[0] == blobs[1], f"two runs, {rows} history lines, byte-identical: "
                                    f"{blobs[0] == blobs[1]}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
