import numpy as np
import pytest

from hybridopt import geometry as geo
from hybridopt.radii import (boundary_rms, free_edge_rms, levelset_mean_radius,
                             material_interface_radii, measure_interface_radii, radial_profile)
from hybridopt.vtkio import VTKFormatError, read_vtk, write_vtk


def test_two_interfaces(annulus):
    P = annulus[0]
    bg = geo.generate_background_mesh(P.geometry, 0.05)
    mesh = geo.extract_submesh(geo.init_levelset(bg, geo.Disk((0.0, 0.0), 2.0)), P.spec).mesh
    r = np.hypot(*mesh.centroids.T)
    th = np.where((r > 1.2) & (r < 1.7), 0.0, 1.0)
    radii = measure_interface_radii(mesh, th, 0.05)
    assert len(radii) == 2
    assert radii[0] == pytest.approx(1.2, abs=0.05)
    assert radii[1] == pytest.approx(1.7, abs=0.05)
    assert not radial_profile(mesh, th, 0.05).not_radial


def test_constant_half_has_no_crossing(annulus):
    P, bg, ls, sub = annulus
    assert measure_interface_radii(sub.mesh, np.full(sub.mesh.n_triangles, 0.5), 0.2) == []


def test_not_radial(annulus, rng):
    P, bg, ls, sub = annulus
    mesh = sub.mesh
    th = (mesh.centroids[:, 0] > 0).astype(float)
    assert radial_profile(mesh, th, 0.2).not_radial


def test_material_filter():
    assert material_interface_radii([1.19, 1.70, 1.99], 2.0, 0.1) == [1.19, 1.70]


def test_boundary_rms(annulus):
    P, bg, ls, sub = annulus
    assert boundary_rms(ls, 2.0) < 0.02
    assert levelset_mean_radius(ls) == pytest.approx(2.0, abs=0.02)
    assert free_edge_rms(sub.mesh, 2.0) < 0.2
    assert np.isnan(boundary_rms(ls.with_phi(np.ones(bg.n_vertices)), 2.0))


def test_vtk_round_trip(tmp_path, rng):
    v = rng.uniform(size=(5, 2))
    t = np.array([[0, 1, 2], [1, 3, 2], [2, 3, 4]])
    pd = {"u1": rng.normal(size=5), "phi": rng.normal(size=5)}
    cd = {"theta": rng.uniform(size=3)}
    path = tmp_path / "a.vtk"
    write_vtk(path, v, t, pd, cd, "hybridopt h_target=0.1")
    title, v2, t2, pd2, cd2 = read_vtk(path)
    assert title == "hybridopt h_target=0.1"
    assert np.array_equal(v, v2) and np.array_equal(t, t2)
    for k in pd:
        assert np.array_equal(pd[k], pd2[k])
    assert np.array_equal(cd["theta"], cd2["theta"])


def test_vtk_rejects_wrong_sizes(tmp_path):
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "b.vtk", np.zeros((3, 2)), np.array([[0, 1, 2]]), {"u": np.zeros(2)})


def test_vtk_rejects_garbage(tmp_path):
    p = tmp_path / "c.vtk"
    p.write_text("hello\n")
    with pytest.raises(VTKFormatError):
        read_vtk(p)
    p.write_text("# vtk DataFile Version 3.0\nx\nBINARY\nDATASET UNSTRUCTURED_GRID\n")
    with pytest.raises(VTKFormatError):
        read_vtk(p)
