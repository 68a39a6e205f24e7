import math

import numpy as np
import pytest

from hybridopt import geometry as geo
from hybridopt.catalog import annulus_twostate, square_fourier


def test_sdf_signs_and_combinators():
    d = geo.Disk((0.0, 0.0), 1.0)
    b = geo.Box(-1.0, 1.0, -1.0, 1.0)
    pts = np.array([[0.0, 0.0], [2.0, 0.0], [0.9, 0.9]])
    assert np.allclose(d(pts), [-1.0, 1.0, math.hypot(0.9, 0.9) - 1.0])
    assert b(pts)[0] < 0 < b(pts)[1]
    assert (b - d)(pts)[2] < 0.0
    assert (b - d)(pts)[0] > 0.0
    assert (b & d)(pts)[2] > 0.0
    assert (b | d)(pts)[2] < 0.0
    assert geo.eval_sdf(d, (0.5, 0.0)) == pytest.approx(-0.5)


@pytest.mark.parametrize("h", [0.3, 0.2, 0.1])
def test_background_mesh_valid(h):
    g = annulus_twostate().geometry
    mesh = geo.generate_background_mesh(g, h)
    mesh.check()
    assert np.all(mesh.signed_areas > 0.0)
    assert mesh.total_area == pytest.approx(g.area(h), rel=1e-12)
    assert mesh.edge_lengths().max() < 1.5 * h
    assert set(np.unique(mesh.boundary_tags)) == {"Gamma0", "OuterD"}
    # the hole polygon carries the Dirichlet tag
    e = mesh.boundary_edges[mesh.boundary_tags == "Gamma0"]
    r = np.hypot(*mesh.vertices[e.ravel()].T)
    assert np.allclose(r, 1.0)


def test_background_mesh_rejects_bad_h():
    g = annulus_twostate().geometry
    with pytest.raises(ValueError):
        geo.generate_background_mesh(g, 0.0)
    with pytest.raises(ValueError):
        geo.generate_background_mesh(g, 0.8)


def test_structured_rectangle_tags():
    P = square_fourier()
    mesh = geo.generate_background_mesh(P.geometry, 0.25)
    assert mesh.total_area == pytest.approx(1.0)
    top = mesh.boundary_edges[mesh.boundary_tags == "Gamma0"]
    assert np.allclose(mesh.vertices[top.ravel(), 1], 1.0)


def test_submesh_and_tags(annulus):
    P, bg, ls, sub = annulus
    m = sub.mesh
    m.check()
    assert np.all(ls.centroid_values[sub.triangle_map] < 0.0)
    assert np.allclose(m.vertices, bg.vertices[sub.vertex_map])
    assert set(np.unique(m.boundary_tags)) == {"Gamma0", "Gamma1"}
    assert m.total_area == pytest.approx(3 * math.pi, rel=0.05)


def test_submesh_errors(annulus):
    P, bg, ls, sub = annulus
    with pytest.raises(geo.EmptyDomain):
        geo.extract_submesh(ls.with_phi(np.ones(bg.n_vertices)), P.spec)
    # a domain that no longer touches the hole
    far = geo.init_levelset(bg, geo.Disk((2.0, 2.0), 0.4))
    with pytest.raises(geo.DetachedGamma0):
        geo.extract_submesh(far, P.spec)


def test_volume_correct_hits_target(annulus):
    P, bg, ls, sub = annulus
    V = 3.0 * math.pi
    out = geo.volume_correct(geo.init_levelset(bg, geo.Disk((0.0, 0.0), 2.3)), V)
    assert abs(geo.measure_region(out) - V) <= 1e-3 * V
    with pytest.raises(geo.NoBracket):
        geo.volume_correct(ls, 1e3)


def test_volume_correct_is_noop_when_within(annulus):
    P, bg, ls, sub = annulus
    V = geo.measure_region(ls)
    assert geo.volume_correct(ls, V) is ls


def test_interface_and_reinitialize(annulus):
    P, bg, ls, sub = annulus
    seg = geo.extract_interface(ls)
    r = np.hypot(*seg.reshape(-1, 2).T)
    assert np.allclose(r, 2.0, atol=0.02)
    assert len(geo.chain_segments(seg)) == 1
    re = geo.reinitialize(ls)
    # the exact distance to the polyline is close to |r - 2|
    rv = np.hypot(*bg.vertices.T)
    near = np.abs(rv - 2.0) < 0.5
    assert np.max(np.abs(re.phi[near] - (rv[near] - 2.0))) < 0.02
    assert np.array_equal(re.phi < 0.0, ls.phi < 0.0)


def test_no_interface():
    P = square_fourier()
    mesh = geo.generate_background_mesh(P.geometry, 0.25)
    with pytest.raises(geo.NoInterface):
        geo.extract_interface(geo.init_levelset(mesh, P.omega0))


def test_point_location(annulus, rng):
    P, bg, ls, sub = annulus
    t = rng.integers(0, bg.n_triangles, 200)
    lam = rng.dirichlet(np.ones(3), 200)
    pts = np.einsum("ij,ijk->ik", lam, bg.vertices[bg.triangles[t]])
    found, bary = bg.locator.locate(pts)
    assert np.all(found >= 0)
    back = np.einsum("ij,ijk->ik", bary, bg.vertices[bg.triangles[found]])
    assert np.allclose(back, pts, atol=1e-12)
    # inside the hole and far outside
    found, _ = bg.locator.locate(np.array([[0.0, 0.0], [10.0, 0.0]]))
    assert np.all(found == -1)
    assert geo.locate_point(bg, (0.1, 0.1)) is None


def test_interpolation_reproduces_linear(annulus):
    P, bg, ls, sub = annulus
    f = 2.0 * bg.vertices[:, 0] - bg.vertices[:, 1] + 0.5
    pts = np.array([[1.5, 0.2], [-2.0, 1.1], [0.3, -2.4]])
    vals, ok = geo.interpolate(bg, f, pts)
    assert ok.all()
    assert np.allclose(vals, 2.0 * pts[:, 0] - pts[:, 1] + 0.5)
