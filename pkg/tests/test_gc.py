import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gcgrasp.errors import GcBuildError, InputError
from gcgrasp.gc import (GcCoordinate, GeneralizedCylinder, Skeleton, build_gc,
                        export_surface_obj, load_gc, load_skeleton, save_gc,
                        save_skeleton)
from gcgrasp.mesh import load_mesh, sample_surface
from gcgrasp.shapes import cylinder, frustum


@pytest.fixture(scope="module")
def cyl_gc(gc_fixtures):
    mesh, skel = gc_fixtures["cylinder"]
    return mesh, skel, build_gc(mesh, skel)


def test_skeleton_point_and_tangent():
    sk = Skeleton(np.array([[0, 0, 0], [0, 0, 4.0], [0, 3.0, 4.0]]))
    assert sk.height == pytest.approx(7.0)
    assert np.allclose(sk.point_at(2.0), [0, 0, 2.0])
    assert np.allclose(sk.point_at(5.5), [0, 1.5, 4.0])
    assert np.allclose(sk.tangent_at(1.0), [0, 0, 1.0])
    assert np.allclose(sk.tangent_at(6.0), [0, 1.0, 0])


def test_skeleton_roundtrip(tmp_path):
    sk = Skeleton(np.array([[0, 0, 0], [1.0, 2.0, 3.0]]))
    save_skeleton(sk, tmp_path / "s.json")
    back = load_skeleton(tmp_path / "s.json")
    assert np.array_equal(back.points, sk.points)


def test_build_gc_validates_counts(gc_fixtures):
    mesh, skel = gc_fixtures["cylinder"]
    with pytest.raises(InputError):
        build_gc(mesh, skel, n=2)
    with pytest.raises(InputError):
        build_gc(mesh, skel, M=7)


def test_skeleton_outside_mesh_names_height():
    mesh = cylinder(0.6, 0.0, 4.0)
    # skeleton pokes out of the top cap
    skel = Skeleton(np.array([[0, 0, 1.0], [0, 0, 9.0]]))
    with pytest.raises(GcBuildError, match="height"):
        build_gc(mesh, skel)


def test_cylinder_sections_recover_radius(cyl_gc):
    _, _, g = cyl_gc
    assert g.n == 30
    assert g.H == pytest.approx(12.0)
    for h in (0.0, 3.0, 6.0, 11.9):
        assert g.mean_radius_at(h) == pytest.approx(0.6, abs=0.02)
    p, clamped = g.surface_point(5.0, 1.0)
    assert not clamped
    assert np.hypot(p[0], p[1]) == pytest.approx(0.6, abs=0.02)
    assert p[2] == pytest.approx(5.0, abs=0.05)


def test_cylinder_surface_distance_is_height(cyl_gc):
    # generators of a straight cylinder are vertical lines, so the arc
    # length from the base equals the height
    _, _, g = cyl_gc
    for h in (1.0, 4.5, 9.0):
        for phi in (0.0, 2.0, 5.0):
            assert g.surface_distance(h, phi) == pytest.approx(h, abs=0.05)
    assert g.max_surface_distance(2.0) == pytest.approx(12.0, abs=0.06)


def test_cone_surface_distance_is_slant(gc_fixtures):
    mesh, skel = gc_fixtures["cone"]
    g = build_gc(mesh, skel)
    # radius shrinks 0.9 cm over 16 cm, so ds = sqrt(1 + slope^2) dh
    slope = (1.0 - 0.1) / 16.0
    want = 8.0 * np.sqrt(1.0 + slope ** 2)
    assert g.surface_distance(8.0, 0.7) == pytest.approx(want, rel=0.02)


def test_invert_surface_distance_roundtrip(cyl_gc):
    _, _, g = cyl_gc
    for h in (0.5, 3.3, 7.7, 11.2):
        L = g.surface_distance(h, 4.0)
        h_back, clamped = g.invert_surface_distance(4.0, L)
        assert not clamped
        assert h_back == pytest.approx(h, abs=1e-6)


def test_invert_clamps_out_of_range(cyl_gc):
    _, _, g = cyl_gc
    h, clamped = g.invert_surface_distance(0.0, g.max_surface_distance(0.0) + 5.0)
    assert clamped
    assert h == pytest.approx(g.H)
    h, clamped = g.invert_surface_distance(0.0, -1.0)
    assert clamped
    assert h == pytest.approx(0.0)


@settings(max_examples=25, deadline=None)
@given(h=st.floats(0.2, 11.8), phi=st.floats(0.0, 6.28))
def test_surface_distance_inversion_property(gc_fixtures, h, phi):
    mesh, skel = gc_fixtures["cylinder"]
    g = build_gc(mesh, skel)
    L = g.surface_distance(h, phi)
    h_back, clamped = g.invert_surface_distance(phi, L)
    assert not clamped
    assert abs(h_back - h) < 2.0 * g.H / 256.0


def test_parameterize_roundtrip_cylinder(cyl_gc):
    mesh, _, g = cyl_gc
    s = sample_surface(mesh, 200, seed=2)
    errs = []
    for p, nrm in zip(s.points, s.normals):
        coord, _ = g.parameterize(p, nrm)
        q, _ = g.surface_point(coord.h, coord.phi)
        errs.append(np.linalg.norm(q - p))
    errs = np.array(errs)
    assert (errs < 0.02 * mesh.aabb_diagonal).mean() >= 0.95


def test_parameterize_records_surface_distance(cyl_gc):
    _, _, g = cyl_gc
    p, _ = g.surface_point(6.0, 2.5)
    nrm = np.array([np.cos(0.0), 0.0, 0.0])
    nrm = p.copy()
    nrm[2] = 0.0
    nrm = nrm / np.linalg.norm(nrm)
    coord, fb = g.parameterize(p, nrm)
    assert not fb
    assert coord.L == pytest.approx(g.surface_distance(coord.h, coord.phi))
    assert coord.h == pytest.approx(6.0, abs=0.05)
    assert coord.phi == pytest.approx(2.5, abs=0.02)


def test_cap_point_uses_fallback(cyl_gc):
    _, _, g = cyl_gc
    # a point on the bottom cap: its normal ray runs parallel to the
    # skeleton and never approaches it
    p = np.array([0.3, 0.1, -0.05])
    coord, fb = g.parameterize(p, np.array([0.0, 0.0, -1.0]))
    assert fb
    assert coord.h == pytest.approx(0.0, abs=0.1)


def test_gc_coordinate_json():
    c = GcCoordinate(h=1.5, phi=2.25, L=1.75)
    back = GcCoordinate.from_json(c.to_json())
    assert (back.h, back.phi, back.L) == (1.5, 2.25, 1.75)


def test_gc_save_load_reproduces_surface(tmp_path, cyl_gc):
    _, _, g = cyl_gc
    save_gc(g, tmp_path / "g.json")
    back = load_gc(tmp_path / "g.json")
    for h, phi in ((0.5, 0.1), (6.0, 3.0), (11.5, 5.5)):
        a, _ = g.surface_point(h, phi)
        b, _ = back.surface_point(h, phi)
        assert np.array_equal(a, b)
    assert back.H == g.H
    assert back.M == g.M


def test_gc_artifact_carries_length_table(tmp_path, cyl_gc):
    _, _, g = cyl_gc
    save_gc(g, tmp_path / "g.json")
    data = json.loads((tmp_path / "g.json").read_text())
    assert data["schema"] == "gc"
    table = data["length_table"]
    assert len(table["heights"]) == 257
    assert len(table["angles"]) == g.M
    assert len(table["values"]) == 257


def test_export_surface_obj(tmp_path, cyl_gc):
    _, _, g = cyl_gc
    export_surface_obj(g, tmp_path / "surf.obj")
    mesh = load_mesh(tmp_path / "surf.obj")
    assert len(mesh.vertices) == g.n * g.M
    # reconstructed tube wall stays near the true radius
    r = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    assert np.abs(r - 0.6).max() < 0.05


def test_warnings_survive_roundtrip(tmp_path, gc_fixtures):
    mesh, skel = gc_fixtures["handle"]
    g = build_gc(mesh, skel)
    save_gc(g, tmp_path / "h.json")
    assert load_gc(tmp_path / "h.json").warnings == g.warnings
