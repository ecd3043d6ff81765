"""Contact transfer between parts, plus the rigid-registration baseline."""

import numpy as np
import pytest

from gcgrasp.contact import ContactMap, ContactPoint, lift_to_gc
from gcgrasp.errors import InputError
from gcgrasp.gc import Skeleton, build_gc
from gcgrasp.mesh import TriMesh, sample_surface
from gcgrasp.shapes import cylinder, elliptic_frustum, icosphere
from gcgrasp.transfer import (TransferResult, load_transfer_result,
                              save_transfer_result, transfer_contact,
                              transfer_preg_baseline)


def test_identity_transfer(grasp_scene):
    g = grasp_scene.src_gc
    res = transfer_contact(grasp_scene.lifted, g, g)
    assert res.delta_H == 0.0
    assert res.clamped_count == 0
    for src, tgt in zip(grasp_scene.lifted.points, res.target_map.points):
        assert tgt.gc_coord.phi == src.gc_coord.phi  # bitwise
        assert tgt.gc_coord.L == src.gc_coord.L
        d = np.linalg.norm(np.asarray(tgt.position) - np.asarray(src.position))
        assert d <= 2.0 * g.skeleton.height / 256.0


def test_transfer_shifts_arc_length(grasp_scene):
    # same radius, 4 cm taller: every contact slides up by half the
    # height difference, phi untouched
    tall_mesh = cylinder(2.0, -0.05, 16.05, segments=48, rings=6)
    tall_gc = build_gc(tall_mesh, Skeleton(np.array([[0.0, 0.0, 0.0],
                                                     [0.0, 0.0, 16.0]])))
    res = transfer_contact(grasp_scene.lifted, grasp_scene.src_gc, tall_gc)
    assert res.delta_H == pytest.approx(2.0, abs=0.06)
    assert res.clamped_count == 0
    for src, tgt in zip(grasp_scene.lifted.points, res.target_map.points):
        assert tgt.gc_coord.phi == src.gc_coord.phi
        assert tgt.gc_coord.L - src.gc_coord.L == pytest.approx(res.delta_H,
                                                                abs=1e-9)
        # on a straight rod arc length along the wall equals height
        got = tall_gc.surface_distance(tgt.gc_coord.h, tgt.gc_coord.phi)
        assert got == pytest.approx(tgt.gc_coord.L, abs=2.0 * 16.0 / 256.0)


def test_transfer_phi_offset(grasp_scene):
    g = grasp_scene.src_gc
    res = transfer_contact(grasp_scene.lifted, g, g, phi_offset=np.pi / 2)
    for src, tgt in zip(grasp_scene.lifted.points, res.target_map.points):
        want = (src.gc_coord.phi + np.pi / 2) % (2 * np.pi)
        assert tgt.gc_coord.phi == pytest.approx(want, abs=1e-12)


def test_transfer_clamps_and_warns(grasp_scene):
    stub_mesh = cylinder(2.0, -0.05, 2.05, segments=48, rings=6)
    stub_gc = build_gc(stub_mesh, Skeleton(np.array([[0.0, 0.0, 0.0],
                                                     [0.0, 0.0, 2.0]])))
    res = transfer_contact(grasp_scene.lifted, grasp_scene.src_gc, stub_gc)
    assert res.clamped_count >= 0.5 * len(res.target_map.points)
    assert any("too short" in w for w in res.warnings)
    for cp in res.target_map.points:
        assert 0.0 <= cp.gc_coord.h <= stub_gc.skeleton.height + 1e-6


def test_transfer_requires_lifted_map(grasp_scene):
    with pytest.raises(InputError, match="lift"):
        transfer_contact(grasp_scene.raw_map, grasp_scene.src_gc,
                         grasp_scene.src_gc)


def _bumpy_part():
    # asymmetric enough that rigid registration has a unique optimum
    m = elliptic_frustum(2.0, 1.2, 1.0, 0.7, -0.05, 8.05, segments=40, rings=6)
    bump = icosphere(0.8, subdivisions=2, center=(1.8, 0.0, 6.0))
    verts = np.vstack([m.vertices, bump.vertices])
    faces = np.vstack([m.faces, bump.faces + len(m.vertices)])
    return TriMesh(verts, faces)


def _on_part_map(part):
    # contacts sitting exactly on the part surface, so the baseline's
    # final snap-to-surface step is a no-op under perfect alignment
    pts = sample_surface(part, 120, seed=9).points
    points = [ContactPoint(position=p, region="palm", weight=1.0)
              for p in pts]
    return ContactMap(points=points, n_samples=120, tau_c=0.2)


def test_preg_identity():
    part = _bumpy_part()
    cmap = _on_part_map(part)
    res = transfer_preg_baseline(cmap, part, part,
                                 n_surface_samples=1500, seed=3)
    assert not res.diverged
    assert res.rotation.shape == (3, 3)
    # registration runs on finite surface samples, so identity is only
    # recovered to sampling noise
    assert np.allclose(res.rotation, np.eye(3), atol=0.01)
    assert np.allclose(res.translation, 0.0, atol=0.05)
    assert np.abs(cmap.positions - res.target_map.positions).max() < 0.1


def test_preg_recovers_rigid_motion():
    part = _bumpy_part()
    cmap = _on_part_map(part)
    angle = 0.3
    R = np.array([[np.cos(angle), -np.sin(angle), 0.0],
                  [np.sin(angle), np.cos(angle), 0.0],
                  [0.0, 0.0, 1.0]])
    t = np.array([0.7, -0.4, 1.1])
    moved = part.transformed(R, t)
    res = transfer_preg_baseline(cmap, part, moved,
                                 n_surface_samples=2000, seed=3)
    assert not res.diverged
    assert np.allclose(res.rotation, R, atol=0.02)
    assert np.allclose(res.translation, t, atol=0.1)
    want = cmap.positions @ R.T + t
    got = res.target_map.positions
    assert np.abs(got - want).max() < 0.15


def test_preg_determinism(grasp_scene):
    part = _bumpy_part()
    a = transfer_preg_baseline(grasp_scene.raw_map, part, part,
                               n_surface_samples=800, seed=5)
    b = transfer_preg_baseline(grasp_scene.raw_map, part, part,
                               n_surface_samples=800, seed=5)
    assert np.array_equal(a.target_map.positions, b.target_map.positions)
    assert np.array_equal(a.rotation, b.rotation)


def test_result_roundtrip_gc(tmp_path, grasp_scene):
    g = grasp_scene.src_gc
    res = transfer_contact(grasp_scene.lifted, g, g)
    save_transfer_result(res, tmp_path / "t.json")
    back = load_transfer_result(tmp_path / "t.json")
    assert back.method == "gc"
    assert back.delta_H == res.delta_H
    assert back.clamped_count == res.clamped_count
    assert back.warnings == res.warnings
    assert np.array_equal(back.target_map.positions,
                          res.target_map.positions)
    assert back.rotation is None and back.translation is None


def test_result_roundtrip_preg(tmp_path, grasp_scene):
    part = _bumpy_part()
    res = transfer_preg_baseline(grasp_scene.raw_map, part, part,
                                 n_surface_samples=600, seed=2)
    save_transfer_result(res, tmp_path / "t.json")
    back = load_transfer_result(tmp_path / "t.json")
    assert back.method == "preg"
    assert np.array_equal(back.rotation, res.rotation)
    assert np.array_equal(back.translation, res.translation)
    assert back.diverged == res.diverged
