import json

import numpy as np
import pytest

from gcgrasp.contact import (ContactMap, ContactPoint, extract_contact_map,
                             lift_to_gc, load_contact_map, save_contact_map,
                             export_contact_obj)
from gcgrasp.errors import ContactError, InputError
from gcgrasp.mesh import load_mesh
from gcgrasp.shapes import box


def _box_pair(gap):
    # two unit cubes with facing sides `gap` apart: every sample on the
    # facing side of the object is exactly `gap` from the hand
    obj = box((1.0, 1.0, 1.0))
    hand = box((1.0, 1.0, 1.0), center=(1.0 + gap, 0.0, 0.0))
    return obj, hand


def test_extract_distance_weighting():
    gap = 0.1
    obj, hand = _box_pair(gap)
    labels = ["palm"] * hand.num_faces
    cmap = extract_contact_map(obj, hand, labels, n_samples=2000, tau_c=0.2,
                               seed=1)
    # only the side of the cube facing the hand is in range
    assert 0 < len(cmap.points) < 2000
    pos = cmap.positions
    assert pos[:, 0].min() > 0.5 - 0.2
    # samples exactly on the facing plane sit `gap` from the hand box
    on_face = np.abs(pos[:, 0] - 0.5) < 1e-9
    assert on_face.sum() > 50
    want_w = np.exp(-gap ** 2 / (2 * 0.2 ** 2))
    assert np.allclose(cmap.weights[on_face], want_w, atol=1e-9)
    assert set(cmap.regions) == {"palm"}
    assert cmap.contact_ratio() == pytest.approx(100.0 * len(cmap.points) / 2000)


def test_extract_inclusive_threshold():
    obj, hand = _box_pair(0.2)
    labels = ["palm"] * hand.num_faces
    cmap = extract_contact_map(obj, hand, labels, n_samples=500, tau_c=0.2,
                               seed=1)
    assert len(cmap.points) > 0


def test_extract_no_contact_raises():
    obj, hand = _box_pair(3.0)
    labels = ["palm"] * hand.num_faces
    with pytest.raises(ContactError, match="does not touch"):
        extract_contact_map(obj, hand, labels, n_samples=200, tau_c=0.2,
                            seed=1)


def test_extract_validates_inputs():
    obj, hand = _box_pair(0.1)
    with pytest.raises(InputError):
        extract_contact_map(obj, hand, ["palm"] * 3, n_samples=100, tau_c=0.2)
    with pytest.raises(InputError):
        extract_contact_map(obj, hand, ["palm"] * hand.num_faces,
                            n_samples=100, tau_c=0.0)


def test_extract_region_labels(grasp_scene):
    regions = set(grasp_scene.raw_map.regions)
    # a rod power grasp touches the palm and several finger segments
    assert "palm" in regions
    assert any(r.endswith("_proximal") for r in regions)
    assert all("_" in r or r == "palm" for r in regions)


def test_map_json_roundtrip(tmp_path, grasp_scene):
    cmap = grasp_scene.lifted
    save_contact_map(cmap, tmp_path / "m.json")
    back = load_contact_map(tmp_path / "m.json")
    assert len(back.points) == len(cmap.points)
    assert np.array_equal(back.positions, cmap.positions)
    assert np.array_equal(back.weights, cmap.weights)
    assert back.tau_c == cmap.tau_c
    assert back.n_samples == cmap.n_samples
    a = back.points[0]
    b = cmap.points[0]
    assert a.region == b.region
    assert a.gc_coord.phi == b.gc_coord.phi


def test_map_json_is_sorted_and_versioned(tmp_path, grasp_scene):
    save_contact_map(grasp_scene.raw_map, tmp_path / "m.json")
    text = (tmp_path / "m.json").read_text()
    data = json.loads(text)
    assert data["schema"] == "contact_map"
    assert data["version"] == 1
    assert text.endswith("\n")
    assert json.dumps(data, sort_keys=True) == text.strip()


def test_lift_assigns_consistent_coords(grasp_scene):
    g = grasp_scene.src_gc
    lifted = grasp_scene.lifted
    assert lifted.meta["lift_dropped"] == 0
    for cp in lifted.points[::25]:
        q, _ = g.surface_point(cp.gc_coord.h, cp.gc_coord.phi)
        assert np.linalg.norm(q - cp.position) < 0.02 * grasp_scene.src_mesh.aabb_diagonal
        assert cp.gc_coord.L == pytest.approx(
            g.surface_distance(cp.gc_coord.h, cp.gc_coord.phi), abs=1e-9)


def test_lift_is_idempotent(grasp_scene):
    again = lift_to_gc(grasp_scene.lifted, grasp_scene.src_gc,
                       grasp_scene.src_mesh)
    a = [cp.gc_coord for cp in again.points]
    b = [cp.gc_coord for cp in grasp_scene.lifted.points]
    assert all(x.h == y.h and x.phi == y.phi for x, y in zip(a, b))


def test_lift_drops_far_points(grasp_scene):
    far = ContactPoint(position=np.array([100.0, 100.0, 100.0]),
                       region="palm", weight=1.0)
    cmap = ContactMap(points=list(grasp_scene.raw_map.points) + [far],
                      n_samples=grasp_scene.raw_map.n_samples,
                      tau_c=grasp_scene.raw_map.tau_c)
    lifted = lift_to_gc(cmap, grasp_scene.src_gc, grasp_scene.src_mesh)
    assert lifted.meta["lift_dropped"] == 1
    assert len(lifted.points) == len(cmap.points) - 1


def test_lift_all_dropped_raises(grasp_scene):
    pts = [ContactPoint(position=np.array([50.0, 50.0, 50.0 + i]),
                        region="palm", weight=1.0) for i in range(3)]
    cmap = ContactMap(points=pts, n_samples=3, tau_c=0.2)
    with pytest.raises(ContactError):
        lift_to_gc(cmap, grasp_scene.src_gc, grasp_scene.src_mesh)


def test_export_contact_obj(tmp_path, grasp_scene):
    export_contact_obj(grasp_scene.raw_map, tmp_path / "c.obj")
    marker = load_mesh(tmp_path / "c.obj")
    # one octahedron per contact point
    assert len(marker.vertices) == 6 * len(grasp_scene.raw_map.points)
    assert marker.num_faces == 8 * len(grasp_scene.raw_map.points)
