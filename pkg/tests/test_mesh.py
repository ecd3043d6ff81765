import numpy as np
import pytest

from gcgrasp.errors import MeshError
from gcgrasp.mesh import TriMesh, load_mesh, sample_surface, save_obj
from gcgrasp.shapes import box, cylinder, icosphere


def test_obj_roundtrip(tmp_path):
    m = icosphere(1.3, subdivisions=2)
    save_obj(m, tmp_path / "s.obj")
    back = load_mesh(tmp_path / "s.obj")
    assert back.num_faces == m.num_faces
    # %.9g formatting keeps about 9 significant digits
    assert np.allclose(back.vertices, m.vertices, atol=1e-7)
    assert np.array_equal(back.faces, m.faces)


def test_watertight_detection():
    m = icosphere(1.0, subdivisions=1)
    assert m.is_watertight
    holed = TriMesh(m.vertices, m.faces[1:])
    assert not holed.is_watertight


def test_aabb_and_diagonal():
    m = box((2.0, 4.0, 6.0))
    lo, hi = m.aabb
    assert np.allclose(lo, [-1, -2, -3])
    assert np.allclose(hi, [1, 2, 3])
    assert m.aabb_diagonal == pytest.approx(np.sqrt(4 + 16 + 36))


def test_submesh_remaps_vertices():
    m = box((1.0, 1.0, 1.0))
    sub = m.submesh(np.array([0, 1]))
    assert sub.num_faces == 2
    assert len(sub.vertices) <= 6
    # the two faces describe the same triangles as in the parent
    orig = m.vertices[m.faces[:2]]
    new = sub.vertices[sub.faces]
    assert np.allclose(np.sort(orig.reshape(-1, 3), axis=0),
                       np.sort(new.reshape(-1, 3), axis=0))


def test_submesh_rejects_out_of_range():
    m = box((1.0, 1.0, 1.0))
    with pytest.raises(MeshError):
        m.submesh(np.array([0, m.num_faces]))


def test_transformed_rigid():
    m = box((2.0, 2.0, 2.0))
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th), 0],
                  [np.sin(th), np.cos(th), 0],
                  [0, 0, 1.0]])
    t = np.array([1.0, -2.0, 0.5])
    moved = m.transformed(R, t)
    assert np.allclose(moved.vertices, m.vertices @ R.T + t)
    assert np.array_equal(moved.faces, m.faces)


def test_sample_surface_deterministic():
    m = cylinder(1.0, 0.0, 5.0)
    a = sample_surface(m, 300, seed=4)
    b = sample_surface(m, 300, seed=4)
    c = sample_surface(m, 300, seed=5)
    assert np.array_equal(a.points, b.points)
    assert not np.array_equal(a.points, c.points)
    assert a.count == 300


def test_samples_lie_on_surface():
    m = icosphere(2.0, subdivisions=3)
    s = sample_surface(m, 500, seed=0)
    _, d, _ = m.query.closest_points(s.points)
    assert d.max() < 1e-9
    # faceted sphere: all sample radii slightly inside the true radius
    r = np.linalg.norm(s.points, axis=1)
    assert np.all(r <= 2.0 + 1e-9)
    assert r.min() > 1.9


def test_sample_surface_validates():
    m = box((1.0, 1.0, 1.0))
    with pytest.raises(MeshError):
        sample_surface(m, 0, seed=0)


def test_contains_sphere():
    m = icosphere(1.0, subdivisions=3)
    inside = np.array([[0, 0, 0], [0.5, 0, 0], [0, -0.7, 0]])
    outside = np.array([[1.2, 0, 0], [0, 0, -3.0], [5, 5, 5]])
    assert m.query.contains(inside).all()
    assert not m.query.contains(outside).any()
