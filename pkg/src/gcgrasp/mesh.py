"""Triangle-mesh data structures, Wavefront OBJ I/O and surface sampling.

All geometry in this package lives in centimeters.  ``TriMesh`` is the
substrate every other module consumes: it owns vertex/face arrays,
area-weighted vertex normals, edge-manifoldness bookkeeping and a lazily
built spatial index (see :mod:`gcgrasp.spatial`) for closest-point and
inside/outside queries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import MeshError

DEGENERATE_AREA = 1e-10  # cm^2; faces below this are dropped on construction


class TriMesh:
    """Indexed triangle mesh with computed per-vertex normals.

    Vertices are float64 ``(n, 3)`` arrays in cm, faces int64 ``(m, 3)``.
    The mesh is immutable after construction; derived data (normals,
    areas, edge topology, spatial index) is computed once and cached.
    """

    def __init__(self, vertices, faces):
        vertices = np.asarray(vertices, dtype=np.float64)
        faces = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {vertices.shape}")
        if faces.size == 0:
            faces = faces.reshape(0, 3)
        if faces.ndim != 2 or faces.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {faces.shape}")
        if len(vertices) == 0:
            raise MeshError("empty mesh: no vertices")
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshError("face index out of range")

        self.vertices = vertices
        self.vertices.setflags(write=False)

        # Drop degenerate faces so downstream normal/area math stays sane.
        areas = _face_areas(vertices, faces)
        keep = areas > DEGENERATE_AREA
        self.dropped_degenerate = int(np.count_nonzero(~keep))
        self.faces = faces[keep]
        self.faces.setflags(write=False)
        self.face_areas = areas[keep]

        self.face_normals = _face_normals(vertices, self.faces)
        self.vertex_normals = _vertex_normals(vertices, self.faces, self.face_normals, self.face_areas)

        self._edge_stats = None
        self._query = None

    # -- basic properties ------------------------------------------------

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.faces)

    @property
    def aabb(self):
        """(min, max) corners of the axis-aligned bounding box."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def aabb_diagonal(self):
        lo, hi = self.aabb
        return float(np.linalg.norm(hi - lo))

    @property
    def total_area(self):
        return float(self.face_areas.sum())

    def centroid(self):
        """Area-weighted centroid of the surface."""
        tri = self.vertices[self.faces]
        return np.average(tri.mean(axis=1), axis=0, weights=self.face_areas)

    # -- topology --------------------------------------------------------

    def _edge_topology(self):
        if self._edge_stats is None:
            edges = np.concatenate(
                [self.faces[:, [0, 1]], self.faces[:, [1, 2]], self.faces[:, [2, 0]]]
            )
            edges = np.sort(edges, axis=1)
            _, counts = np.unique(edges, axis=0, return_counts=True)
            self._edge_stats = {
                "open": int(np.count_nonzero(counts == 1)),
                "nonmanifold": int(np.count_nonzero(counts > 2)),
            }
        return self._edge_stats

    @property
    def open_edge_count(self):
        return self._edge_topology()["open"]

    @property
    def nonmanifold_edge_count(self):
        return self._edge_topology()["nonmanifold"]

    @property
    def is_watertight(self):
        """True iff every edge is shared by exactly two faces."""
        stats = self._edge_topology()
        return stats["open"] == 0 and stats["nonmanifold"] == 0

    # -- spatial queries ---------------------------------------------------

    @property
    def query(self):
        """Spatial index for closest-point / winding queries (built once)."""
        if self._query is None:
            from .spatial import MeshQuery

            self._query = MeshQuery(self)
        return self._query

    def transformed(self, rotation=None, translation=None):
        """Return a rigidly transformed copy (rotation about the origin)."""
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriMesh(v, self.faces)

    def submesh(self, face_ids):
        """Extract the faces in ``face_ids`` with reindexed vertices."""
        face_ids = np.asarray(face_ids, dtype=np.int64)
        if face_ids.size == 0:
            raise MeshError("submesh: empty face list")
        if face_ids.min() < 0 or face_ids.max() >= self.num_faces:
            raise MeshError("submesh: face index out of range")
        faces = self.faces[face_ids]
        used, inverse = np.unique(faces, return_inverse=True)
        return TriMesh(self.vertices[used], inverse.reshape(-1, 3))


@dataclass
class SurfaceSampleSet:
    """Area-weighted uniform samples on a mesh surface."""

    points: np.ndarray
    normals: np.ndarray
    face_ids: np.ndarray

    @property
    def count(self):
        return len(self.points)


def _face_areas(vertices, faces):
    if len(faces) == 0:
        return np.zeros(0)
    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    return 0.5 * np.linalg.norm(cross, axis=1)


def _face_normals(vertices, faces):
    if len(faces) == 0:
        return np.zeros((0, 3))
    tri = vertices[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    norm = np.linalg.norm(cross, axis=1)
    norm[norm == 0] = 1.0
    return cross / norm[:, None]


def _vertex_normals(vertices, faces, face_normals, face_areas):
    acc = np.zeros_like(vertices)
    weighted = face_normals * face_areas[:, None]
    for k in range(3):
        np.add.at(acc, faces[:, k], weighted)
    norms = np.linalg.norm(acc, axis=1)
    unreferenced = norms < 1e-30
    acc[unreferenced] = (0.0, 0.0, 1.0)
    norms[unreferenced] = 1.0
    return acc / norms[:, None]


def load_mesh(path):
    """Load a Wavefront OBJ file as a :class:`TriMesh`.

    Supports ``v``/``vn``/``f`` records with 1-based (or negative,
    relative) indices; polygon faces are fan-triangulated.  Texture and
    material records are ignored.  Coordinates are taken as centimeters.
    """
    vertices = []
    faces = []
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise MeshError(f"cannot read mesh file {path}: {exc}") from exc

    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshError(f"{path}:{lineno}: vertex needs 3 coordinates")
            vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
        elif tag == "f":
            idx = []
            for token in parts[1:]:
                vi = token.split("/")[0]
                i = int(vi)
                if i == 0:
                    raise MeshError(f"{path}:{lineno}: OBJ face indices are 1-based, got 0")
                if i < 0:
                    i = len(vertices) + i
                else:
                    i = i - 1
                if i < 0 or i >= len(vertices):
                    raise MeshError(f"{path}:{lineno}: face index out of range")
                idx.append(i)
            if len(idx) < 3:
                raise MeshError(f"{path}:{lineno}: face needs at least 3 vertices")
            for k in range(1, len(idx) - 1):
                faces.append([idx[0], idx[k], idx[k + 1]])
        # vn / vt / usemtl / o / g / s: ignored; normals are recomputed.

    if not vertices:
        raise MeshError(f"{path}: no vertices found")
    if not faces:
        raise MeshError(f"{path}: no faces found")
    return TriMesh(np.array(vertices), np.array(faces))


def save_obj(mesh, path, comment=None):
    """Write a mesh (or (vertices, faces) pair) to a Wavefront OBJ file."""
    if isinstance(mesh, TriMesh):
        vertices, faces = mesh.vertices, mesh.faces
    else:
        vertices, faces = mesh
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for v in vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for f in faces:
            fh.write(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}\n")


def sample_surface(mesh, n, seed):
    """Draw ``n`` area-weighted uniform samples from the mesh surface.

    Deterministic for a given seed: identical calls return bit-identical
    sample sets.  Sample normals are the normals of the source faces.
    """
    if n < 1:
        raise MeshError(f"sample count must be >= 1, got {n}")
    total = mesh.face_areas.sum()
    if total <= 0:
        raise MeshError("cannot sample a zero-area mesh")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(mesh.face_areas)
    cdf /= cdf[-1]
    face_ids = np.searchsorted(cdf, rng.random(n), side="right")
    face_ids = np.minimum(face_ids, mesh.num_faces - 1)

    # Uniform barycentric coordinates via the square-root trick.
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    tri = mesh.vertices[mesh.faces[face_ids]]
    points = (
        tri[:, 0] * (1.0 - r1)[:, None]
        + tri[:, 1] * (r1 * (1.0 - r2))[:, None]
        + tri[:, 2] * (r1 * r2)[:, None]
    )
    return SurfaceSampleSet(points=points, normals=mesh.face_normals[face_ids].copy(), face_ids=face_ids)
