"""Contact maps: where a hand touches an object, and how those touch points
are addressed on a generalized cylinder.

A contact map is extracted by sampling the object surface and keeping the
samples within a threshold of the hand, each labeled with the hand region
that touches it and a Gaussian proximity weight. Lifting attaches polar
coordinates from the part's generalized cylinder, which is what transfer
operates on.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ContactError, InputError
from .gc import TWO_PI, GcCoordinate
from .mesh import sample_surface

DEFAULT_TAU_C = 0.2
DEFAULT_SAMPLES = 5000
LIFT_DROP_FRACTION = 0.20


@dataclass
class ContactPoint:
    """One object-surface point in contact with the hand."""

    position: np.ndarray
    region: str
    weight: float
    gc_coord: GcCoordinate = None
    fallback: bool = False

    def to_json(self):
        out = {
            "position": [float(v) for v in self.position],
            "region": self.region,
            "weight": float(self.weight),
        }
        if self.gc_coord is not None:
            out["gc"] = self.gc_coord.to_json()
        if self.fallback:
            out["fallback"] = True
        return out

    @classmethod
    def from_json(cls, data):
        return cls(
            position=np.asarray(data["position"], dtype=np.float64),
            region=str(data["region"]),
            weight=float(data["weight"]),
            gc_coord=GcCoordinate.from_json(data["gc"]) if "gc" in data else None,
            fallback=bool(data.get("fallback", False)),
        )


@dataclass
class ContactMap:
    """Immutable set of contact points plus the sampling parameters that
    produced it."""

    points: list
    n_samples: int
    tau_c: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def positions(self):
        return np.array([p.position for p in self.points])

    @property
    def regions(self):
        return [p.region for p in self.points]

    @property
    def weights(self):
        return np.array([p.weight for p in self.points])

    def contact_ratio(self):
        """Contact points over sample budget, as a percentage."""
        return 100.0 * len(self.points) / self.n_samples

    def to_json(self):
        return {
            "schema": "contact_map",
            "version": 1,
            "units": "cm",
            "tau_c": float(self.tau_c),
            "n_samples": int(self.n_samples),
            "points": [p.to_json() for p in self.points],
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, data):
        if data.get("schema") != "contact_map":
            raise InputError("not a contact-map JSON document")
        return cls(
            points=[ContactPoint.from_json(p) for p in data["points"]],
            n_samples=int(data["n_samples"]),
            tau_c=float(data["tau_c"]),
            meta=dict(data.get("meta", {})),
        )


def save_contact_map(cmap, path):
    with open(path, "w") as fh:
        json.dump(cmap.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_contact_map(path):
    with open(path) as fh:
        return ContactMap.from_json(json.load(fh))


def extract_contact_map(object_mesh, hand_mesh, hand_face_regions,
                        n_samples=DEFAULT_SAMPLES, tau_c=DEFAULT_TAU_C, seed=0):
    """Sample the object surface and keep the points the hand touches.

    A sample is in contact when its distance to the hand surface is at most
    tau_c (inclusive); its region is the label of the nearest hand face and
    its weight is exp(-d^2 / (2 tau_c^2)).
    """
    if tau_c <= 0:
        raise InputError("contact threshold tau_c must be positive")
    hand_face_regions = list(hand_face_regions)
    if len(hand_face_regions) != hand_mesh.num_faces:
        raise InputError(
            f"region labels cover {len(hand_face_regions)} faces, "
            f"hand has {hand_mesh.num_faces}"
        )
    samples = sample_surface(object_mesh, n_samples, seed)
    _, dist, face_id = hand_mesh.query.closest_points(samples.points)
    keep = np.nonzero(dist <= tau_c)[0]
    if len(keep) == 0:
        raise ContactError(
            f"hand does not touch object: no sample within {tau_c} cm "
            f"(nearest {dist.min():.3f} cm)"
        )
    weights = np.exp(-dist[keep] ** 2 / (2.0 * tau_c**2))
    points = [
        ContactPoint(
            position=samples.points[i].copy(),
            region=hand_face_regions[face_id[i]],
            weight=float(w),
        )
        for i, w in zip(keep, weights)
    ]
    return ContactMap(points=points, n_samples=n_samples, tau_c=tau_c)


def _surface_normal_fd(gc, h, phi):
    """Outward surface normal of sigma at (h, phi) by central differences."""
    dh = gc.H / 512.0
    dphi = TWO_PI / (2.0 * gc.M)
    p_h1, _ = gc.surface_point(min(h + dh, gc.H), phi)
    p_h0, _ = gc.surface_point(max(h - dh, 0.0), phi)
    p_p1, _ = gc.surface_point(h, phi + dphi)
    p_p0, _ = gc.surface_point(h, phi - dphi)
    n = np.cross(p_p1 - p_p0, p_h1 - p_h0)
    norm = np.linalg.norm(n)
    if norm < 1e-12:
        return None
    return n / norm


def lift_to_gc(cmap, gc, part_mesh):
    """Attach generalized-cylinder coordinates to every contact point.

    The closest point on the GC surface is found on the precomputed
    (257 heights x M angles) grid with one parabolic refinement per axis.
    Points farther than 20% of the part's AABB diagonal from the GC surface
    belong to other parts and are dropped with a warning count in ``meta``.
    """
    if len(cmap) == 0:
        raise ContactError("cannot lift an empty contact map")
    grid = gc._surface_grid  # (rows, M, 3)
    rows, m, _ = grid.shape
    flat = grid.reshape(-1, 3)
    tree = cKDTree(flat)
    positions = cmap.positions
    dist, idx = tree.query(positions)
    jj = idx // m
    bb = idx % m

    drop_limit = LIFT_DROP_FRACTION * part_mesh.aabb_diagonal
    lifted = []
    dropped = 0
    fallbacks = 0
    table_h = gc._table_h
    bucket_phi = gc._bucket_phi
    for k, cp in enumerate(cmap.points):
        j, b = int(jj[k]), int(bb[k])
        h = _refine_axis(
            positions[k], grid, j, b, table_h, axis="h"
        )
        phi = _refine_axis(
            positions[k], grid, j, b, bucket_phi, axis="phi"
        )
        q, _ = gc.surface_point(h, phi)
        if np.linalg.norm(positions[k] - q) > drop_limit:
            dropped += 1
            continue
        normal = _surface_normal_fd(gc, h, phi)
        if normal is None:
            dropped += 1
            continue
        coord, fb = gc.parameterize(q, normal)
        fallbacks += int(fb)
        lifted.append(ContactPoint(
            position=cp.position.copy(), region=cp.region,
            weight=cp.weight, gc_coord=coord, fallback=bool(fb),
        ))
    if not lifted:
        raise ContactError(
            "all contact points are farther than "
            f"{drop_limit:.2f} cm from the part's surface"
        )
    meta = dict(cmap.meta)
    meta.update({"lift_dropped": dropped, "lift_fallbacks": fallbacks})
    return ContactMap(points=lifted, n_samples=cmap.n_samples,
                      tau_c=cmap.tau_c, meta=meta)


def _refine_axis(x, grid, j, b, coords, axis):
    """Parabolic minimum of |x - grid| along one grid axis around (j, b)."""
    rows, m, _ = grid.shape
    if axis == "h":
        if j == 0 or j == rows - 1:
            return float(coords[j])
        p0, p1, p2 = grid[j - 1, b], grid[j, b], grid[j + 1, b]
        c0, c1, c2 = coords[j - 1], coords[j], coords[j + 1]
    else:
        p0, p1, p2 = grid[j, (b - 1) % m], grid[j, b], grid[j, (b + 1) % m]
        step = TWO_PI / m
        c0, c1, c2 = coords[b] - step, coords[b], coords[b] + step
    d0 = float(np.dot(x - p0, x - p0))
    d1 = float(np.dot(x - p1, x - p1))
    d2 = float(np.dot(x - p2, x - p2))
    denom = d0 - 2.0 * d1 + d2
    if denom <= 1e-15:
        return float(c1)
    shift = 0.5 * (d0 - d2) / denom
    shift = min(max(shift, -1.0), 1.0)
    lo, hi = (c0, c2) if c2 > c0 else (c2, c0)
    val = c1 + shift * 0.5 * (c2 - c0)
    return float(min(max(val, lo), hi))


def export_contact_obj(cmap, path, marker_radius=0.08):
    """Diagnostic OBJ: every contact point as a small octahedron."""
    offsets = marker_radius * np.array([
        [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1],
    ])
    tris = [[0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
            [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5]]
    with open(path, "w") as fh:
        fh.write(f"# {len(cmap)} contact points\n")
        base = 1
        for cp in cmap.points:
            for off in offsets:
                p = cp.position + off
                fh.write(f"v {p[0]:.6g} {p[1]:.6g} {p[2]:.6g}\n")
            for t in tris:
                fh.write(f"f {base + t[0]} {base + t[1]} {base + t[2]}\n")
            base += 6
