"""Generalized-cylinder model of a segmented object part.

A part is represented by a user-supplied skeleton polyline plus a stack of
cross-section loops cut from the mesh at evenly spaced skeleton heights.
Each surface point gets polar coordinates (h, phi): height along the
skeleton and angle about it in a rotation-minimizing frame. The third
coordinate L is the arc length of the constant-phi surface curve from the
part's base, which is what makes contact positions comparable between parts
of different sizes.

All lengths are centimeters, angles radians.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import GcBuildError, InputError

TWO_PI = 2.0 * np.pi

# rows of the height grid backing the surface-length table (256 intervals)
L_TABLE_INTERVALS = 256

DEFAULT_SECTIONS = 30
DEFAULT_LOOP_POINTS = 64
DEFAULT_SMOOTHING = 0.5
DEFAULT_CONCAVITY = 0.15
RAY_FALLBACK_FRACTION = 0.25


@dataclass
class GcCoordinate:
    """Polar surface coordinate: height h, angle phi in [0, 2pi), and the
    surface distance L from the base along the constant-phi curve."""

    h: float
    phi: float
    L: float

    def to_json(self):
        return {"h": self.h, "phi": self.phi, "L": self.L}

    @classmethod
    def from_json(cls, data):
        return cls(h=float(data["h"]), phi=float(data["phi"]), L=float(data["L"]))


class Skeleton:
    """Ordered polyline with arc-length parameterization h in [0, H]."""

    def __init__(self, points):
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != 3 or len(points) < 2:
            raise InputError("skeleton needs at least two 3D points")
        seg = np.diff(points, axis=0)
        seg_len = np.linalg.norm(seg, axis=1)
        if np.any(seg_len <= 1e-6):
            raise InputError("skeleton has coincident consecutive points")
        self.points = points
        self._seg = seg
        self._seg_len = seg_len
        self.arc = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.height = float(self.arc[-1])

    def _segment_index(self, h):
        i = int(np.searchsorted(self.arc, h, side="right")) - 1
        return min(max(i, 0), len(self._seg) - 1)

    def point_at(self, h):
        h = float(np.clip(h, 0.0, self.height))
        i = self._segment_index(h)
        t = (h - self.arc[i]) / self._seg_len[i]
        return self.points[i] + t * self._seg[i]

    def tangent_at(self, h):
        h = float(np.clip(h, 0.0, self.height))
        i = self._segment_index(h)
        return self._seg[i] / self._seg_len[i]

    def to_json(self):
        return {"points": self.points.tolist()}

    @classmethod
    def from_json(cls, data):
        if "points" not in data:
            raise InputError("skeleton JSON needs a 'points' array")
        return cls(data["points"])


def load_skeleton(path):
    with open(path) as fh:
        return Skeleton.from_json(json.load(fh))


def save_skeleton(skeleton, path):
    with open(path, "w") as fh:
        json.dump(skeleton.to_json(), fh, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# rotation-minimizing frames


def default_reference_direction(tangent):
    """Global axis least aligned with the first tangent."""
    axis = int(np.argmin(np.abs(tangent)))
    ref = np.zeros(3)
    ref[axis] = 1.0
    return ref


def _transport_frames(points, tangents, x0):
    """Parallel transport of x0 along the polyline by double reflection.

    Returns per-point orthonormal (x, y) spanning the normal plane of each
    tangent; twist-free in the rotation-minimizing sense.
    """
    k = len(points)
    xs = np.empty((k, 3))
    x = x0 - np.dot(x0, tangents[0]) * tangents[0]
    nx = np.linalg.norm(x)
    if nx < 1e-9:
        raise InputError("frame reference direction is parallel to the skeleton")
    x /= nx
    xs[0] = x
    for j in range(k - 1):
        v1 = points[j + 1] - points[j]
        c1 = np.dot(v1, v1)
        if c1 < 1e-24:
            xl = xs[j]
            tl = tangents[j]
        else:
            xl = xs[j] - (2.0 / c1) * np.dot(v1, xs[j]) * v1
            tl = tangents[j] - (2.0 / c1) * np.dot(v1, tangents[j]) * v1
        v2 = tangents[j + 1] - tl
        c2 = np.dot(v2, v2)
        if c2 < 1e-24:
            xn = xl
        else:
            xn = xl - (2.0 / c2) * np.dot(v2, xl) * v2
        # clean residual drift off the normal plane
        xn = xn - np.dot(xn, tangents[j + 1]) * tangents[j + 1]
        xs[j + 1] = xn / np.linalg.norm(xn)
    ys = np.cross(tangents, xs)
    return xs, ys


# ---------------------------------------------------------------------------
# plane slicing


def slice_mesh_plane(mesh, origin, normal):
    """Intersect a mesh with a plane.

    Returns ``(loops, auto_closed)``: each loop is an (k, 3) array of points
    in chaining order; ``auto_closed`` marks chains whose endpoints had to be
    connected because the mesh had a hole crossing the plane.
    """
    origin = np.asarray(origin, dtype=np.float64)
    normal = np.asarray(normal, dtype=np.float64)
    s = (mesh.vertices - origin) @ normal
    # nudge vertices exactly on the plane so every crossing is transversal
    s = np.where(np.abs(s) < 1e-12, 1e-12, s)

    fs = s[mesh.faces]
    mixed = ~(np.all(fs > 0, axis=1) | np.all(fs < 0, axis=1))
    face_ids = np.nonzero(mixed)[0]
    if len(face_ids) == 0:
        return [], []

    edge_point = {}

    def intersect(va, vb):
        a, b = (va, vb) if va < vb else (vb, va)
        key = (a, b)
        if key not in edge_point:
            t = s[a] / (s[a] - s[b])
            edge_point[key] = mesh.vertices[a] + t * (mesh.vertices[b] - mesh.vertices[a])
        return key

    segments = []
    for f in face_ids:
        i0, i1, i2 = mesh.faces[f]
        keys = []
        for a, b in ((i0, i1), (i1, i2), (i2, i0)):
            if s[a] * s[b] < 0:
                keys.append(intersect(a, b))
        if len(keys) == 2:
            segments.append((keys[0], keys[1]))

    adjacency = {}
    for a, b in segments:
        adjacency.setdefault(a, []).append(b)
        adjacency.setdefault(b, []).append(a)

    visited = set()
    loops = []
    auto_closed = []
    for a, b in segments:
        if (a, b) in visited or (b, a) in visited:
            continue
        chain = [a, b]
        visited.add((a, b))
        # extend forward until the chain closes or dead-ends
        while True:
            tail = chain[-1]
            prev = chain[-2]
            nxt = None
            for cand in adjacency[tail]:
                if cand != prev and (tail, cand) not in visited and (cand, tail) not in visited:
                    nxt = cand
                    break
            if nxt is None:
                break
            visited.add((tail, nxt))
            if nxt == chain[0]:
                chain.append(nxt)
                break
            chain.append(nxt)
        closed = len(chain) > 2 and chain[-1] == chain[0]
        if closed:
            chain = chain[:-1]
        else:
            # extend backward for open chains before closing them
            while True:
                head = chain[0]
                after = chain[1]
                nxt = None
                for cand in adjacency[head]:
                    if cand != after and (head, cand) not in visited and (cand, head) not in visited:
                        nxt = cand
                        break
                if nxt is None:
                    break
                visited.add((head, nxt))
                chain.insert(0, nxt)
        if len(chain) < 3:
            continue
        loops.append(np.array([edge_point[k] for k in chain]))
        auto_closed.append(not closed)
    return loops, auto_closed


# ---------------------------------------------------------------------------
# loop abstraction (2D, in the section frame)


def _polyline_lengths(pts):
    return np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)


def _arc_centroid(pts):
    """Centroid weighted by segment length (sampling-invariant)."""
    nxt = np.roll(pts, -1, axis=0)
    lens = np.linalg.norm(nxt - pts, axis=1)
    mids = 0.5 * (pts + nxt)
    total = lens.sum()
    if total <= 0:
        return pts.mean(axis=0)
    return (mids * lens[:, None]).sum(axis=0) / total


def _signed_area(pts2):
    x, y = pts2[:, 0], pts2[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _point_in_polygon(point, pts2):
    x, y = point
    px, py = pts2[:, 0], pts2[:, 1]
    qx, qy = np.roll(px, -1), np.roll(py, -1)
    crosses = ((py > y) != (qy > y)) & (
        x < px + (y - py) * (qx - px) / np.where(qy != py, qy - py, 1.0)
    )
    return bool(np.count_nonzero(crosses) % 2)


def abstract_section(loop2, smoothing_weight=DEFAULT_SMOOTHING,
                     concavity_threshold=DEFAULT_CONCAVITY):
    """Clean one cross-section loop (2D points in the section plane).

    One pass of arc-length-weighted Laplacian smoothing (rescaled about the
    centroid so the mean radius is preserved and a circle is a true fixed
    point), then deep concavities are bridged by their chord. Output is
    counterclockwise.
    """
    pts = np.asarray(loop2, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise GcBuildError("cross-section loop needs at least 3 points")
    if _signed_area(pts) < 0:
        pts = pts[::-1].copy()

    c0 = _arc_centroid(pts)
    r0 = float(np.mean(np.linalg.norm(pts - c0, axis=1)))
    if r0 < 1e-9:
        raise GcBuildError("cross-section loop degenerates to a point")

    if smoothing_weight > 0:
        prev_pts = np.roll(pts, 1, axis=0)
        next_pts = np.roll(pts, -1, axis=0)
        l_prev = np.linalg.norm(pts - prev_pts, axis=1)
        l_next = np.linalg.norm(next_pts - pts, axis=1)
        denom = np.where(l_prev + l_next > 0, l_prev + l_next, 1.0)
        mid = prev_pts + ((l_prev / denom)[:, None]) * (next_pts - prev_pts)
        pts = (1.0 - smoothing_weight) * pts + smoothing_weight * mid
        c = _arc_centroid(pts)
        r = float(np.mean(np.linalg.norm(pts - c, axis=1)))
        if r < 1e-9:
            raise GcBuildError("cross-section loop collapsed under smoothing")
        pts = c + (pts - c) * (r0 / r)

    if concavity_threshold > 0 and len(pts) >= 4:
        pts = _bridge_concavities(pts, concavity_threshold)

    if _signed_area(pts) <= 1e-10:
        raise GcBuildError("cross-section loop has near-zero area after abstraction")
    return pts


def _bridge_concavities(pts, threshold):
    c = _arc_centroid(pts)
    mean_r = float(np.mean(np.linalg.norm(pts - c, axis=1)))
    try:
        hull = ConvexHull(pts)
    except QhullError:
        return pts
    on_hull = np.zeros(len(pts), dtype=bool)
    on_hull[hull.vertices] = True
    if on_hull.all():
        return pts

    hull_idx = np.nonzero(on_hull)[0]
    out = pts.copy()
    for k in range(len(hull_idx)):
        a = hull_idx[k]
        b = hull_idx[(k + 1) % len(hull_idx)]
        if b > a:
            pocket = np.arange(a + 1, b)
        else:
            pocket = np.concatenate([np.arange(a + 1, len(pts)), np.arange(0, b)])
        if len(pocket) == 0:
            continue
        pa, pb = pts[a], pts[b]
        chord = pb - pa
        clen = np.linalg.norm(chord)
        if clen < 1e-12:
            continue
        rel = pts[pocket] - pa
        t = np.clip(rel @ chord / (clen * clen), 0.0, 1.0)
        depth = np.linalg.norm(rel - t[:, None] * chord, axis=1).max()
        if depth > threshold * mean_r:
            frac = (np.arange(len(pocket)) + 1.0) / (len(pocket) + 1.0)
            out[pocket] = pa + frac[:, None] * chord
    return out


def resample_closed_loop(pts, m):
    """Resample a closed polyline to m points uniform by arc length."""
    pts = np.asarray(pts, dtype=np.float64)
    seg = np.roll(pts, -1, axis=0) - pts
    lens = np.linalg.norm(seg, axis=1)
    total = lens.sum()
    if total <= 0:
        raise GcBuildError("cannot resample a zero-length loop")
    cum = np.concatenate([[0.0], np.cumsum(lens)])
    targets = np.arange(m) * (total / m)
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(pts) - 1)
    local = (targets - cum[idx]) / np.where(lens[idx] > 0, lens[idx], 1.0)
    return pts[idx] + local[:, None] * seg[idx]


# ---------------------------------------------------------------------------
# cross sections


class CrossSection:
    """One abstracted loop on a skeleton-orthogonal plane.

    ``loop`` stores M points counterclockwise about the tangent; angle
    lookups interpolate between the loop points bracketing the requested
    polar angle about the skeleton point ``center``.
    """

    def __init__(self, h, center, x_axis, y_axis, tangent, loop,
                 auto_closed=False):
        self.h = float(h)
        self.center = np.asarray(center, dtype=np.float64)
        self.x_axis = np.asarray(x_axis, dtype=np.float64)
        self.y_axis = np.asarray(y_axis, dtype=np.float64)
        self.tangent = np.asarray(tangent, dtype=np.float64)
        self.loop = np.asarray(loop, dtype=np.float64)
        self.auto_closed = bool(auto_closed)

        rel = self.loop - self.center
        lx = rel @ self.x_axis
        ly = rel @ self.y_axis
        ang = np.mod(np.arctan2(ly, lx), TWO_PI)
        order = np.argsort(ang, kind="stable")
        self._ang = ang[order]
        self._pts = self.loop[order]
        self._radii = np.hypot(lx, ly)[order]
        self.mean_radius = float(self._radii.mean())
        # star-shaped about the center: loop order and angular order agree
        shift = np.argmin(ang)
        rolled = np.roll(ang, -shift)
        self.non_star = bool(np.any(np.diff(rolled) < -1e-12))

    def points_at_angles(self, phis):
        """Loop points at the given polar angles, (k, 3)."""
        phis = np.mod(np.atleast_1d(np.asarray(phis, dtype=np.float64)), TWO_PI)
        m = len(self._ang)
        k = np.searchsorted(self._ang, phis, side="right")
        ia = (k - 1) % m
        ib = k % m
        th_a = self._ang[ia]
        gap = np.mod(self._ang[ib] - th_a, TWO_PI)
        gap = np.where(gap < 1e-12, 1.0, gap)
        frac = np.mod(phis - th_a, TWO_PI) / gap
        frac = np.clip(frac, 0.0, 1.0)
        return self._pts[ia] + frac[:, None] * (self._pts[ib] - self._pts[ia])

    def point_at_angle(self, phi):
        return self.points_at_angles([phi])[0]

    def to_json(self):
        return {
            "h": self.h,
            "center": self.center.tolist(),
            "x_axis": self.x_axis.tolist(),
            "y_axis": self.y_axis.tolist(),
            "tangent": self.tangent.tolist(),
            "loop": self.loop.tolist(),
            "auto_closed": self.auto_closed,
        }

    @classmethod
    def from_json(cls, data):
        return cls(
            h=data["h"], center=data["center"], x_axis=data["x_axis"],
            y_axis=data["y_axis"], tangent=data["tangent"], loop=data["loop"],
            auto_closed=data.get("auto_closed", False),
        )


def _select_loop(loops, auto_closed_flags, skeleton_point, x_axis, y_axis):
    """Pick the intersection loop for a section: nearest centroid to the
    skeleton point, then widen to the outermost loop enclosing it so annular
    slices keep only the outer wall."""
    centroids = [_arc_centroid(lp) for lp in loops]
    dists = [np.linalg.norm(c - skeleton_point) for c in centroids]
    pick = int(np.argmin(dists))

    def to2d(lp):
        rel = lp - skeleton_point
        return np.stack([rel @ x_axis, rel @ y_axis], axis=1)

    pick2d = to2d(loops[pick])
    probe = pick2d[0]
    enclosing = []
    for j, lp in enumerate(loops):
        if j == pick:
            continue
        if _point_in_polygon(probe, to2d(lp)):
            enclosing.append(j)
    # outermost = the enclosing loop not contained in any other enclosing loop
    current = pick
    for j in enclosing:
        inner = to2d(loops[current])[0]
        if current == pick or _point_in_polygon(inner, to2d(loops[j])):
            current = j
    return current, auto_closed_flags[pick] or auto_closed_flags[current]


# ---------------------------------------------------------------------------
# the generalized cylinder


class GeneralizedCylinder:
    """Immutable part model; all queries are safe to call concurrently."""

    def __init__(self, skeleton, sections, loop_points, reference_direction,
                 warnings=None):
        self.skeleton = skeleton
        self.sections = sections
        self.n = len(sections)
        self.M = int(loop_points)
        self.reference_direction = np.asarray(reference_direction, dtype=np.float64)
        self.warnings = dict(warnings or {})
        self._init_derived()

    # -- construction helpers ------------------------------------------------

    def _init_derived(self):
        H = self.skeleton.height
        self.H = H
        if self.n < 2:
            raise GcBuildError("need at least 2 cross sections")
        self._sec_step = H / (self.n - 1)

        # dense frame grid for parameterization (includes section heights)
        base = np.linspace(0.0, H, L_TABLE_INTERVALS + 1)
        sec_h = np.array([s.h for s in self.sections])
        grid = np.union1d(base, sec_h)
        self._grid_h = grid
        pts = np.array([self.skeleton.point_at(h) for h in grid])
        tans = np.array([self.skeleton.tangent_at(h) for h in grid])
        xs, ys = _transport_frames(pts, tans, self.reference_direction)
        self._grid_pts = pts
        self._grid_tan = tans
        self._grid_x = xs
        self._grid_y = ys

        # surface table: sigma on (257 heights x M angle buckets)
        self._bucket_phi = TWO_PI * np.arange(self.M) / self.M
        self._table_h = base
        sec_pts = np.stack(
            [s.points_at_angles(self._bucket_phi) for s in self.sections]
        )  # (n, M, 3)
        self._sec_bucket_pts = sec_pts
        rows = self._blend_rows(base)  # (257, M, 3)
        self._surface_grid = rows
        chords = np.linalg.norm(np.diff(rows, axis=0), axis=2)  # (256, M)
        self._L_table = np.vstack([np.zeros((1, self.M)), np.cumsum(chords, axis=0)])
        self._sec_mean_radius = np.array([s.mean_radius for s in self.sections])

    def _blend_rows(self, heights):
        """sigma at every (height, angle bucket) pair, (len(heights), M, 3)."""
        t = np.asarray(heights, dtype=np.float64) / self._sec_step
        i0 = np.clip(np.floor(t).astype(int), 0, self.n - 2)
        frac = np.clip(t - i0, 0.0, 1.0)
        lo = self._sec_bucket_pts[i0]
        hi = self._sec_bucket_pts[i0 + 1]
        return lo + frac[:, None, None] * (hi - lo)

    # -- queries ---------------------------------------------------------------

    def surface_point(self, h, phi):
        """sigma(h, phi). Returns ``(point, h_clamped)``."""
        clamped = bool(h < 0.0 or h > self.H)
        h = float(np.clip(h, 0.0, self.H))
        phi = float(np.mod(phi, TWO_PI))
        t = h / self._sec_step
        i0 = min(max(int(t), 0), self.n - 2)
        frac = min(max(t - i0, 0.0), 1.0)
        a = self.sections[i0].point_at_angle(phi)
        b = self.sections[i0 + 1].point_at_angle(phi)
        return a + frac * (b - a), clamped

    def curve_points(self, heights, phi):
        """sigma along one constant-phi curve, (k, 3)."""
        phi = float(np.mod(phi, TWO_PI))
        sec_curve = np.array([s.point_at_angle(phi) for s in self.sections])
        t = np.asarray(heights, dtype=np.float64) / self._sec_step
        i0 = np.clip(t.astype(int), 0, self.n - 2)
        frac = np.clip(t - i0, 0.0, 1.0)
        return sec_curve[i0] + frac[:, None] * (sec_curve[i0 + 1] - sec_curve[i0])

    def surface_distance(self, h, phi):
        """Arc length of the constant-phi curve from height 0 to h."""
        h = float(np.clip(h, 0.0, self.H))
        if h == 0.0:
            return 0.0
        steps = max(1, int(np.ceil(h / (self.H / L_TABLE_INTERVALS))))
        heights = np.linspace(0.0, h, steps + 1)
        curve = self.curve_points(heights, phi)
        return float(np.linalg.norm(np.diff(curve, axis=0), axis=1).sum())

    def max_surface_distance(self, phi):
        """L at the part's top for this angle (table-interpolated)."""
        col = self._phi_column(phi)
        return float(col[-1])

    def _phi_column(self, phi):
        phi = float(np.mod(phi, TWO_PI))
        b = phi / (TWO_PI / self.M)
        b0 = int(b) % self.M
        b1 = (b0 + 1) % self.M
        frac = b - int(b)
        return (1.0 - frac) * self._L_table[:, b0] + frac * self._L_table[:, b1]

    def invert_surface_distance(self, phi, L_target):
        """Smallest h with surface_distance(h, phi) >= L_target.

        Linear scan over the precomputed length table, one interpolation
        step of refinement. Returns ``(h, clamped)``; L_target outside
        [0, max] clamps to the base or the top and is flagged.
        """
        col = self._phi_column(phi)
        L_target = float(L_target)
        if L_target < 0.0:
            return 0.0, True
        if L_target == 0.0:
            return 0.0, False
        if L_target > col[-1]:
            return self.H, True
        j = int(np.argmax(col >= L_target))
        if j == 0:
            return 0.0, False
        l0, l1 = col[j - 1], col[j]
        h0, h1 = self._table_h[j - 1], self._table_h[j]
        if l1 <= l0:
            return float(h1), False
        t = (L_target - l0) / (l1 - l0)
        return float(h0 + t * (h1 - h0)), False

    def frame_at(self, h):
        """Interpolated rotation-minimizing frame (x, y, tangent) at h."""
        h = float(np.clip(h, 0.0, self.H))
        j = int(np.searchsorted(self._grid_h, h, side="right")) - 1
        j = min(max(j, 0), len(self._grid_h) - 2)
        h0, h1 = self._grid_h[j], self._grid_h[j + 1]
        t = 0.0 if h1 <= h0 else (h - h0) / (h1 - h0)
        tan = self._grid_tan[j] + t * (self._grid_tan[j + 1] - self._grid_tan[j])
        tan = tan / np.linalg.norm(tan)
        x = self._grid_x[j] + t * (self._grid_x[j + 1] - self._grid_x[j])
        x = x - np.dot(x, tan) * tan
        x = x / np.linalg.norm(x)
        y = np.cross(tan, x)
        return x, y, tan

    def mean_radius_at(self, h):
        i = int(round(float(np.clip(h, 0.0, self.H)) / self._sec_step))
        return float(self._sec_mean_radius[min(max(i, 0), self.n - 1)])

    def parameterize(self, p, normal):
        """Polar coordinates of a surface point.

        Casts a ray from p opposite the outward normal and takes the skeleton
        height closest to that ray; if the ray misses the skeleton by more
        than a quarter of the local section radius the nearest skeleton point
        is used instead and the fallback is flagged. Returns
        ``(GcCoordinate, used_fallback)``.
        """
        p = np.asarray(p, dtype=np.float64)
        d = -np.asarray(normal, dtype=np.float64)
        nd = np.linalg.norm(d)
        if nd < 1e-12:
            raise InputError("zero-length normal in parameterize")
        d = d / nd

        rel = self._grid_pts - p
        t_ray = rel @ d
        t_ray = np.maximum(t_ray, 0.0)
        closest_on_ray = p + t_ray[:, None] * d
        ray_dist = np.linalg.norm(self._grid_pts - closest_on_ray, axis=1)
        j = int(np.argmin(ray_dist))
        h = self._refine_height(ray_dist, j)

        used_fallback = False
        if ray_dist[j] > RAY_FALLBACK_FRACTION * self.mean_radius_at(self._grid_h[j]):
            pt_dist = np.linalg.norm(rel, axis=1)
            j = int(np.argmin(pt_dist))
            h = self._refine_height(pt_dist, j)
            used_fallback = True

        o = self.skeleton.point_at(h)
        x, y, _ = self.frame_at(h)
        v = p - o
        phi = float(np.mod(np.arctan2(v @ y, v @ x), TWO_PI))
        L = self.surface_distance(h, phi)
        return GcCoordinate(h=h, phi=phi, L=L), used_fallback

    def _refine_height(self, dists, j):
        """Quadratic refinement of an argmin over the frame grid heights."""
        if 0 < j < len(dists) - 1:
            d0, d1, d2 = dists[j - 1], dists[j], dists[j + 1]
            denom = d0 - 2.0 * d1 + d2
            if denom > 1e-15:
                shift = 0.5 * (d0 - d2) / denom
                shift = float(np.clip(shift, -1.0, 1.0))
                h0, h1, h2 = self._grid_h[j - 1], self._grid_h[j], self._grid_h[j + 1]
                step = 0.5 * (h2 - h0)
                return float(np.clip(h1 + shift * step, 0.0, self.H))
        return float(self._grid_h[j])

    # -- serialization -----------------------------------------------------------

    def to_json(self):
        # the length table is derived data (from_json rebuilds it) but is
        # written out so the artifact is inspectable on its own
        return {
            "schema": "gc",
            "version": 1,
            "units": "cm",
            "n": self.n,
            "M": self.M,
            "height": self.H,
            "reference_direction": self.reference_direction.tolist(),
            "skeleton": self.skeleton.to_json(),
            "sections": [s.to_json() for s in self.sections],
            "length_table": {
                "heights": self._table_h.tolist(),
                "angles": self._bucket_phi.tolist(),
                "values": self._L_table.tolist(),
            },
            "warnings": self.warnings,
        }

    @classmethod
    def from_json(cls, data):
        if data.get("schema") != "gc":
            raise InputError("not a generalized-cylinder JSON document")
        skeleton = Skeleton.from_json(data["skeleton"])
        sections = [CrossSection.from_json(s) for s in data["sections"]]
        return cls(
            skeleton=skeleton,
            sections=sections,
            loop_points=data["M"],
            reference_direction=data["reference_direction"],
            warnings=data.get("warnings"),
        )


def save_gc(gc, path):
    with open(path, "w") as fh:
        json.dump(gc.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_gc(path):
    with open(path) as fh:
        return GeneralizedCylinder.from_json(json.load(fh))


def export_section_wireframe(gc, path):
    """Diagnostic OBJ: every section loop as a closed line strip."""
    with open(path, "w") as fh:
        base = 1
        for sec in gc.sections:
            for p in sec.loop:
                fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
            ids = " ".join(str(base + k) for k in range(len(sec.loop)))
            fh.write(f"l {ids} {base}\n")
            base += len(sec.loop)


def export_surface_obj(gc, path):
    """Diagnostic OBJ: the reconstructed tube as quad strips between the
    angle-aligned section rings (open at both ends)."""
    rings = gc._sec_bucket_pts  # (n, M, 3), same angles on every ring
    n, m, _ = rings.shape
    with open(path, "w") as fh:
        fh.write(f"# reconstructed surface, {n} rings x {m} points\n")
        for ring in rings:
            for p in ring:
                fh.write(f"v {p[0]:.9g} {p[1]:.9g} {p[2]:.9g}\n")
        for i in range(n - 1):
            for k in range(m):
                a = i * m + k + 1
                b = i * m + (k + 1) % m + 1
                c = (i + 1) * m + (k + 1) % m + 1
                d = (i + 1) * m + k + 1
                fh.write(f"f {a} {b} {c}\nf {a} {c} {d}\n")


def build_gc(part_mesh, skeleton, n=DEFAULT_SECTIONS, M=DEFAULT_LOOP_POINTS,
             smoothing_weight=DEFAULT_SMOOTHING,
             concavity_threshold=DEFAULT_CONCAVITY,
             reference_direction=None):
    """Cut n evenly spaced cross sections and assemble the part model.

    Each section keeps the intersection loop around the skeleton (outermost
    wall for hollow parts), abstracted and resampled to M points. Frames are
    rotation-minimizing along the skeleton, seeded by ``reference_direction``
    (default: the global axis least aligned with the first tangent).
    """
    if n < 3:
        raise InputError("need at least 3 cross sections")
    if M < 8:
        raise InputError("need at least 8 points per section loop")
    H = skeleton.height
    heights = np.linspace(0.0, H, n)

    if reference_direction is None:
        reference_direction = default_reference_direction(skeleton.tangent_at(0.0))
    reference_direction = np.asarray(reference_direction, dtype=np.float64)

    grid_pts = np.array([skeleton.point_at(h) for h in heights])
    grid_tan = np.array([skeleton.tangent_at(h) for h in heights])
    xs, ys = _transport_frames(grid_pts, grid_tan, reference_direction)

    sections = []
    auto_closed_sections = []
    non_star_sections = []
    for i, h in enumerate(heights):
        o = grid_pts[i]
        tan = grid_tan[i]
        loops, open_flags = slice_mesh_plane(part_mesh, o, tan)
        if not loops:
            raise GcBuildError(
                f"no cross-section at height {h:.4f} cm: skeleton exits the mesh"
            )
        pick, was_open = _select_loop(loops, open_flags, o, xs[i], ys[i])
        loop3 = loops[pick]
        rel = loop3 - o
        loop2 = np.stack([rel @ xs[i], rel @ ys[i]], axis=1)
        loop2 = abstract_section(loop2, smoothing_weight, concavity_threshold)
        loop2 = resample_closed_loop(loop2, M)
        loop3 = o + loop2[:, 0:1] * xs[i] + loop2[:, 1:2] * ys[i]
        sec = CrossSection(h=h, center=o, x_axis=xs[i], y_axis=ys[i],
                           tangent=tan, loop=loop3, auto_closed=was_open)
        if was_open:
            auto_closed_sections.append(i)
        if sec.non_star:
            non_star_sections.append(i)
        sections.append(sec)

    warnings = {
        "auto_closed_sections": auto_closed_sections,
        "non_star_sections": non_star_sections,
    }
    return GeneralizedCylinder(
        skeleton=skeleton, sections=sections, loop_points=M,
        reference_direction=reference_direction, warnings=warnings,
    )


def evaluate_surface(gc, h, phi):
    """sigma(h, phi); h outside [0, H] is clamped."""
    point, _ = gc.surface_point(h, phi)
    return point


def surface_distance(gc, h, phi):
    return gc.surface_distance(h, phi)


def invert_surface_distance(gc, phi, L_target):
    return gc.invert_surface_distance(phi, L_target)


def parameterize(gc, p, normal):
    return gc.parameterize(p, normal)
