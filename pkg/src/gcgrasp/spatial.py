"""Spatial queries against triangle meshes: exact closest points and
generalized winding numbers.

A flat median-split BVH over triangles is built once per mesh (numpy) and
traversed in numba kernels, so batch queries over millions of points stay
fast without giving up exactness: the closest-point search is branch-and-
bound over true point-triangle distances, and the winding number is the
exact solid-angle sum over all faces.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

LEAF_SIZE = 4
FOUR_PI = 4.0 * np.pi


def _build_bvh(tri_min, tri_max, centroids):
    """Median-split BVH. Returns flat node arrays plus the triangle permutation."""
    m = len(centroids)
    perm = np.arange(m)
    max_nodes = max(1, 2 * m)
    bmin = np.empty((max_nodes, 3))
    bmax = np.empty((max_nodes, 3))
    left = np.full(max_nodes, -1, dtype=np.int32)
    right = np.full(max_nodes, -1, dtype=np.int32)
    start = np.zeros(max_nodes, dtype=np.int32)
    count = np.zeros(max_nodes, dtype=np.int32)

    n_nodes = 1
    stack = [(0, 0, m)]
    while stack:
        node, lo, hi = stack.pop()
        ids = perm[lo:hi]
        bmin[node] = tri_min[ids].min(axis=0)
        bmax[node] = tri_max[ids].max(axis=0)
        if hi - lo <= LEAF_SIZE:
            start[node] = lo
            count[node] = hi - lo
            continue
        cen = centroids[ids]
        axis = int(np.argmax(cen.max(axis=0) - cen.min(axis=0)))
        order = np.argsort(cen[:, axis], kind="stable")
        perm[lo:hi] = ids[order]
        mid = (lo + hi) // 2
        l, r = n_nodes, n_nodes + 1
        n_nodes += 2
        left[node], right[node] = l, r
        stack.append((l, lo, mid))
        stack.append((r, mid, hi))

    sl = slice(0, n_nodes)
    return bmin[sl], bmax[sl], left[sl], right[sl], start[sl], count[sl], perm


@njit(cache=True, inline="always")
def _aabb_dist2(p, lo, hi):
    d2 = 0.0
    for k in range(3):
        v = p[k]
        if v < lo[k]:
            d = lo[k] - v
            d2 += d * d
        elif v > hi[k]:
            d = v - hi[k]
            d2 += d * d
    return d2


@njit(cache=True)
def _closest_on_triangle(a, b, c, p, out):
    """Closest point to p on triangle abc (Ericson, Real-Time Collision Detection)."""
    ab0 = b[0] - a[0]
    ab1 = b[1] - a[1]
    ab2 = b[2] - a[2]
    ac0 = c[0] - a[0]
    ac1 = c[1] - a[1]
    ac2 = c[2] - a[2]
    ap0 = p[0] - a[0]
    ap1 = p[1] - a[1]
    ap2 = p[2] - a[2]

    d1 = ab0 * ap0 + ab1 * ap1 + ab2 * ap2
    d2 = ac0 * ap0 + ac1 * ap1 + ac2 * ap2
    if d1 <= 0.0 and d2 <= 0.0:
        out[0], out[1], out[2] = a[0], a[1], a[2]
        return

    bp0 = p[0] - b[0]
    bp1 = p[1] - b[1]
    bp2 = p[2] - b[2]
    d3 = ab0 * bp0 + ab1 * bp1 + ab2 * bp2
    d4 = ac0 * bp0 + ac1 * bp1 + ac2 * bp2
    if d3 >= 0.0 and d4 <= d3:
        out[0], out[1], out[2] = b[0], b[1], b[2]
        return

    vc = d1 * d4 - d3 * d2
    if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
        denom = d1 - d3
        v = d1 / denom if denom != 0.0 else 0.0
        out[0] = a[0] + v * ab0
        out[1] = a[1] + v * ab1
        out[2] = a[2] + v * ab2
        return

    cp0 = p[0] - c[0]
    cp1 = p[1] - c[1]
    cp2 = p[2] - c[2]
    d5 = ab0 * cp0 + ab1 * cp1 + ab2 * cp2
    d6 = ac0 * cp0 + ac1 * cp1 + ac2 * cp2
    if d6 >= 0.0 and d5 <= d6:
        out[0], out[1], out[2] = c[0], c[1], c[2]
        return

    vb = d5 * d2 - d1 * d6
    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
        denom = d2 - d6
        w = d2 / denom if denom != 0.0 else 0.0
        out[0] = a[0] + w * ac0
        out[1] = a[1] + w * ac1
        out[2] = a[2] + w * ac2
        return

    va = d3 * d6 - d5 * d4
    if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
        denom = (d4 - d3) + (d5 - d6)
        w = (d4 - d3) / denom if denom != 0.0 else 0.0
        out[0] = b[0] + w * (c[0] - b[0])
        out[1] = b[1] + w * (c[1] - b[1])
        out[2] = b[2] + w * (c[2] - b[2])
        return

    denom = va + vb + vc
    v = vb / denom
    w = vc / denom
    out[0] = a[0] + ab0 * v + ac0 * w
    out[1] = a[1] + ab1 * v + ac1 * w
    out[2] = a[2] + ab2 * v + ac2 * w


@njit(cache=True, parallel=True)
def _bvh_closest_batch(points, bmin, bmax, left, right, start, count, ta, tb, tc, perm):
    n = points.shape[0]
    out_pts = np.empty((n, 3))
    out_d2 = np.empty(n)
    out_face = np.empty(n, dtype=np.int64)
    for i in prange(n):
        p = points[i]
        stack = np.empty(128, dtype=np.int32)
        cand = np.empty(3)
        best = np.empty(3)
        best_d2 = 1e300
        best_face = -1
        top = 0
        stack[top] = 0
        top += 1
        while top > 0:
            top -= 1
            node = stack[top]
            if _aabb_dist2(p, bmin[node], bmax[node]) >= best_d2:
                continue
            c = count[node]
            if c > 0:
                s = start[node]
                for k in range(s, s + c):
                    _closest_on_triangle(ta[k], tb[k], tc[k], p, cand)
                    dx = cand[0] - p[0]
                    dy = cand[1] - p[1]
                    dz = cand[2] - p[2]
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 < best_d2:
                        best_d2 = d2
                        best[0], best[1], best[2] = cand[0], cand[1], cand[2]
                        best_face = perm[k]
            else:
                l = left[node]
                r = right[node]
                dl = _aabb_dist2(p, bmin[l], bmax[l])
                dr = _aabb_dist2(p, bmin[r], bmax[r])
                if dl <= dr:
                    if dr < best_d2:
                        stack[top] = r
                        top += 1
                    if dl < best_d2:
                        stack[top] = l
                        top += 1
                else:
                    if dl < best_d2:
                        stack[top] = l
                        top += 1
                    if dr < best_d2:
                        stack[top] = r
                        top += 1
        out_pts[i] = best
        out_d2[i] = best_d2
        out_face[i] = best_face
    return out_pts, out_d2, out_face


@njit(cache=True, parallel=True)
def _winding_batch(points, ta, tb, tc):
    """Exact generalized winding number (solid-angle sum / 4*pi)."""
    n = points.shape[0]
    m = ta.shape[0]
    out = np.empty(n)
    for i in prange(n):
        px, py, pz = points[i, 0], points[i, 1], points[i, 2]
        total = 0.0
        for k in range(m):
            ax = ta[k, 0] - px
            ay = ta[k, 1] - py
            az = ta[k, 2] - pz
            bx = tb[k, 0] - px
            by = tb[k, 1] - py
            bz = tb[k, 2] - pz
            cx = tc[k, 0] - px
            cy = tc[k, 1] - py
            cz = tc[k, 2] - pz
            la = np.sqrt(ax * ax + ay * ay + az * az)
            lb = np.sqrt(bx * bx + by * by + bz * bz)
            lc = np.sqrt(cx * cx + cy * cy + cz * cz)
            det = (
                ax * (by * cz - bz * cy)
                - ay * (bx * cz - bz * cx)
                + az * (bx * cy - by * cx)
            )
            denom = (
                la * lb * lc
                + (ax * bx + ay * by + az * bz) * lc
                + (bx * cx + by * cy + bz * cz) * la
                + (cx * ax + cy * ay + cz * az) * lb
            )
            total += np.arctan2(det, denom)
        out[i] = 2.0 * total / FOUR_PI
    return out


class MeshQuery:
    """Immutable spatial index over a mesh; safe for concurrent queries."""

    def __init__(self, mesh):
        tri = mesh.vertices[mesh.faces]
        self._ta = np.ascontiguousarray(tri[:, 0])
        self._tb = np.ascontiguousarray(tri[:, 1])
        self._tc = np.ascontiguousarray(tri[:, 2])
        tri_min = tri.min(axis=1)
        tri_max = tri.max(axis=1)
        centroids = tri.mean(axis=1)
        (self._bmin, self._bmax, self._left, self._right,
         self._start, self._count, perm) = _build_bvh(tri_min, tri_max, centroids)
        self._perm = perm.astype(np.int64)
        # Leaves reference permuted triangle order.
        self._pta = np.ascontiguousarray(self._ta[perm])
        self._ptb = np.ascontiguousarray(self._tb[perm])
        self._ptc = np.ascontiguousarray(self._tc[perm])

    def closest_points(self, points):
        """Exact nearest surface points.

        Returns ``(points (n,3), distances (n,), face_ids (n,))``.
        """
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        pts, d2, face = _bvh_closest_batch(
            points, self._bmin, self._bmax, self._left, self._right,
            self._start, self._count, self._pta, self._ptb, self._ptc, self._perm,
        )
        return pts, np.sqrt(np.maximum(d2, 0.0)), face

    def winding_numbers(self, points):
        points = np.ascontiguousarray(np.atleast_2d(points), dtype=np.float64)
        return _winding_batch(points, self._ta, self._tb, self._tc)

    def contains(self, points):
        """Inside test: generalized winding number above 0.5."""
        return self.winding_numbers(points) > 0.5


def closest_surface_point(mesh, query):
    """Exact closest point on ``mesh`` to a single query point.

    Returns ``(point, distance, face_id)``; the mesh's spatial index is
    built on first use and reused afterwards.
    """
    pts, dist, face = mesh.query.closest_points(np.asarray(query, dtype=np.float64))
    return pts[0], float(dist[0]), int(face[0])
