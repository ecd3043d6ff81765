"""Procedural watertight test solids, all in centimeters.

Everything here is exact by construction (shared vertices, consistent
outward orientation), which makes these meshes usable as analytic oracles:
a lathed profile has a known radius at every height, an icosphere is a
known distance field, a box has known volume.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .mesh import TriMesh


def surface_of_revolution(heights, radii, segments=48, center=(0.0, 0.0, 0.0)):
    """Lathe a radius profile around the z axis into a closed solid.

    ``heights`` must increase strictly; ``radii`` must be positive except
    optionally at the two ends, where zero collapses the ring to an apex.
    Flat ends are capped with triangle fans.
    """
    heights = np.asarray(heights, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    if heights.ndim != 1 or heights.shape != radii.shape or len(heights) < 2:
        raise InputError("profile needs matching 1-d heights and radii, length >= 2")
    if np.any(np.diff(heights) <= 0):
        raise InputError("profile heights must increase strictly")
    if np.any(radii < 0) or np.any(radii[1:-1] <= 0):
        raise InputError("profile radii must be positive (zero allowed only at ends)")
    if segments < 3:
        raise InputError("need at least 3 segments around the axis")

    center = np.asarray(center, dtype=np.float64)
    theta = 2.0 * np.pi * np.arange(segments) / segments
    cos_t, sin_t = np.cos(theta), np.sin(theta)

    verts = []
    rings = []  # vertex index of each ring start, or ("apex", idx)
    for z, r in zip(heights, radii):
        if r == 0.0:
            rings.append(("apex", len(verts)))
            verts.append([0.0, 0.0, z])
        else:
            rings.append(("ring", len(verts)))
            for k in range(segments):
                verts.append([r * cos_t[k], r * sin_t[k], z])

    faces = []

    def ring_idx(start, k):
        return start + (k % segments)

    # side walls between consecutive profile points
    for j in range(len(rings) - 1):
        kind0, s0 = rings[j]
        kind1, s1 = rings[j + 1]
        if kind0 == "ring" and kind1 == "ring":
            for k in range(segments):
                a = ring_idx(s0, k)
                b = ring_idx(s0, k + 1)
                c = ring_idx(s1, k + 1)
                d = ring_idx(s1, k)
                faces.append([a, b, c])
                faces.append([a, c, d])
        elif kind0 == "apex" and kind1 == "ring":
            for k in range(segments):
                faces.append([s0, ring_idx(s1, k + 1), ring_idx(s1, k)])
        elif kind0 == "ring" and kind1 == "apex":
            for k in range(segments):
                faces.append([s1, ring_idx(s0, k), ring_idx(s0, k + 1)])
        else:
            raise InputError("profile degenerates to a segment")

    # flat caps where the profile does not close to an apex
    if rings[0][0] == "ring":
        s = rings[0][1]
        ci = len(verts)
        verts.append([0.0, 0.0, heights[0]])
        for k in range(segments):
            faces.append([ci, ring_idx(s, k + 1), ring_idx(s, k)])
    if rings[-1][0] == "ring":
        s = rings[-1][1]
        ci = len(verts)
        verts.append([0.0, 0.0, heights[-1]])
        for k in range(segments):
            faces.append([ci, ring_idx(s, k), ring_idx(s, k + 1)])

    vertices = np.asarray(verts, dtype=np.float64) + center
    return TriMesh(vertices, np.asarray(faces, dtype=np.int64))


def cylinder(radius, z_min, z_max, segments=48, rings=2, center=(0.0, 0.0, 0.0)):
    """Closed circular cylinder along z."""
    heights = np.linspace(z_min, z_max, max(2, rings))
    radii = np.full_like(heights, float(radius))
    return surface_of_revolution(heights, radii, segments=segments, center=center)


def frustum(r_bottom, r_top, z_min, z_max, segments=48, rings=2,
            center=(0.0, 0.0, 0.0)):
    """Closed truncated cone along z (r_top may be 0 for a sharp cone)."""
    heights = np.linspace(z_min, z_max, max(2, rings))
    t = (heights - z_min) / (z_max - z_min)
    radii = (1 - t) * float(r_bottom) + t * float(r_top)
    return surface_of_revolution(heights, radii, segments=segments, center=center)


def tapered_handle(r_mid, z_min, z_max, waist=0.35, segments=48, rings=17,
                   center=(0.0, 0.0, 0.0)):
    """Handle-like solid: radius swells smoothly to ``r_mid`` at mid-height
    and narrows by ``waist`` toward both ends."""
    heights = np.linspace(z_min, z_max, rings)
    t = (heights - z_min) / (z_max - z_min)
    radii = r_mid * (1.0 - waist * np.cos(np.pi * t) ** 2)
    return surface_of_revolution(heights, radii, segments=segments, center=center)


def capsule(radius, z_min, z_max, segments=24, cap_rings=6):
    """Cylinder with hemispherical ends; total extent [z_min - r, z_max + r]."""
    if z_max < z_min:
        raise InputError("capsule needs z_max >= z_min")
    ang = np.linspace(0.0, np.pi / 2, cap_rings + 1)
    heights = [z_min - radius]
    radii = [0.0]
    for a in ang[1:]:
        heights.append(z_min - radius * np.cos(a))
        radii.append(radius * np.sin(a))
    if z_max > z_min:
        heights.append(z_max)
        radii.append(radius)
    for a in ang[-2::-1]:
        heights.append(z_max + radius * np.cos(a))
        radii.append(radius * np.sin(a))
    heights = np.asarray(heights)
    # guard against duplicate heights when z_min == z_max
    keep = np.concatenate([[True], np.diff(heights) > 1e-12])
    return surface_of_revolution(heights[keep], np.asarray(radii)[keep],
                                 segments=segments)


def bent_tube(tube_radius, bend_radius, angle_deg=90.0, segments_arc=32,
              segments_ring=24, overhang_deg=0.0):
    """Constant-radius tube swept along a circular arc in the xy plane.

    The arc is centered at the origin, starts at angle ``-overhang_deg`` and
    ends at ``angle_deg + overhang_deg``; the overhang lets callers keep a
    skeleton strictly interior to the solid. Both ends get flat caps.
    """
    if tube_radius >= bend_radius:
        raise InputError("tube radius must be smaller than bend radius")
    a0 = -np.deg2rad(overhang_deg)
    a1 = np.deg2rad(angle_deg + overhang_deg)
    arc = np.linspace(a0, a1, segments_arc + 1)
    phi = 2.0 * np.pi * np.arange(segments_ring) / segments_ring

    verts = []
    for th in arc:
        radial = np.array([np.cos(th), np.sin(th), 0.0])
        # (radial, -z) is right-handed about the arc tangent, so rings wind
        # counterclockwise and the quad pattern below faces outward
        axis_b = np.array([0.0, 0.0, -1.0])
        c = bend_radius * radial
        for p in phi:
            verts.append(c + tube_radius * (np.cos(p) * radial + np.sin(p) * axis_b))

    faces = []
    n = segments_ring
    for j in range(segments_arc):
        for k in range(n):
            a = j * n + k
            b = j * n + (k + 1) % n
            c = (j + 1) * n + (k + 1) % n
            d = (j + 1) * n + k
            faces.append([a, b, c])
            faces.append([a, c, d])

    # caps: fan from the arc centerline endpoints
    c_start = len(verts)
    verts.append(bend_radius * np.array([np.cos(a0), np.sin(a0), 0.0]))
    c_end = len(verts)
    verts.append(bend_radius * np.array([np.cos(a1), np.sin(a1), 0.0]))
    last = segments_arc * n
    for k in range(n):
        faces.append([c_start, (k + 1) % n, k])
        faces.append([c_end, last + k, last + (k + 1) % n])

    return TriMesh(np.asarray(verts), np.asarray(faces, dtype=np.int64))


def hollow_cylinder(r_outer, r_inner, z_min, z_max, segments=48):
    """Watertight pipe: outer wall, inner wall, annular end caps."""
    if not (0 < r_inner < r_outer):
        raise InputError("need 0 < r_inner < r_outer")
    theta = 2.0 * np.pi * np.arange(segments) / segments
    ring = np.stack([np.cos(theta), np.sin(theta), np.zeros(segments)], axis=1)
    verts = np.concatenate([
        r_outer * ring + [0, 0, z_min],  # ob
        r_outer * ring + [0, 0, z_max],  # ot
        r_inner * ring + [0, 0, z_min],  # ib
        r_inner * ring + [0, 0, z_max],  # it
    ])
    ob, ot, ib, it = 0, segments, 2 * segments, 3 * segments
    faces = []
    n = segments
    for k in range(n):
        k1 = (k + 1) % n
        faces += [[ob + k, ob + k1, ot + k1], [ob + k, ot + k1, ot + k]]  # outer
        faces += [[ib + k, it + k, it + k1], [ib + k, it + k1, ib + k1]]  # inner
        faces += [[ob + k, ib + k, ib + k1], [ob + k, ib + k1, ob + k1]]  # bottom
        faces += [[ot + k, it + k1, it + k], [ot + k, ot + k1, it + k1]]  # top
    return TriMesh(verts, np.asarray(faces, dtype=np.int64))


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)):
    """Geodesic sphere from a subdivided icosahedron."""
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
        [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
        [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts[0])
    faces = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        midpoint = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in midpoint:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                midpoint[key] = len(verts)
                verts.append(m)
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new_faces

    vertices = np.asarray(verts) * float(radius) + np.asarray(center, dtype=np.float64)
    return TriMesh(vertices, np.asarray(faces, dtype=np.int64))


def ellipsoid(semi_axes, subdivisions=3, center=(0.0, 0.0, 0.0)):
    sphere = icosphere(1.0, subdivisions)
    vertices = sphere.vertices * np.asarray(semi_axes, dtype=np.float64)
    return TriMesh(vertices + np.asarray(center, dtype=np.float64), sphere.faces)


def box(size, center=(0.0, 0.0, 0.0)):
    """Axis-aligned box, 12 triangles, outward orientation."""
    sx, sy, sz = (np.asarray(size, dtype=np.float64) * 0.5)
    cx, cy, cz = np.asarray(center, dtype=np.float64)
    v = np.array([
        [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
        [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
    ]) + np.array([cx, cy, cz])
    f = np.array([
        [0, 2, 1], [0, 3, 2],  # bottom (-z)
        [4, 5, 6], [4, 6, 7],  # top (+z)
        [0, 1, 5], [0, 5, 4],  # front (-y)
        [2, 3, 7], [2, 7, 6],  # back (+y)
        [1, 2, 6], [1, 6, 5],  # right (+x)
        [3, 0, 4], [3, 4, 7],  # left (-x)
    ], dtype=np.int64)
    return TriMesh(v, f)


def elliptic_frustum(rx_bottom, ry_bottom, rx_top, ry_top, z_min, z_max,
                     segments=48, rings=9, bump=None):
    """Elliptic truncated cone; optionally displaced outward near ``bump``.

    ``bump`` is ``(direction (3,), amplitude, sharpness)``: vertices are
    pushed radially by a Gaussian of the angle to ``direction``, which breaks
    all symmetry so rigid registration has a unique answer.
    """
    heights = np.linspace(z_min, z_max, rings)
    t = (heights - z_min) / (z_max - z_min)
    theta = 2.0 * np.pi * np.arange(segments) / segments

    verts = []
    for ti, z in zip(t, heights):
        rx = (1 - ti) * rx_bottom + ti * rx_top
        ry = (1 - ti) * ry_bottom + ti * ry_top
        for th in theta:
            verts.append([rx * np.cos(th), ry * np.sin(th), z])
    faces = []
    n = segments
    for j in range(rings - 1):
        for k in range(n):
            a = j * n + k
            b = j * n + (k + 1) % n
            c = (j + 1) * n + (k + 1) % n
            d = (j + 1) * n + k
            faces.append([a, b, c])
            faces.append([a, c, d])
    c0 = len(verts)
    verts.append([0.0, 0.0, z_min])
    c1 = len(verts)
    verts.append([0.0, 0.0, z_max])
    last = (rings - 1) * n
    for k in range(n):
        faces.append([c0, (k + 1) % n, k])
        faces.append([c1, last + k, last + (k + 1) % n])

    vertices = np.asarray(verts)
    if bump is not None:
        direction, amplitude, sharpness = bump
        d = np.asarray(direction, dtype=np.float64)
        d = d / np.linalg.norm(d)
        centered = vertices - vertices.mean(axis=0)
        norms = np.linalg.norm(centered, axis=1)
        safe = np.where(norms > 1e-12, norms, 1.0)
        cos_ang = (centered @ d) / safe
        w = np.exp(-sharpness * (1.0 - cos_ang) ** 2) * (norms > 1e-12)
        vertices = vertices + (amplitude * w)[:, None] * (centered / safe[:, None])
    return TriMesh(vertices, np.asarray(faces, dtype=np.int64))
