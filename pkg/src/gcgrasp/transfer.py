"""Transfer a contact map from a source part to a target part.

Two methods live here. The polar transfer keeps each contact's angular
coordinate and shifts its along-surface length by half the difference of
the two parts' heights, so the grasp lands at the same relative station on
the target regardless of scale. The rigid-registration baseline aligns the
source part onto the target with PCA + ICP and drags the contacts along,
which is what grasp-transfer systems did before part-level coordinates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .contact import ContactMap, ContactPoint
from .errors import InputError
from .mesh import sample_surface

CLAMP_WARN_FRACTION = 0.5
ICP_MAX_ITERS = 50
ICP_REL_TOL = 1e-4
ICP_DIVERGE_STREAK = 3
BASELINE_SAMPLES = 2000


@dataclass
class TransferResult:
    target_map: ContactMap
    method: str                      # "gc" or "preg"
    delta_H: float = 0.0
    clamped: np.ndarray = None       # bool per point ("gc" only)
    warnings: list = field(default_factory=list)
    rotation: np.ndarray = None      # (3,3), "preg" only
    translation: np.ndarray = None   # (3,), "preg" only
    diverged: bool = False

    @property
    def clamped_count(self):
        return 0 if self.clamped is None else int(self.clamped.sum())

    @property
    def fallback_count(self):
        return sum(1 for p in self.target_map.points if p.fallback)

    def to_json(self):
        out = self.target_map.to_json()
        out["schema"] = "transfer_result"
        out["method"] = self.method
        out["delta_H"] = float(self.delta_H)
        out["clamped"] = self.clamped_count
        out["fallbacks"] = self.fallback_count
        out["warnings"] = list(self.warnings)
        if self.rotation is not None:
            out["rotation"] = [[float(v) for v in row] for row in self.rotation]
            out["translation"] = [float(v) for v in self.translation]
            out["diverged"] = bool(self.diverged)
        return out

    @classmethod
    def from_json(cls, data):
        if data.get("schema") != "transfer_result":
            raise InputError("not a transfer-result JSON document")
        inner = dict(data)
        inner["schema"] = "contact_map"
        cmap = ContactMap.from_json(inner)
        rot = data.get("rotation")
        return cls(
            target_map=cmap,
            method=str(data["method"]),
            delta_H=float(data["delta_H"]),
            clamped=None,
            warnings=list(data.get("warnings", [])),
            rotation=np.asarray(rot, dtype=np.float64) if rot is not None else None,
            translation=(np.asarray(data["translation"], dtype=np.float64)
                         if rot is not None else None),
            diverged=bool(data.get("diverged", False)),
        )


def save_transfer_result(result, path):
    with open(path, "w") as fh:
        json.dump(result.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_transfer_result(path):
    with open(path) as fh:
        return TransferResult.from_json(json.load(fh))


def transfer_contact(src_map, src_gc, tgt_gc, phi_offset=0.0):
    """Polar transfer: phi is preserved, L is shifted by half the height
    difference, and the target position is re-synthesized from the target
    part's surface.

    Lengths that land outside the target's length range are clamped to its
    ends and flagged; if at least half the points clamp, the result carries
    a warning that the target part is too short for the grasp.
    """
    if len(src_map) == 0:
        raise InputError("source contact map is empty")
    for p in src_map.points:
        if p.gc_coord is None:
            raise InputError(
                "source contact map has no surface coordinates; lift it first"
            )
    delta_H = 0.5 * (tgt_gc.H - src_gc.H)
    points = []
    clamped = np.zeros(len(src_map), dtype=bool)
    for k, cp in enumerate(src_map.points):
        # offset 0 must leave phi bitwise identical, so skip the mod there
        if phi_offset == 0.0:
            phi = cp.gc_coord.phi
        else:
            phi = float(np.mod(cp.gc_coord.phi + phi_offset, 2.0 * np.pi))
        L_t = cp.gc_coord.L + delta_H
        flag = False
        if L_t < 0.0:
            L_t = 0.0
            flag = True
        l_max = tgt_gc.max_surface_distance(phi)
        if L_t > l_max:
            L_t = l_max
            flag = True
        h_t, inv_clamped = tgt_gc.invert_surface_distance(phi, L_t)
        flag = flag or inv_clamped
        pos, _ = tgt_gc.surface_point(h_t, phi)
        clamped[k] = flag
        points.append(ContactPoint(
            position=pos, region=cp.region, weight=cp.weight,
            gc_coord=type(cp.gc_coord)(h=h_t, phi=phi, L=L_t),
            fallback=cp.fallback,
        ))
    warnings = []
    if clamped.sum() >= CLAMP_WARN_FRACTION * len(src_map):
        warnings.append("target part too short for source grasp")
    tgt_map = ContactMap(points=points, n_samples=src_map.n_samples,
                         tau_c=src_map.tau_c,
                         meta=dict(src_map.meta))
    return TransferResult(target_map=tgt_map, method="gc", delta_H=delta_H,
                          clamped=clamped, warnings=warnings)


def _kabsch(src, dst):
    """Least-squares rigid motion mapping src points onto dst points."""
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    cov = (src - mu_s).T @ (dst - mu_d)
    u, _, vt = np.linalg.svd(cov)
    d = np.sign(np.linalg.det(vt.T @ u.T))
    rot = vt.T @ np.diag([1.0, 1.0, d]) @ u.T
    return rot, mu_d - rot @ mu_s


def _pca_basis(points):
    """Principal axes as columns, descending variance, right-handed."""
    centered = points - points.mean(axis=0)
    cov = centered.T @ centered / len(points)
    _, vecs = np.linalg.eigh(cov)
    basis = vecs[:, ::-1]
    if np.linalg.det(basis) < 0:
        basis = basis.copy()
        basis[:, 2] = -basis[:, 2]
    return basis


def _coarse_align(src_pts, tgt_pts):
    """PCA alignment; the four proper-rotation axis-sign choices are
    disambiguated by one-sided chamfer distance to the target samples."""
    mu_s = src_pts.mean(axis=0)
    mu_t = tgt_pts.mean(axis=0)
    basis_s = _pca_basis(src_pts)
    basis_t = _pca_basis(tgt_pts)
    tree = cKDTree(tgt_pts)
    best = None
    for signs in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
        rot = basis_t @ np.diag(signs) @ basis_s.T
        moved = (src_pts - mu_s) @ rot.T + mu_t
        chamfer = float(tree.query(moved)[0].mean())
        if best is None or chamfer < best[0]:
            best = (chamfer, rot)
    rot = best[1]
    return rot, mu_t - rot @ mu_s


def transfer_preg_baseline(src_map, src_part, tgt_part,
                           n_surface_samples=BASELINE_SAMPLES, seed=0,
                           max_iters=ICP_MAX_ITERS, rel_tol=ICP_REL_TOL):
    """Rigid-registration baseline: align the source part onto the target
    (PCA coarse pose, then point-to-point ICP) and project each contact to
    the nearest point on the target surface.

    ICP stops when the correspondence RMS improves by less than ``rel_tol``
    relatively, and is declared diverged after three consecutive increases,
    in which case the coarse alignment is returned with ``diverged`` set.
    """
    if len(src_map) == 0:
        raise InputError("source contact map is empty")
    src_pts = sample_surface(src_part, n_surface_samples, seed).points
    tgt_pts = sample_surface(tgt_part, n_surface_samples, seed + 1).points

    rot0, trans0 = _coarse_align(src_pts, tgt_pts)
    rot, trans = rot0, trans0
    tree = cKDTree(tgt_pts)
    prev_rms = None
    streak = 0
    diverged = False
    for _ in range(max_iters):
        moved = src_pts @ rot.T + trans
        dist, idx = tree.query(moved)
        rms = float(np.sqrt(np.mean(dist**2)))
        if prev_rms is not None:
            if rms > prev_rms:
                streak += 1
                if streak >= ICP_DIVERGE_STREAK:
                    diverged = True
                    rot, trans = rot0, trans0
                    break
            else:
                streak = 0
            if prev_rms - rms < rel_tol * max(prev_rms, 1e-12):
                prev_rms = rms
                break
        prev_rms = rms
        rot, trans = _kabsch(src_pts, tgt_pts[idx])

    points = []
    for cp in src_map.points:
        moved = rot @ cp.position + trans
        q, _, _ = _nearest_on_mesh(tgt_part, moved)
        points.append(ContactPoint(position=q, region=cp.region,
                                   weight=cp.weight))
    warnings = ["icp diverged; using coarse alignment"] if diverged else []
    tgt_map = ContactMap(points=points, n_samples=src_map.n_samples,
                         tau_c=src_map.tau_c, meta=dict(src_map.meta))
    return TransferResult(target_map=tgt_map, method="preg",
                          delta_H=0.0, clamped=None, warnings=warnings,
                          rotation=rot, translation=trans, diverged=diverged)


def _nearest_on_mesh(mesh, point):
    pts, dist, fid = mesh.query.closest_points(point[None, :])
    return pts[0], float(dist[0]), int(fid[0])
