"""Grasp pose synthesis: gradient descent of a hand pose against a
transferred contact map.

The objective is a weighted sum of three terms: anchors pulled toward the
contact points of their region (soft minimum inside, hard minimum in the
report), joint rotations hinged to their anatomical ranges, and hand
vertices pushed out of the object's signed distance field. All math runs
in torch float64; the loop is plain Adam with separate learning rates for
the translation and the rotation-like parameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import InputError, OptimizationError
from .hand import NUM_JOINTS, HandPose, pose_vertices

TERM_NAMES = ("contact", "anatomy", "penetration")


@dataclass
class OptimizerConfig:
    iterations: int = 1000
    lr_translation: float = 1e-2
    lr_rotation: float = 5e-3
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8
    w_contact: float = 1.0
    w_anatomy: float = 1.0
    # contact pull and interpenetration push compete directly; the heavier
    # default keeps optimized grasps from settling inside the object
    w_penetration: float = 10.0
    softmin_temperature: float = 0.01  # cm^2

    def to_json(self):
        return {
            "iterations": self.iterations,
            "lr_translation": self.lr_translation,
            "lr_rotation": self.lr_rotation,
            "betas": list(self.betas),
            "eps": self.eps,
            "w_contact": self.w_contact,
            "w_anatomy": self.w_anatomy,
            "w_penetration": self.w_penetration,
            "softmin_temperature": self.softmin_temperature,
        }

    @classmethod
    def from_json(cls, data):
        kwargs = dict(data)
        if "betas" in kwargs:
            kwargs["betas"] = tuple(kwargs["betas"])
        return cls(**kwargs)


@dataclass
class LossReport:
    """Per-iteration loss terms plus the best and final poses.

    ``total[i]`` is exactly ``w_contact*contact[i] + w_anatomy*anatomy[i]
    + w_penetration*penetration[i]`` with the hard-minimum contact term;
    the soft contact term that actually drives the gradient is kept in
    ``contact_soft``.
    """

    contact: np.ndarray
    contact_soft: np.ndarray
    anatomy: np.ndarray
    penetration: np.ndarray
    total: np.ndarray
    best_iteration: int
    best_total: float
    converged: bool
    config: OptimizerConfig
    final_pose: HandPose = None
    best_pose: HandPose = None

    def best_so_far(self):
        return np.minimum.accumulate(self.total)

    def to_json(self):
        return {
            "schema": "loss_report",
            "version": 1,
            "contact": [float(v) for v in self.contact],
            "contact_soft": [float(v) for v in self.contact_soft],
            "anatomy": [float(v) for v in self.anatomy],
            "penetration": [float(v) for v in self.penetration],
            "total": [float(v) for v in self.total],
            "best_iteration": int(self.best_iteration),
            "best_total": float(self.best_total),
            "converged": bool(self.converged),
            "config": self.config.to_json(),
        }


def save_report(report, path):
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, sort_keys=True)
        fh.write("\n")


def sdf_values_torch(grid, points):
    """Trilinear SDF lookup, mirroring the numpy grid query semantics:
    queries are clamped to the grid border (where a padded grid is always
    positive, so clamping never hides a penetration)."""
    values = torch.from_numpy(grid.values)
    origin = torch.from_numpy(np.asarray(grid.origin, dtype=np.float64))
    dims = grid.values.shape
    u = (points - origin) / float(grid.voxel_size) - 0.5
    # NaN/inf queries must come back NaN, not crash the gather below
    bad = ~torch.isfinite(u.detach()).all(dim=1)
    if bad.any():
        u = torch.where(bad[:, None], torch.zeros_like(u), u)
    hi = torch.tensor([d - 1 - 1e-9 for d in dims], dtype=points.dtype)
    u = torch.clamp(u, min=torch.zeros(3, dtype=points.dtype), max=hi)
    i = u.detach().floor().long()
    for k in range(3):
        i[:, k] = torch.clamp(i[:, k], max=dims[k] - 2)
    f = u - i.to(points.dtype)
    ix, iy, iz = i[:, 0], i[:, 1], i[:, 2]
    fx, fy, fz = f[:, 0], f[:, 1], f[:, 2]

    def v(dx, dy, dz):
        return values[ix + dx, iy + dy, iz + dz]

    c00 = v(0, 0, 0) * (1 - fx) + v(1, 0, 0) * fx
    c10 = v(0, 1, 0) * (1 - fx) + v(1, 1, 0) * fx
    c01 = v(0, 0, 1) * (1 - fx) + v(1, 0, 1) * fx
    c11 = v(0, 1, 1) * (1 - fx) + v(1, 1, 1) * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    out = c0 * (1 - fz) + c1 * fz
    if bad.any():
        out = torch.where(bad, torch.full_like(out, float("nan")), out)
    return out


class GraspObjective:
    """The three loss terms as differentiable functions of a pose.

    Contact points are grouped by hand region up front; regions named in
    the map must exist on the template and own at least one anchor.
    """

    def __init__(self, template, contact_map, sdf_grid, config=None):
        self.template = template
        self.config = config or OptimizerConfig()
        self.sdf = sdf_grid
        self._sdf_values = torch.from_numpy(sdf_grid.values)

        groups = {}
        for p in contact_map.points:
            groups.setdefault(p.region, []).append(p)
        self.region_data = []
        for region, pts in sorted(groups.items()):
            if region not in template.region_names:
                raise InputError(
                    f"contact map names unknown hand region {region!r}")
            anchor_rows = template.anchors_of_region(region)
            positions = torch.from_numpy(
                np.array([p.position for p in pts], dtype=np.float64))
            weights = torch.from_numpy(
                np.array([p.weight for p in pts], dtype=np.float64))
            self.region_data.append(
                (region, anchor_rows, positions, weights))
        t = template.tensors()
        self._anchor_ids = torch.from_numpy(
            template.anchor_vertices.astype(np.int64))
        # motion tables for the 20 parameterized joints
        self._axes = t["axes"][1:]
        self._limits = t["limits"][1:]

    def posed_vertices(self, g_rot, g_trans, joints):
        return pose_vertices(self.template, g_rot, g_trans, joints)

    def contact_terms(self, anchors):
        """(soft, hard) weighted distance of contacts to their region's
        nearest anchor."""
        tau = self.config.softmin_temperature
        soft = anchors.new_zeros(())
        hard = anchors.new_zeros(())
        for region, rows, positions, weights in self.region_data:
            a = anchors[rows]                                   # (k, 3)
            diff = positions[:, None, :] - a[None, :, :]        # (n, k, 3)
            d2 = (diff * diff).sum(-1)
            w_sum = weights.sum()
            soft_min = -tau * torch.logsumexp(-d2 / tau, dim=1)
            hard_min = d2.detach().min(dim=1).values  # report only, no grad
            soft = soft + (weights * soft_min).sum() / w_sum
            hard = hard + (weights * hard_min).sum() / w_sum
        return soft, hard

    def anatomy_term(self, joints):
        """Squared hinge of each per-axis rotation component beyond its
        limit; axes with a zero range penalize any motion at all."""
        comps = torch.einsum("ji,jki->jk", joints, self._axes)
        lo = self._limits[..., 0]
        hi = self._limits[..., 1]
        over = torch.relu(comps - hi) + torch.relu(lo - comps)
        return (over * over).sum()

    def penetration_term(self, verts):
        """Sum of penetration depths along the SDF: zero exactly when no
        vertex sees a negative value."""
        vals = sdf_values_torch(self.sdf, verts)
        return torch.relu(-vals).sum()

    def terms(self, g_rot, g_trans, joints):
        """All terms at a pose: dict with soft/hard contact, anatomy,
        penetration."""
        verts = self.posed_vertices(g_rot, g_trans, joints)
        anchors = verts[self._anchor_ids]
        c_soft, c_hard = self.contact_terms(anchors)
        return {
            "contact_soft": c_soft,
            "contact": c_hard,
            "anatomy": self.anatomy_term(joints),
            "penetration": self.penetration_term(verts),
        }


def optimize_pose(template, contact_map, sdf_grid, init_pose=None,
                  config=None):
    """Adam-optimize a hand pose against a contact map.

    Returns ``(best_pose, LossReport)``. The best pose is the iterate with
    the lowest reported total loss, which makes the best-so-far curve
    non-increasing by construction.
    """
    config = config or OptimizerConfig()
    if config.iterations < 1:
        raise InputError("optimizer needs at least one iteration")
    objective = GraspObjective(template, contact_map, sdf_grid, config)
    init = init_pose or HandPose.zero()

    g_rot = torch.tensor(init.global_rot, dtype=torch.float64,
                         requires_grad=True)
    g_trans = torch.tensor(init.global_trans, dtype=torch.float64,
                           requires_grad=True)
    joints = torch.tensor(init.joints, dtype=torch.float64,
                          requires_grad=True)
    opt = torch.optim.Adam(
        [
            {"params": [g_trans], "lr": config.lr_translation},
            {"params": [g_rot, joints], "lr": config.lr_rotation},
        ],
        betas=config.betas, eps=config.eps,
    )

    n = config.iterations
    hist = {k: np.zeros(n) for k in
            ("contact", "contact_soft", "anatomy", "penetration", "total")}
    best_total = np.inf
    best_iter = -1
    best_pose = None

    for it in range(n):
        opt.zero_grad()
        terms = objective.terms(g_rot, g_trans, joints)
        for name, key in (("contact", "contact_soft"),
                          ("anatomy", "anatomy"),
                          ("penetration", "penetration")):
            if not torch.isfinite(terms[key]).item():
                raise OptimizationError(
                    f"non-finite {name} loss at iteration {it}")
        loss = (config.w_contact * terms["contact_soft"]
                + config.w_anatomy * terms["anatomy"]
                + config.w_penetration * terms["penetration"])
        rep = {k: float(v.detach()) for k, v in terms.items()}
        total = (config.w_contact * rep["contact"]
                 + config.w_anatomy * rep["anatomy"]
                 + config.w_penetration * rep["penetration"])
        hist["contact"][it] = rep["contact"]
        hist["contact_soft"][it] = rep["contact_soft"]
        hist["anatomy"][it] = rep["anatomy"]
        hist["penetration"][it] = rep["penetration"]
        hist["total"][it] = total
        if total < best_total:
            best_total = total
            best_iter = it
            best_pose = HandPose(
                global_rot=g_rot.detach().numpy().copy(),
                global_trans=g_trans.detach().numpy().copy(),
                joints=joints.detach().numpy().copy(),
            )
        loss.backward()
        opt.step()

    final_pose = HandPose(
        global_rot=g_rot.detach().numpy().copy(),
        global_trans=g_trans.detach().numpy().copy(),
        joints=joints.detach().numpy().copy(),
    )
    # plateau test: the best iterate stopped improving a while ago
    tail = min(100, n)
    converged = bool(best_iter < n - tail)
    report = LossReport(
        contact=hist["contact"],
        contact_soft=hist["contact_soft"],
        anatomy=hist["anatomy"],
        penetration=hist["penetration"],
        total=hist["total"],
        best_iteration=best_iter,
        best_total=float(best_total),
        converged=converged,
        config=config,
        final_pose=final_pose,
        best_pose=best_pose,
    )
    return best_pose, report
