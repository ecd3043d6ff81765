import subprocess
import sys

import numpy as np
import pytest

from gcgrasp.gc import Skeleton, build_gc
from gcgrasp.hand import HandPose, default_template, pose_hand
from gcgrasp.shapes import bent_tube, cylinder, frustum, tapered_handle


def rod_wrap_pose(template, rod_radius, hand_z, clearance=0.05, rod_y=9.5):
    """Greedy power grasp of a z-axis rod at the origin.

    The palm is placed kissing the rod surface (knuckle row parallel to the
    rod axis, rod across the palm at local height ``rod_y``), then each
    finger joint flexes as far as it can while the moving part of the finger
    keeps ``clearance`` to the rod. Deterministic, no RNG.
    """
    rot = np.array([0.0, -np.pi / 2.0, 0.0])
    trans = np.array([rod_radius + 0.8 + clearance, -rod_y, hand_z])
    joints = np.zeros((20, 3))
    vert_joint = template.skin_index[:, 0]

    def min_clearance(vert_ids):
        posed = pose_hand(template,
                          HandPose(rot.copy(), trans.copy(), joints.copy()))
        v = posed.mesh.vertices[vert_ids]
        return float(np.sqrt(v[:, 0] ** 2 + v[:, 1] ** 2).min() - rod_radius)

    for digit in range(5):
        chain = [1 + 4 * digit, 2 + 4 * digit, 3 + 4 * digit, 4 + 4 * digit]
        for k, joint_id in enumerate(chain[:3]):
            vert_ids = np.nonzero(np.isin(vert_joint, chain[k:]))[0]
            hi = template.joint_limits[joint_id, 0, 1]
            lo = 0.0
            row = joint_id - 1
            joints[row, 0] = hi
            if min_clearance(vert_ids) >= clearance:
                continue
            for _ in range(24):
                mid = 0.5 * (lo + hi)
                joints[row, 0] = mid
                if min_clearance(vert_ids) >= clearance:
                    lo = mid
                else:
                    hi = mid
            joints[row, 0] = lo
    return HandPose(rot, trans, joints)


def arc_skeleton(bend_radius, deg0, deg1, k=33):
    a = np.radians(np.linspace(deg0, deg1, k))
    pts = np.stack([bend_radius * np.cos(a), bend_radius * np.sin(a),
                    np.zeros(k)], axis=1)
    return Skeleton(pts)


def run_cli(*args, cwd=None, env=None):
    cmd = [sys.executable, "-c", "from gcgrasp.cli import main; main()",
           *args]
    return subprocess.run(cmd, capture_output=True, text=True, cwd=cwd,
                          env=env)


@pytest.fixture(scope="session")
def template():
    return default_template()


@pytest.fixture(scope="session")
def gc_fixtures():
    """The four reference parts: mesh plus an interior skeleton each."""
    return {
        "cylinder": (cylinder(0.6, -0.05, 12.05, segments=48),
                     Skeleton(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 12.0]]))),
        "cone": (frustum(1.0, 0.1, -0.05, 16.05, segments=48),
                 Skeleton(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 16.0]]))),
        "bent_tube": (bent_tube(0.6, 8.0, angle_deg=90.0, overhang_deg=3.0),
                      arc_skeleton(8.0, -2.5, 92.5)),
        "handle": (tapered_handle(2.0, -0.1, 16.1, waist=0.5, segments=48),
                   Skeleton(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 16.0]]))),
    }


class GraspScene:
    """Source rod grasp shared by transfer/optimizer/metrics tests."""

    def __init__(self, template):
        from gcgrasp.contact import extract_contact_map, lift_to_gc

        self.template = template
        self.src_mesh = cylinder(2.0, -0.05, 12.05, segments=48, rings=6)
        self.tgt_mesh = cylinder(3.0, -0.05, 12.05, segments=48, rings=6)
        self.skeleton = Skeleton(np.array([[0.0, 0.0, 0.0],
                                           [0.0, 0.0, 12.0]]))
        self.src_gc = build_gc(self.src_mesh, self.skeleton)
        self.tgt_gc = build_gc(self.tgt_mesh, self.skeleton)
        self.pose = rod_wrap_pose(template, 2.0, 5.0)
        self.posed = pose_hand(template, self.pose)
        self.regions = [template.region_names[i]
                        for i in template.face_region]
        self.raw_map = extract_contact_map(
            self.src_mesh, self.posed.mesh, self.regions,
            n_samples=5000, tau_c=0.2, seed=7)
        self.lifted = lift_to_gc(self.raw_map, self.src_gc, self.src_mesh)


@pytest.fixture(scope="session")
def grasp_scene(template):
    return GraspScene(template)


@pytest.fixture(scope="session")
def target_sdf(grasp_scene):
    from gcgrasp.sdf import build_sdf
    return build_sdf(grasp_scene.tgt_mesh, resolution=128)
