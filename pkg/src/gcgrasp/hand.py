"""Articulated hand model: a skinned 21-joint capsule hand.

The template bundles a watertight triangle mesh (a union of closed capsule
bones plus a palm slab), a kinematic tree, rigid per-bone skin weights,
a contact region label per face, anchor vertices used by the grasp
optimizer, fingertip vertex sets, and per-joint motion limits.

Forward kinematics and skinning run in torch float64 so poses can be
optimized by gradient descent; the numpy-facing helpers wrap that core.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import InputError
from .mesh import TriMesh, load_mesh, save_obj
from . import shapes

DEG = np.pi / 180.0

DIGITS = ("thumb", "index", "middle", "ring", "pinky")

REGION_NAMES = (
    "palm",
    "thumb_metacarpal", "thumb_proximal", "thumb_distal", "thumb_tip",
    "index_proximal", "index_middle", "index_distal",
    "middle_proximal", "middle_middle", "middle_distal",
    "ring_proximal", "ring_middle", "ring_distal",
    "pinky_proximal", "pinky_middle", "pinky_distal",
)

JOINT_NAMES = ("wrist",) + tuple(
    f"{d}_{part}"
    for d in DIGITS
    for part in (("cmc", "mcp", "ip", "tip") if d == "thumb"
                 else ("mcp", "pip", "dip", "tip"))
)

PARENTS = (-1,) + tuple(
    0 if k == 0 else 4 * f + k
    for f in range(5) for k in range(4)
)

NUM_JOINTS = 21
NUM_ANCHORS = 32
MAX_SKIN_JOINTS = 4


@dataclass
class HandPose:
    """Wrist pose plus axis-angle rotations for the 20 non-wrist joints."""

    global_rot: np.ndarray    # (3,) axis-angle, applied about the origin
    global_trans: np.ndarray  # (3,) cm
    joints: np.ndarray        # (20, 3) axis-angle per joint, wrist excluded

    @classmethod
    def zero(cls):
        return cls(global_rot=np.zeros(3), global_trans=np.zeros(3),
                   joints=np.zeros((NUM_JOINTS - 1, 3)))

    def copy(self):
        return HandPose(self.global_rot.copy(), self.global_trans.copy(),
                        self.joints.copy())

    def to_json(self):
        return {
            "schema": "hand_pose",
            "version": 1,
            "global_rot": [float(v) for v in self.global_rot],
            "global_trans": [float(v) for v in self.global_trans],
            "joints": [[float(v) for v in row] for row in self.joints],
        }

    @classmethod
    def from_json(cls, data):
        joints = np.asarray(data["joints"], dtype=np.float64)
        if joints.shape != (NUM_JOINTS - 1, 3):
            raise InputError(
                f"hand pose needs {NUM_JOINTS - 1}x3 joint rotations, "
                f"got {joints.shape}"
            )
        return cls(
            global_rot=np.asarray(data["global_rot"], dtype=np.float64),
            global_trans=np.asarray(data["global_trans"], dtype=np.float64),
            joints=joints,
        )


def save_pose(pose, path):
    with open(path, "w") as fh:
        json.dump(pose.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_pose(path):
    with open(path) as fh:
        return HandPose.from_json(json.load(fh))


@dataclass
class HandTemplate:
    mesh: TriMesh
    joints: np.ndarray            # (21, 3) rest positions
    parents: np.ndarray           # (21,) int, -1 for the wrist
    joint_names: tuple
    skin_index: np.ndarray        # (V, 4) joint ids, zero-padded
    skin_weight: np.ndarray       # (V, 4) weights, rows sum to 1
    region_names: tuple
    face_region: np.ndarray       # (F,) index into region_names
    anchor_vertices: np.ndarray   # (32,) vertex ids
    anchor_regions: tuple         # (32,) region name per anchor
    fingertip_vertices: tuple     # 5 arrays of vertex ids, thumb..pinky
    joint_limits: np.ndarray      # (21, 3, 2) radians, rows (flex, abd, twist)
    joint_axes: np.ndarray        # (21, 3, 3) unit axis rows (flex, abd, twist)
    _torch: dict = field(default_factory=dict, repr=False)

    @property
    def flexion_axes(self):
        return self.joint_axes[:, 0, :]

    def anchors_of_region(self, region):
        return np.nonzero([r == region for r in self.anchor_regions])[0]

    def region_faces(self, region):
        idx = self.region_names.index(region)
        return np.nonzero(self.face_region == idx)[0]

    def tensors(self):
        """Torch float64 views of the template, built once."""
        if not self._torch:
            tt = lambda a: torch.from_numpy(np.array(a, dtype=np.float64))
            self._torch.update(
                verts=tt(self.mesh.vertices),
                joints=tt(self.joints),
                skin_index=torch.as_tensor(self.skin_index, dtype=torch.long),
                skin_weight=tt(self.skin_weight),
                limits=tt(self.joint_limits),
                axes=tt(self.joint_axes),
            )
        return self._torch


@dataclass
class PosedHand:
    mesh: TriMesh
    anchors: np.ndarray       # (32, 3)
    fingertips: tuple         # 5 arrays (k_i, 3)


# ---------------------------------------------------------------------------
# torch forward kinematics + skinning

def _rodrigues(r):
    """Axis-angle vectors (J, 3) to rotation matrices (J, 3, 3).

    Small rotations switch to a series so the gradient stays finite at
    exactly zero.
    """
    t2 = (r * r).sum(-1)
    small = t2 < 1e-12
    t2c = torch.where(small, torch.ones_like(t2), t2)
    theta = torch.sqrt(t2c)
    a = torch.where(small, 1.0 - t2 / 6.0, torch.sin(theta) / theta)
    b = torch.where(small, 0.5 - t2 / 24.0, (1.0 - torch.cos(theta)) / t2c)
    zeros = torch.zeros_like(t2)
    k = torch.stack([
        zeros, -r[:, 2], r[:, 1],
        r[:, 2], zeros, -r[:, 0],
        -r[:, 1], r[:, 0], zeros,
    ], dim=-1).reshape(-1, 3, 3)
    eye = torch.eye(3, dtype=r.dtype).expand(len(r), 3, 3)
    return eye + a[:, None, None] * k + b[:, None, None] * (k @ k)


def _fk_global(template, joint_rots):
    """Global joint rotations and origins for local axis-angle rotations.

    ``joint_rots`` is (21, 3); the wrist row is ignored (identity), its
    motion is carried by the pose's global terms.
    """
    t = template.tensors()
    rest = t["joints"]
    local = _rodrigues(joint_rots)
    rots = [torch.eye(3, dtype=local.dtype)]
    orgs = [rest[0]]
    for j in range(1, NUM_JOINTS):
        p = int(template.parents[j])
        rots.append(rots[p] @ local[j])
        orgs.append(orgs[p] + rots[p] @ (rest[j] - rest[p]))
    return torch.stack(rots), torch.stack(orgs)


def pose_vertices(template, global_rot, global_trans, joints,
                  vertex_ids=None):
    """Differentiable core: posed vertex positions (V, 3) in torch float64.

    Linear blend skinning over the forward-kinematics chain, then a rigid
    global motion: rotation about the origin followed by translation.
    """
    t = template.tensors()
    joint_rots = torch.cat([torch.zeros(1, 3, dtype=joints.dtype), joints])
    rot_g, org_g = _fk_global(template, joint_rots)
    rest = t["joints"]

    verts = t["verts"]
    sidx = t["skin_index"]
    sw = t["skin_weight"]
    if vertex_ids is not None:
        verts = verts[vertex_ids]
        sidx = sidx[vertex_ids]
        sw = sw[vertex_ids]

    # per (vertex, influence): R_j (v - rest_j) + o_j, blended by weight
    rel = verts[:, None, :] - rest[sidx]                      # (V, 4, 3)
    moved = torch.einsum("vkij,vkj->vki", rot_g[sidx], rel) + org_g[sidx]
    skinned = (sw[:, :, None] * moved).sum(dim=1)

    glob = _rodrigues(global_rot[None])[0]
    return skinned @ glob.T + global_trans


def pose_hand(template, pose):
    """Pose the template: returns the posed mesh, the 32 anchor points and
    the 5 fingertip vertex sets, all in world coordinates."""
    with torch.no_grad():
        v = pose_vertices(
            template,
            torch.as_tensor(pose.global_rot, dtype=torch.float64),
            torch.as_tensor(pose.global_trans, dtype=torch.float64),
            torch.as_tensor(pose.joints, dtype=torch.float64),
        ).numpy()
    mesh = TriMesh(v, template.mesh.faces)
    anchors = v[template.anchor_vertices]
    tips = tuple(v[ids] for ids in template.fingertip_vertices)
    return PosedHand(mesh=mesh, anchors=anchors, fingertips=tips)


def posed_vertex_jacobian(template, pose, vertex_ids):
    """d(posed vertex)/d(pose parameters) for selected vertices.

    Returns (k, 3, 66): derivatives with respect to global rotation (3),
    global translation (3) and the 60 joint parameters, in that order.
    """
    vertex_ids = torch.as_tensor(np.atleast_1d(vertex_ids), dtype=torch.long)

    def f(gr, gt, jr):
        return pose_vertices(template, gr, gt, jr.reshape(-1, 3), vertex_ids)

    args = (
        torch.as_tensor(pose.global_rot, dtype=torch.float64),
        torch.as_tensor(pose.global_trans, dtype=torch.float64),
        torch.as_tensor(pose.joints, dtype=torch.float64).reshape(-1),
    )
    jac = torch.autograd.functional.jacobian(f, args, vectorize=True)
    return torch.cat([j.reshape(len(vertex_ids), 3, -1) for j in jac],
                     dim=-1).numpy()


# ---------------------------------------------------------------------------
# template construction

_FINGER_X = {"index": 2.4, "middle": 0.8, "ring": -0.8, "pinky": -2.4}
_FINGER_LEN = {
    "index": (3.0, 2.2, 2.0),
    "middle": (3.2, 2.4, 2.4),
    "ring": (3.0, 2.2, 2.0),
    "pinky": (2.4, 1.8, 1.4),
}
_FINGER_RADIUS = {"index": 0.55, "middle": 0.55, "ring": 0.55,
                  "pinky": 0.45, "thumb": 0.65}
_KNUCKLE_Y = 10.0
_THUMB_DIR = np.array([np.sqrt(0.5), np.sqrt(0.5), 0.0])
_THUMB_CMC = np.array([3.2, 2.0, 0.0])
_THUMB_LEN = (3.0, 2.6, 2.2)
_PALM = dict(x0=-3.2, x1=3.2, y0=0.2, y1=10.2, z0=-0.8, z1=0.8)


def _rest_joints():
    joints = np.zeros((NUM_JOINTS, 3))
    pos = _THUMB_CMC.copy()
    joints[1] = pos
    for k, seg in enumerate(_THUMB_LEN):
        pos = pos + seg * _THUMB_DIR
        joints[2 + k] = pos
    for f, name in enumerate(DIGITS[1:]):
        base = 5 + 4 * f
        x = _FINGER_X[name]
        y = _KNUCKLE_Y
        joints[base] = (x, y, 0.0)
        for k, seg in enumerate(_FINGER_LEN[name]):
            y += seg
            joints[base + 1 + k] = (x, y, 0.0)
    return joints


def _slab(x0, x1, y0, y1, z0, z1, nx, ny):
    """Axis-aligned box with an (nx x ny)-subdivided top and bottom face."""
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    top = np.stack([gx, gy, np.full_like(gx, z1)], axis=-1).reshape(-1, 3)
    bot = np.stack([gx, gy, np.full_like(gx, z0)], axis=-1).reshape(-1, 3)
    verts = np.vstack([top, bot])
    nvt = len(top)

    def tid(i, j):
        return i * (ny + 1) + j

    faces = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = tid(i, j), tid(i + 1, j), tid(i + 1, j + 1), tid(i, j + 1)
            faces += [[a, b, c], [a, c, d]]                       # +z
            faces += [[nvt + a, nvt + c, nvt + b], [nvt + a, nvt + d, nvt + c]]
    for i in range(nx):                                           # y walls
        a, b = tid(i, 0), tid(i + 1, 0)
        faces += [[a, nvt + a, nvt + b], [a, nvt + b, b]]         # -y
        a, b = tid(i, ny), tid(i + 1, ny)
        faces += [[a, b, nvt + b], [a, nvt + b, nvt + a]]         # +y
    for j in range(ny):                                           # x walls
        a, b = tid(0, j), tid(0, j + 1)
        faces += [[a, b, nvt + b], [a, nvt + b, nvt + a]]         # -x
        a, b = tid(nx, j), tid(nx, j + 1)
        faces += [[a, nvt + a, nvt + b], [a, nvt + b, b]]         # +x
    return verts, np.asarray(faces, dtype=np.int64)


def _oriented_capsule(a, b, radius, segments=12, cap_rings=2):
    """Closed capsule whose hemisphere centers sit at points a and b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    length = float(np.linalg.norm(b - a))
    cap = shapes.capsule(radius, 0.0, length, segments=segments,
                         cap_rings=cap_rings)
    u = (b - a) / length
    z = np.array([0.0, 0.0, 1.0])
    axis = np.cross(z, u)
    s = np.linalg.norm(axis)
    c = float(np.dot(z, u))
    if s < 1e-12:
        rot = np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    else:
        k = axis / s
        kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
        rot = np.eye(3) + s * kx + (1 - c) * (kx @ kx)
    return cap.transformed(rotation=rot, translation=a), length, u


def _joint_motion_tables():
    limits = np.zeros((NUM_JOINTS, 3, 2))
    axes = np.tile(np.eye(3), (NUM_JOINTS, 1, 1))
    finger_axes = np.array([[1.0, 0, 0], [0, 0, 1.0], [0, 1.0, 0]])
    s = np.sqrt(0.5)
    thumb_axes = np.array([[s, -s, 0.0], [0, 0, 1.0], [s, s, 0.0]])
    flex = (0.0, 100.0 * DEG)
    for j, name in enumerate(JOINT_NAMES):
        if name == "wrist":
            continue
        axes[j] = thumb_axes if name.startswith("thumb") else finger_axes
        if name.endswith("_tip"):
            continue  # end sites: any motion is out of range
        if name == "thumb_cmc":
            limits[j, 0] = (-30.0 * DEG, 60.0 * DEG)
            limits[j, 1] = (-30.0 * DEG, 60.0 * DEG)
            limits[j, 2] = (-5.0 * DEG, 5.0 * DEG)
        elif name.endswith("_mcp") and not name.startswith("thumb"):
            limits[j, 0] = flex
            limits[j, 1] = (-20.0 * DEG, 20.0 * DEG)
            limits[j, 2] = (-5.0 * DEG, 5.0 * DEG)
        else:  # hinge joints: thumb mcp/ip, finger pip/dip
            limits[j, 0] = flex
    return limits, axes


def build_default_template():
    """Procedural capsule hand, about 18 cm from wrist to middle fingertip."""
    joints = _rest_joints()
    verts_all = []
    faces_all = []
    owner_all = []
    region_all = []
    vbase = 0

    def add(verts, faces, owner, regions):
        nonlocal vbase
        verts_all.append(verts)
        faces_all.append(faces + vbase)
        owner_all.append(np.full(len(verts), owner, dtype=np.int64))
        region_all.append(regions)
        vbase += len(verts)

    pv, pf = _slab(nx=2, ny=3, **_PALM)
    add(pv, pf, owner=0,
        regions=np.full(len(pf), REGION_NAMES.index("palm"), dtype=np.int64))

    bone_slices = {}
    for d, name in enumerate(DIGITS):
        radius = _FINGER_RADIUS[name]
        base = 1 + 4 * d
        for seg in range(3):
            j0, j1 = base + seg, base + seg + 1
            capm, length, u = _oriented_capsule(joints[j0], joints[j1], radius)
            if name == "thumb":
                region = ("thumb_metacarpal", "thumb_proximal",
                          "thumb_distal")[seg]
            else:
                region = f"{name}_" + ("proximal", "middle", "distal")[seg]
            ridx = np.full(capm.num_faces, REGION_NAMES.index(region),
                           dtype=np.int64)
            if name == "thumb" and seg == 2:
                # split the last thumb bone: outer quarter is the tip pad
                cent = capm.vertices[capm.faces].mean(axis=1)
                t = (cent - joints[j0]) @ u / length
                ridx[t >= 0.75] = REGION_NAMES.index("thumb_tip")
            bone_slices[(name, seg)] = (vbase, vbase + capm.num_vertices,
                                        length, u)
            add(capm.vertices, capm.faces, owner=j0, regions=ridx)

    verts = np.vstack(verts_all)
    faces = np.vstack(faces_all)
    owner = np.concatenate(owner_all)
    face_region = np.concatenate(region_all)
    mesh = TriMesh(verts, faces)

    skin_index = np.zeros((len(verts), MAX_SKIN_JOINTS), dtype=np.int64)
    skin_weight = np.zeros((len(verts), MAX_SKIN_JOINTS))
    skin_index[:, 0] = owner
    skin_weight[:, 0] = 1.0

    fingertips = []
    for name in DIGITS:
        v0, v1, length, u = bone_slices[(name, 2)]
        t = (verts[v0:v1] - joints[1 + 4 * DIGITS.index(name) + 2]) @ u / length
        ids = v0 + np.nonzero(t >= 0.8)[0]
        fingertips.append(ids.astype(np.int64))

    anchor_vertices, anchor_regions = _place_anchors(
        verts, joints, bone_slices)
    limits, axes = _joint_motion_tables()

    return HandTemplate(
        mesh=mesh,
        joints=joints,
        parents=np.asarray(PARENTS, dtype=np.int64),
        joint_names=JOINT_NAMES,
        skin_index=skin_index,
        skin_weight=skin_weight,
        region_names=REGION_NAMES,
        face_region=face_region,
        anchor_vertices=anchor_vertices,
        anchor_regions=tuple(anchor_regions),
        fingertip_vertices=tuple(fingertips),
        joint_limits=limits,
        joint_axes=axes,
    )


def _place_anchors(verts, joints, bone_slices):
    """32 anchors: 6 on the palm pad, the rest spread over the digit pads.

    Each target point is snapped to the nearest mesh vertex of the bone
    (or palm face) it belongs to; the pad side is +z, the side the fingers
    curl toward.
    """
    targets = []  # (region, search_lo, search_hi, point)
    palm_z = _PALM["z1"]
    for x in (-1.8, 1.8):
        for y in (3.5, 6.0, 8.5):
            targets.append(("palm", None, None, np.array([x, y, palm_z])))

    def bone_point(name, seg, t):
        lo, hi, length, u = bone_slices[(name, seg)]
        j0 = 1 + 4 * DIGITS.index(name) + seg
        r = _FINGER_RADIUS[name]
        return lo, hi, joints[j0] + t * length * u + r * np.array([0, 0, 1.0])

    for seg, ts in ((0, (1 / 3, 2 / 3)), (1, (1 / 3, 2 / 3))):
        region = ("thumb_metacarpal", "thumb_proximal")[seg]
        for t in ts:
            lo, hi, p = bone_point("thumb", seg, t)
            targets.append((region, lo, hi, p))
    lo, hi, p = bone_point("thumb", 2, 0.4)
    targets.append(("thumb_distal", lo, hi, p))
    tip_pt = joints[4] + _FINGER_RADIUS["thumb"] * _THUMB_DIR
    targets.append(("thumb_tip", bone_slices[("thumb", 2)][0],
                    bone_slices[("thumb", 2)][1], tip_pt))

    for name in DIGITS[1:]:
        lo, hi, p = bone_point(name, 0, 0.5)
        targets.append((f"{name}_proximal", lo, hi, p))
        for t in (1 / 3, 2 / 3):
            lo, hi, p = bone_point(name, 1, t)
            targets.append((f"{name}_middle", lo, hi, p))
        lo, hi, p = bone_point(name, 2, 0.4)
        targets.append((f"{name}_distal", lo, hi, p))
        tip_joint = joints[1 + 4 * DIGITS.index(name) + 3]
        tip_pt = tip_joint + _FINGER_RADIUS[name] * np.array([0, 1.0, 0])
        targets.append((f"{name}_distal", lo, hi, tip_pt))

    anchor_vertices = []
    anchor_regions = []
    taken = set()
    for region, lo, hi, point in targets:
        if lo is None:
            pool = np.nonzero(np.abs(verts[:, 2] - palm_z) < 1e-9)[0]
        else:
            pool = np.arange(lo, hi)
        d = np.linalg.norm(verts[pool] - point, axis=1)
        order = np.argsort(d)
        pick = next(int(pool[k]) for k in order if int(pool[k]) not in taken)
        taken.add(pick)
        anchor_vertices.append(pick)
        anchor_regions.append(region)
    return np.asarray(anchor_vertices, dtype=np.int64), anchor_regions


# ---------------------------------------------------------------------------
# template bundle io

def save_template(template, obj_path, json_path):
    save_obj(template.mesh, obj_path)
    sw = []
    for idx_row, w_row in zip(template.skin_index, template.skin_weight):
        sw.append([[int(j), float(w)] for j, w in zip(idx_row, w_row)
                   if w > 0.0])
    data = {
        "schema": "hand_template",
        "version": 1,
        "units": "cm",
        "mesh_obj": str(obj_path).rsplit("/", 1)[-1],
        "joints": [[float(v) for v in row] for row in template.joints],
        "joint_names": list(template.joint_names),
        "parents": [int(p) for p in template.parents],
        "skin_weights": sw,
        "regions": list(template.region_names),
        "face_region": [int(r) for r in template.face_region],
        "anchors": [{"vertex": int(v), "region": r}
                    for v, r in zip(template.anchor_vertices,
                                    template.anchor_regions)],
        "fingertips": {d: [int(i) for i in ids]
                       for d, ids in zip(DIGITS,
                                         template.fingertip_vertices)},
        "joint_limits": [[[float(l), float(h)] for l, h in joint]
                         for joint in template.joint_limits],
        "joint_axes": [[[float(v) for v in ax] for ax in joint]
                       for joint in template.joint_axes],
        "flexion_axes": [[float(v) for v in ax]
                         for ax in template.joint_axes[:, 0, :]],
    }
    with open(json_path, "w") as fh:
        json.dump(data, fh, sort_keys=True)
        fh.write("\n")


def load_template(json_path):
    """Load and validate a template bundle (JSON sidecar + OBJ mesh)."""
    json_path = str(json_path)
    with open(json_path) as fh:
        data = json.load(fh)
    if data.get("schema") != "hand_template":
        raise InputError("not a hand-template JSON document")
    base = json_path.rsplit("/", 1)[0] if "/" in json_path else "."
    mesh = load_mesh(f"{base}/{data['mesh_obj']}")

    joints = np.asarray(data["joints"], dtype=np.float64)
    if joints.shape != (NUM_JOINTS, 3):
        raise InputError(f"hand template: need {NUM_JOINTS} joints, "
                         f"got {joints.shape[0]}")
    parents = np.asarray(data["parents"], dtype=np.int64)
    if parents.shape != (NUM_JOINTS,) or parents[0] != -1:
        raise InputError("hand template: parents must be 21 ids with the "
                         "wrist parented to -1")
    for j in range(1, NUM_JOINTS):
        if not 0 <= parents[j] < j:
            raise InputError(
                f"hand template: joint {j} parent {parents[j]} breaks the "
                "rooted-tree order")

    sw_raw = data["skin_weights"]
    if len(sw_raw) != mesh.num_vertices:
        raise InputError("hand template: skin weights must cover every "
                         f"vertex ({len(sw_raw)} != {mesh.num_vertices})")
    skin_index = np.zeros((mesh.num_vertices, MAX_SKIN_JOINTS), dtype=np.int64)
    skin_weight = np.zeros((mesh.num_vertices, MAX_SKIN_JOINTS))
    for v, entries in enumerate(sw_raw):
        if not 0 < len(entries) <= MAX_SKIN_JOINTS:
            raise InputError(f"hand template: vertex {v} has {len(entries)} "
                             f"skin influences (need 1..{MAX_SKIN_JOINTS})")
        total = 0.0
        for k, (j, w) in enumerate(entries):
            if not 0 <= int(j) < NUM_JOINTS:
                raise InputError(f"hand template: vertex {v} skinned to "
                                 f"unknown joint {j}")
            skin_index[v, k] = int(j)
            skin_weight[v, k] = float(w)
            total += float(w)
        if abs(total - 1.0) > 1e-9:
            raise InputError(f"hand template: vertex {v} skin weights sum "
                             f"to {total}, not 1")

    region_names = tuple(data["regions"])
    if len(region_names) != len(REGION_NAMES):
        raise InputError(f"hand template: expected {len(REGION_NAMES)} "
                         f"regions, got {len(region_names)}")
    if len(set(region_names)) != len(region_names):
        raise InputError("hand template: duplicate region names")
    face_region = np.asarray(data["face_region"], dtype=np.int64)
    if face_region.shape != (mesh.num_faces,):
        raise InputError("hand template: face_region must label every face")
    if face_region.min() < 0 or face_region.max() >= len(region_names):
        raise InputError("hand template: face_region index out of range")

    anchors = data["anchors"]
    if len(anchors) != NUM_ANCHORS:
        raise InputError(f"hand template: need {NUM_ANCHORS} anchors, "
                         f"got {len(anchors)}")
    anchor_vertices = np.asarray([a["vertex"] for a in anchors],
                                 dtype=np.int64)
    anchor_regions = tuple(a["region"] for a in anchors)
    if anchor_vertices.min() < 0 or anchor_vertices.max() >= mesh.num_vertices:
        raise InputError("hand template: anchor vertex id out of range")
    for r in anchor_regions:
        if r not in region_names:
            raise InputError(f"hand template: anchor region {r!r} unknown")
    covered = set(anchor_regions)
    missing = [r for r in region_names if r not in covered]
    if missing:
        raise InputError("hand template: regions without anchors: "
                         + ", ".join(missing))

    tips_raw = data["fingertips"]
    if set(tips_raw) != set(DIGITS):
        raise InputError("hand template: fingertips must name the five digits")
    fingertips = []
    seen = set()
    for d in DIGITS:
        ids = np.asarray(tips_raw[d], dtype=np.int64)
        if len(ids) == 0:
            raise InputError(f"hand template: fingertip set {d!r} is empty")
        if ids.min() < 0 or ids.max() >= mesh.num_vertices:
            raise InputError(f"hand template: fingertip set {d!r} has a "
                             "vertex id out of range")
        overlap = seen.intersection(ids.tolist())
        if overlap:
            raise InputError("hand template: fingertip sets overlap at "
                             f"vertex {sorted(overlap)[0]}")
        seen.update(ids.tolist())
        fingertips.append(ids)

    limits = np.asarray(data["joint_limits"], dtype=np.float64)
    if limits.shape != (NUM_JOINTS, 3, 2):
        raise InputError("hand template: joint_limits must be 21x3x2")
    if np.any(limits[..., 0] > limits[..., 1]):
        raise InputError("hand template: a joint limit has low > high")
    axes = np.asarray(data["joint_axes"], dtype=np.float64)
    if axes.shape != (NUM_JOINTS, 3, 3):
        raise InputError("hand template: joint_axes must be 21x3x3")
    norms = np.linalg.norm(axes, axis=2)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise InputError("hand template: joint axes must be unit length")

    return HandTemplate(
        mesh=mesh,
        joints=joints,
        parents=parents,
        joint_names=tuple(data.get("joint_names", JOINT_NAMES)),
        skin_index=skin_index,
        skin_weight=skin_weight,
        region_names=region_names,
        face_region=face_region,
        anchor_vertices=anchor_vertices,
        anchor_regions=anchor_regions,
        fingertip_vertices=tuple(fingertips),
        joint_limits=limits,
        joint_axes=axes,
    )


_DEFAULT_CACHE = {}


def default_template():
    """The packaged hand template, loaded once per process."""
    if "template" not in _DEFAULT_CACHE:
        from importlib.resources import files
        root = files("gcgrasp").joinpath("assets")
        _DEFAULT_CACHE["template"] = load_template(
            str(root.joinpath("hand_template.json")))
    return _DEFAULT_CACHE["template"]
