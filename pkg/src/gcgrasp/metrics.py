"""Grasp quality metrics: how deep the hand sinks into the object, how
much volume they share, how much of the object the hand covers, and how
far the fingertips hover.

All four take posed meshes in cm; penetration depth additionally wants the
object's signed distance field so sign checks are cheap, while the actual
depth is measured against the exact surface.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError
from .mesh import sample_surface
from .sdf import build_sdf, make_layout, voxelize_occupancy

DEFAULT_CR_SAMPLES = 5000
DEFAULT_TAU_C = 0.2
DEFAULT_PV_RESOLUTION = 128


def penetration_depth(hand_mesh, object_mesh, object_sdf):
    """Deepest hand vertex inside the object, in cm.

    The SDF picks out the penetrating vertices; their depth is their exact
    distance to the object surface, so grid resolution only affects which
    vertices count as inside, not the reported depth.
    """
    vals, _, _ = object_sdf.query(hand_mesh.vertices)
    inside = vals < 0.0
    if not inside.any():
        return 0.0
    _, dist, _ = object_mesh.query.closest_points(hand_mesh.vertices[inside])
    return float(dist.max())


def penetration_volume(hand_mesh, object_mesh,
                       resolution=DEFAULT_PV_RESOLUTION):
    """Overlap volume in cm^3 on a shared voxel grid spanning both meshes,
    ``resolution`` voxels along the longest axis of the union AABB."""
    lo_h, hi_h = hand_mesh.aabb
    lo_o, hi_o = object_mesh.aabb
    lo = np.minimum(lo_h, lo_o)
    hi = np.maximum(hi_h, hi_o)
    layout = make_layout(lo, hi, resolution, padding_voxels=1)
    occ_h = voxelize_occupancy(hand_mesh, layout=layout)
    occ_o = voxelize_occupancy(object_mesh, layout=layout)
    overlap = np.logical_and(occ_h.mask, occ_o.mask)
    return float(overlap.sum()) * layout.voxel_size**3


def contact_ratio(object_mesh, hand_mesh, n_samples=DEFAULT_CR_SAMPLES,
                  tau_c=DEFAULT_TAU_C, seed=0):
    """Percentage of object-surface samples within tau_c of the hand
    surface."""
    if n_samples < 1:
        raise InputError("contact ratio needs at least one sample")
    samples = sample_surface(object_mesh, n_samples, seed)
    _, dist, _ = hand_mesh.query.closest_points(samples.points)
    return 100.0 * float((dist <= tau_c).sum()) / n_samples


def disjointed_distance(fingertip_points, object_mesh):
    """Mean distance of all fingertip vertices (the five sets pooled) to
    the object surface, in cm."""
    pooled = np.vstack([np.atleast_2d(p) for p in fingertip_points])
    if len(pooled) == 0:
        raise InputError("no fingertip vertices given")
    _, dist, _ = object_mesh.query.closest_points(pooled)
    return float(dist.mean())


@dataclass
class MetricsReport:
    pd: float
    pv: float
    cr: float
    dd: float
    parameters: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_json(self):
        return {
            "schema": "metrics",
            "version": 1,
            "units": {"pd": "cm", "pv": "cm3", "cr": "percent", "dd": "cm"},
            "pd": float(self.pd),
            "pv": float(self.pv),
            "cr": float(self.cr),
            "dd": float(self.dd),
            "parameters": self.parameters,
            "flags": list(self.flags),
        }

    @classmethod
    def from_json(cls, data):
        if data.get("schema") != "metrics":
            raise InputError("not a metrics JSON document")
        return cls(pd=float(data["pd"]), pv=float(data["pv"]),
                   cr=float(data["cr"]), dd=float(data["dd"]),
                   parameters=dict(data.get("parameters", {})),
                   flags=list(data.get("flags", [])))

    def csv_row(self, pair_id):
        flags = ";".join(self.flags)
        return (f"{pair_id},{self.pd:.6g},{self.pv:.6g},"
                f"{self.cr:.6g},{self.dd:.6g},{flags}")


CSV_HEADER = "pair,pd,pv,cr,dd,flags"


def save_metrics(report, path):
    with open(path, "w") as fh:
        json.dump(report.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_metrics(path):
    with open(path) as fh:
        return MetricsReport.from_json(json.load(fh))


def compute_metrics(object_mesh, hand_mesh, fingertip_points,
                    object_sdf=None, n_samples=DEFAULT_CR_SAMPLES,
                    tau_c=DEFAULT_TAU_C, pv_resolution=DEFAULT_PV_RESOLUTION,
                    sdf_resolution=128, seed=0):
    """All four metrics for one posed grasp; builds the object SDF when
    none is supplied. The contact threshold (against the hand surface) and
    quadrature sizes are recorded in ``parameters``."""
    if object_sdf is None:
        object_sdf = build_sdf(object_mesh, resolution=sdf_resolution)
    flags = []
    pd = penetration_depth(hand_mesh, object_mesh, object_sdf)
    if pd == 0.0:
        flags.append("no_penetration")
    pv = penetration_volume(hand_mesh, object_mesh, resolution=pv_resolution)
    cr = contact_ratio(object_mesh, hand_mesh, n_samples=n_samples,
                       tau_c=tau_c, seed=seed)
    dd = disjointed_distance(fingertip_points, object_mesh)
    return MetricsReport(
        pd=pd, pv=pv, cr=cr, dd=dd,
        parameters={
            "tau_c": tau_c,
            "cr_reference": "hand surface",
            "n_samples": n_samples,
            "pv_resolution": pv_resolution,
            "seed": seed,
        },
        flags=flags,
    )
