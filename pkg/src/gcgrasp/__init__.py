"""Part-level grasp transfer between objects.

Segmented object parts are modeled as generalized cylinders; hand contact
maps are expressed in the cylinder's polar surface coordinates, carried
across parts of different sizes, and a hand pose is optimized against the
transferred map. A rigid-registration baseline and the evaluation metrics
live alongside the pipeline.
"""

from .contact import (ContactMap, ContactPoint, extract_contact_map,
                      lift_to_gc, load_contact_map, save_contact_map)
from .errors import (ContactError, GcBuildError, GcGraspError, InputError,
                     MeshError, MethodError, OptimizationError,
                     WatertightError)
from .gc import (GcCoordinate, GeneralizedCylinder, Skeleton, build_gc,
                 load_gc, load_skeleton, save_gc, save_skeleton)
from .hand import (HandPose, HandTemplate, PosedHand, build_default_template,
                   default_template, load_pose, load_template, pose_hand,
                   save_pose, save_template)
from .mesh import TriMesh, load_mesh, sample_surface, save_obj
from .metrics import (MetricsReport, compute_metrics, contact_ratio,
                      disjointed_distance, load_metrics, penetration_depth,
                      penetration_volume, save_metrics)
from .optim import (GraspObjective, LossReport, OptimizerConfig,
                    optimize_pose, save_report)
from .sdf import SdfGrid, build_sdf, load_gsdf, save_gsdf, voxelize_occupancy
from .transfer import (TransferResult, load_transfer_result,
                       save_transfer_result, transfer_contact,
                       transfer_preg_baseline)

__version__ = "0.1.0"

__all__ = [
    "ContactMap", "ContactPoint", "extract_contact_map", "lift_to_gc",
    "load_contact_map", "save_contact_map",
    "ContactError", "GcBuildError", "GcGraspError", "InputError",
    "MeshError", "MethodError", "OptimizationError", "WatertightError",
    "GcCoordinate", "GeneralizedCylinder", "Skeleton", "build_gc",
    "load_gc", "load_skeleton", "save_gc", "save_skeleton",
    "HandPose", "HandTemplate", "PosedHand", "build_default_template",
    "default_template", "load_pose", "load_template", "pose_hand",
    "save_pose", "save_template",
    "TriMesh", "load_mesh", "sample_surface", "save_obj",
    "MetricsReport", "compute_metrics", "contact_ratio",
    "disjointed_distance", "load_metrics", "penetration_depth",
    "penetration_volume", "save_metrics",
    "GraspObjective", "LossReport", "OptimizerConfig", "optimize_pose",
    "save_report",
    "SdfGrid", "build_sdf", "load_gsdf", "save_gsdf", "voxelize_occupancy",
    "TransferResult", "load_transfer_result", "save_transfer_result",
    "transfer_contact", "transfer_preg_baseline",
]
