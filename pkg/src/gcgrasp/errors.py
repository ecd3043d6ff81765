"""Exception hierarchy shared across the package.

Two broad families matter to callers (and to the CLI exit codes):
``InputError`` for anything wrong with files, configs, or input meshes,
and ``MethodError`` for algorithm failures on otherwise valid inputs.
"""


class GcGraspError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GcGraspError):
    """Invalid input: missing file, parse failure, violated precondition."""


class MethodError(GcGraspError):
    """A pipeline stage failed on valid inputs (e.g. no contact found)."""


class MeshError(InputError):
    """Mesh-level validation failure (bad indices, empty mesh, ...)."""


class WatertightError(InputError):
    """Operation requires a closed mesh and the input is not."""


class GcBuildError(MethodError):
    """Generalized-cylinder construction failed (e.g. empty slice)."""


class ContactError(MethodError):
    """Contact extraction or lifting produced an empty result."""


class OptimizationError(MethodError):
    """Pose optimization aborted (non-finite loss)."""
