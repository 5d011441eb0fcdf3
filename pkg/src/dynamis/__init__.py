"""Dynamic approximate maximum independent sets of disks and fat objects."""
from .engine import DiskEngine
from .errors import DynamisError
from .geometry import Box, Disk, FatObject, disks_intersect, objects_intersect
from .mix import MixPublisher, mix_steps
from .oracle import exact_mis
from .shifted_grid import GridFamily, ShiftedGridEngine

__all__ = [
    "Box", "Disk", "DiskEngine", "DynamisError", "FatObject", "GridFamily", "MixPublisher",
    "ShiftedGridEngine", "disks_intersect", "exact_mis", "mix_steps", "objects_intersect",
]
__version__ = "0.1.0"
