"""sheetslice: slices of the Brownian sheet, capacities and Monte Carlo checks."""

__version__ = "0.1.0"

from .core.capkit import DiscreteMeasure, Kernel, capacity
from .core.randfield import GridSpec, build_sheet, sample_white_noise, slice_at
from .core.setkit import CompactSet1D, kolmogorov_entropy, minkowski_content, upsilon
from .errors import ConfigurationError, DomainError, InconclusiveError, MergeError, SheetSliceError

__all__ = [
    "CompactSet1D",
    "ConfigurationError",
    "DiscreteMeasure",
    "DomainError",
    "GridSpec",
    "InconclusiveError",
    "Kernel",
    "MergeError",
    "SheetSliceError",
    "build_sheet",
    "capacity",
    "kolmogorov_entropy",
    "minkowski_content",
    "sample_white_noise",
    "slice_at",
    "upsilon",
]
