"""Spectra, eigenfunction geometry and orthogonality relations for PT-symmetric polynomial potentials."""

from .ode import ComplexPath, PotentialSpec, SolutionState, integrate, potential_eval
from .spectrum import EigenvalueRecord, SearchBox, count_in_box, refine, scan, shift_cubic, verify_sector
from .grid import FieldGrid, build_grid
from .zeros import ZeroKind, ZeroRecord, find_zeros

__version__ = "0.1.0"

__all__ = [
    "ComplexPath", "EigenvalueRecord", "FieldGrid", "PotentialSpec", "SearchBox", "SolutionState",
    "ZeroKind", "ZeroRecord", "build_grid", "count_in_box", "find_zeros", "integrate", "potential_eval",
    "refine", "scan", "shift_cubic", "verify_sector",
]
