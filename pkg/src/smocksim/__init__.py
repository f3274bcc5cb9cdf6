"""Preview smocked fabric from a stitching pattern.

Pipeline: parse a pattern, simulate its coarse spring system in the plane,
lift the result to 3D guide targets, and deform a fine mesh toward them.
"""

from .errors import (Infeasible, MaxIterationsExceeded, NonFinite, NumericalBlowup, SchemaError,
                     SmockError, SolverSingular, ValidationError)
from .pattern import (BUNDLED, Pattern, SpringSystem, bundled_pattern, extract_springs,
                      load_pattern, parse_pattern)
from .sim2d import SimConfig2D, simulate, simulate_canadian
from .lift3d import HeightMode, build_constraints
from .deform3d import DeformConfig, deform, export_obj, make_fine_mesh
from .baseline_opt import solve_direct

__version__ = "0.1.0"

__all__ = [
    "BUNDLED", "DeformConfig", "HeightMode", "Infeasible", "MaxIterationsExceeded", "NonFinite",
    "NumericalBlowup", "Pattern", "SchemaError", "SimConfig2D", "SmockError", "SolverSingular",
    "SpringSystem", "ValidationError", "build_constraints", "bundled_pattern", "deform",
    "export_obj", "extract_springs", "load_pattern", "make_fine_mesh", "parse_pattern",
    "simulate", "simulate_canadian", "solve_direct",
]
