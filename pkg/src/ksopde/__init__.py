"""Nonlinear connections, SOPDEs and k-symplectic Lagrangians on T^1_k Q in one global chart."""

from .bundle import (
    BundlePoint,
    TangentVector,
    Tensor11Field,
    apply_tensor,
    compose,
    ktangent,
    lie_derivative,
    liouville,
    liouville_A,
    map_i,
    map_j,
    map_kA,
    probe_points,
)
from .connection import (
    Connection,
    Curvature,
    NotAConnectionTensor,
    almost_product,
    connection_from_gamma,
    curvature,
    horizontal_lift,
    horizontal_map,
    horizontal_projector,
    vertical_projector,
)
from .expr import Dims, Dual, Expr, Var, diff, eval_dual, evaluate, parse, to_text
from .lagrangian import (
    Lagrangian,
    el_residual,
    energy,
    forms,
    hessian,
    regularity,
    solve_el_coefficients,
    wave_lagrangian,
)
from .sections import (
    GridMap,
    Prolongation,
    heat_solution,
    integrate_k1,
    prolong,
    read_csv,
    section_residual,
    write_csv,
)
from .sopde import (
    CheckResult,
    KVectorField,
    LinearSopde,
    NotLinear,
    Sopde,
    check_connection_fixed_point,
    check_sopde_fixed_point,
    connection_from_sopde,
    curvature_vanishes_for_linear,
    heat_sopde,
    integrability_symmetry,
    is_sopde,
    linearize,
    sopde_from_connection,
    spray_sopde,
)

__all__ = [
    "BundlePoint",
    "CheckResult",
    "Connection",
    "Curvature",
    "Dims",
    "Dual",
    "Expr",
    "GridMap",
    "KVectorField",
    "Lagrangian",
    "LinearSopde",
    "NotAConnectionTensor",
    "NotLinear",
    "Prolongation",
    "Sopde",
    "TangentVector",
    "Tensor11Field",
    "Var",
    "almost_product",
    "apply_tensor",
    "check_connection_fixed_point",
    "check_sopde_fixed_point",
    "compose",
    "connection_from_gamma",
    "connection_from_sopde",
    "curvature",
    "curvature_vanishes_for_linear",
    "diff",
    "el_residual",
    "energy",
    "eval_dual",
    "evaluate",
    "forms",
    "heat_solution",
    "heat_sopde",
    "hessian",
    "horizontal_lift",
    "horizontal_map",
    "horizontal_projector",
    "integrability_symmetry",
    "integrate_k1",
    "is_sopde",
    "ktangent",
    "lie_derivative",
    "linearize",
    "liouville",
    "liouville_A",
    "map_i",
    "map_j",
    "map_kA",
    "parse",
    "probe_points",
    "prolong",
    "read_csv",
    "regularity",
    "section_residual",
    "solve_el_coefficients",
    "sopde_from_connection",
    "spray_sopde",
    "to_text",
    "vertical_projector",
    "wave_lagrangian",
    "write_csv",
]

__version__ = "0.1.0"
