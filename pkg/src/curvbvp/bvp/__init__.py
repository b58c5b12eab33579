"""The nonlinear boundary value problem: data, criteria, majorant library and solver."""

from .criteria import Cor1Report, SolvabilityVerdict, check_cor1, solvability_verdict
from .library import LibraryMajorant, euler_product, euler_reciprocal, library_majorants
from .model import (
    BVPSpec,
    CurvatureOperator,
    FSpec,
    HypothesisReport,
    LcResult,
    check_hypotheses,
    compute_Lc,
    lc_details,
    linearized_majorant,
    sine_cubic_problem,
)
from .solver import (
    BVPSolution,
    IterationRecord,
    MembershipReport,
    TailExtended,
    apply_operator,
    fixed_point_solve,
    linearization,
    manufactured_b_expression,
    manufactured_problem,
    nonlinear_residual,
    omega_ceiling,
    verify_S_membership,
)

__all__ = [
    "BVPSolution",
    "BVPSpec",
    "Cor1Report",
    "CurvatureOperator",
    "FSpec",
    "HypothesisReport",
    "IterationRecord",
    "LcResult",
    "LibraryMajorant",
    "MembershipReport",
    "SolvabilityVerdict",
    "TailExtended",
    "apply_operator",
    "check_cor1",
    "check_hypotheses",
    "compute_Lc",
    "euler_product",
    "euler_reciprocal",
    "fixed_point_solve",
    "lc_details",
    "library_majorants",
    "linearization",
    "linearized_majorant",
    "manufactured_b_expression",
    "manufactured_problem",
    "nonlinear_residual",
    "omega_ceiling",
    "sine_cubic_problem",
    "solvability_verdict",
    "verify_S_membership",
]
