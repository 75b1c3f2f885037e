"""Minimal-action connections in weighted metric spaces.

Connections between wells of a potential are found in two steps: minimize a
weighted geodesic length (the reduced problem), then reparametrize to the
equipartition profile that turns the geodesic back into an action minimizer.
The same machinery runs in function space, where each "point" is a 1D profile
and a path of profiles assembles into a 2D field.  A weight with vanishing
tails shows the limits of the method: its infimum is not attained and the
package demonstrates the escape to infinity numerically.
"""

from .counterexample import (
    P_MINUS,
    P_PLUS,
    CounterexampleWeight,
    DivergentTailError,
    NonexistenceReport,
    candidate_length,
    crossing_abscissas,
    crossing_lower_bound,
    dense_polyline_length,
    nonexistence_report,
)
from .double_connection import (
    DoubleConnectionResult,
    DoubleOptions,
    DoubleReport,
    ScanWindowError,
    TranslationSpeedAudit,
    assemble_and_verify,
    audit_translation_speed,
    planar_effective_space,
    s0_scan,
    sin_example_space,
    solve_asymmetric,
    solve_symmetric,
)
from .function_space import (
    EffectivePotentialSpace,
    FunnelEntryError,
    FunnelProfile,
    GridFunction,
    TranslationFit,
    funnel_profile,
    funnel_project,
    gauge_fix_translations,
    mollify,
    optimal_translation,
    translation_objective,
)
from .geodesic import (
    SolveTrace,
    SolverOptions,
    minimize_k_length,
    refine_nodes,
    remove_sigma_loops,
)
from .heteroclinic import (
    ConnectionReport,
    ConnectionResult,
    InteriorZeroError,
    action_ew,
    reparam_equipartition,
    verify_connection,
)
from .metric import (
    EuclideanSpace,
    GridL2Space,
    SampledCurve,
    WeightedSpace,
    ZeroLengthCurveError,
    a_k_functional,
    dk_lower_bound,
    k_length,
    length_d,
    metric_derivative,
    reparametrize_constant_speed,
    segment_lengths,
)
from .potentials import (
    A4Fit,
    H3aReport,
    Potential,
    StiReport,
    WellRefinementError,
    check_a4,
    check_h3a,
    check_sti,
    double_well,
    make_weight,
    planar_two_well,
    refine_wells,
    triple_well,
)
from .regularity import (
    SecondDifferenceReport,
    SpectralReport,
    UniformBoundsReport,
    parallelogram_defect,
    second_difference_bound,
    spectral_audit,
    uniform_bounds_audit,
)

__version__ = "0.1.0"

__all__ = [
    "A4Fit",
    "ConnectionReport",
    "ConnectionResult",
    "CounterexampleWeight",
    "DivergentTailError",
    "DoubleConnectionResult",
    "DoubleOptions",
    "DoubleReport",
    "EffectivePotentialSpace",
    "EuclideanSpace",
    "FunnelEntryError",
    "FunnelProfile",
    "GridFunction",
    "GridL2Space",
    "H3aReport",
    "InteriorZeroError",
    "NonexistenceReport",
    "P_MINUS",
    "P_PLUS",
    "Potential",
    "SampledCurve",
    "ScanWindowError",
    "SecondDifferenceReport",
    "SolveTrace",
    "SolverOptions",
    "SpectralReport",
    "StiReport",
    "TranslationFit",
    "TranslationSpeedAudit",
    "UniformBoundsReport",
    "WeightedSpace",
    "WellRefinementError",
    "ZeroLengthCurveError",
    "a_k_functional",
    "action_ew",
    "assemble_and_verify",
    "audit_translation_speed",
    "candidate_length",
    "check_a4",
    "check_h3a",
    "check_sti",
    "crossing_abscissas",
    "crossing_lower_bound",
    "dense_polyline_length",
    "dk_lower_bound",
    "double_well",
    "funnel_profile",
    "funnel_project",
    "gauge_fix_translations",
    "k_length",
    "length_d",
    "make_weight",
    "metric_derivative",
    "minimize_k_length",
    "mollify",
    "nonexistence_report",
    "optimal_translation",
    "parallelogram_defect",
    "planar_effective_space",
    "planar_two_well",
    "refine_nodes",
    "refine_wells",
    "remove_sigma_loops",
    "reparam_equipartition",
    "reparametrize_constant_speed",
    "s0_scan",
    "second_difference_bound",
    "segment_lengths",
    "sin_example_space",
    "solve_asymmetric",
    "solve_symmetric",
    "spectral_audit",
    "translation_objective",
    "triple_well",
    "uniform_bounds_audit",
    "verify_connection",
]
