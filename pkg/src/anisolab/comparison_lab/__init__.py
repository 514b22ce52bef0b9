"""Comparison laboratory: scenario records for every verified theorem.

Each verifier takes a LabScenario (chart + field + frozen constants) and
returns VerificationRecord rows; excluded records carry the hypothesis
that failed rather than silently disappearing.
"""

from .records import (
    TOL_THM,
    LabScenario,
    RecordSummary,
    VerificationRecord,
    VolumeEstimate,
    exclude_record,
    failed_records,
    make_record,
    make_scenario,
    summarize,
)
from .radial import (
    curvature_floor,
    ric_extended,
    ric_trace_extended,
    verify_mean_curvature,
    verify_meyer,
    verify_riccati,
)
from .volume import (
    PolarSweep,
    annulus_comparison_integral,
    ball_comparison_integral,
    cylinder_ball_volume,
    gate_constants,
    jackknife,
    polar_sweep,
    scenario_sweep,
    verify_volume_monotonicity,
    verify_weighted_ratio,
    verify_yau_growth,
    weighted_prefactor,
)
from .global_checks import (
    evaluate_end_bound,
    verify_excess,
    verify_qmp,
    verify_splitting_premises,
)
from .hypersurface import (
    Immersion,
    catenoid,
    flat_plane,
    induced_chart,
    round_sphere,
    shape_field,
    squared_shape_field,
    verify_hypersurface,
)

__all__ = [
    "TOL_THM",
    "LabScenario",
    "RecordSummary",
    "VerificationRecord",
    "VolumeEstimate",
    "exclude_record",
    "failed_records",
    "make_record",
    "make_scenario",
    "summarize",
    "curvature_floor",
    "ric_extended",
    "ric_trace_extended",
    "verify_mean_curvature",
    "verify_meyer",
    "verify_riccati",
    "PolarSweep",
    "annulus_comparison_integral",
    "ball_comparison_integral",
    "cylinder_ball_volume",
    "gate_constants",
    "jackknife",
    "polar_sweep",
    "scenario_sweep",
    "verify_volume_monotonicity",
    "verify_weighted_ratio",
    "verify_yau_growth",
    "weighted_prefactor",
    "evaluate_end_bound",
    "verify_excess",
    "verify_qmp",
    "verify_splitting_premises",
    "Immersion",
    "catenoid",
    "flat_plane",
    "induced_chart",
    "round_sphere",
    "shape_field",
    "squared_shape_field",
    "verify_hypersurface",
]
