"""Numerical laboratory for curve shortening flow of space curves.

Discrete space curves in R^3 evolve by their curvature vector; the lab
provides exact solitons (grim reapers, Angenent ovals) as initial data,
regression oracles and moving barriers, a construction that splices two
perpendicular half reapers into a nonplanar ramp, and monitors for every
quantitative property the construction rests on.
"""

from .geometry import (
    EndLine,
    FrenetData,
    Slab,
    SpaceCurve,
    compute_frenet,
    hausdorff_distance,
    nonplanarity,
    read_snapshot,
    resample_by_arclength,
    slab_margin,
    write_snapshot,
)
from .solitons import (
    BarrierCylinder,
    ReaperSpec,
    cylinder_clearance,
    sample_angenent_oval,
    sample_grim_reaper,
    slab_distance,
    verify_soliton_residual,
)
from .flow import FlowState, StepControl, evolve, flow_step, stability_dt
from .construction import (
    SpliceConfig,
    RampDiagnostics,
    assemble_splice,
    asymptote_lines,
    build_half_reaper_xy,
    build_half_reaper_yz,
    place_barriers,
)
from .monitors import (
    AreaReport,
    MonitorReport,
    RegionSpec,
    barrier_clearance,
    check_area_inequality,
    geometry_report,
    ramp_diagnostics,
    region_area,
    small_angle_check,
)
from .scenario import ScenarioConfig, parse_scenario, run_scenario, export_plotdata

__version__ = "0.1.0"
