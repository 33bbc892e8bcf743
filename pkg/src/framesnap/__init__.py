"""Strain-energy critical points and snappability of bar-joint frameworks."""

from .framework import (
    Framework,
    GaugeChart,
    Material,
    Realization,
    build_framework,
    build_realization,
    canonicalize,
    congruent_mod_se,
    edge_lengths,
    gauge_chart,
    realization_from_free,
)
from .energy import (
    EnergyProfile,
    PMetric,
    SelfStress,
    bar_force,
    energy_density,
    energy_gradient,
    energy_hessian,
    p_distance,
    p_metric,
    self_stress,
    snappability_pseudometric,
    strain,
    total_energy,
)
from .polysys import (
    PolynomialSystem,
    assemble_lagrange_system,
    grouped_path_count,
    total_degree_path_count,
)
from .homotopy import SolutionPoint, TrackerConfig, solve_total_degree
from .catalog import (
    CriticalPoint,
    RealizationCatalog,
    SolverConfig,
    build_catalog,
    classify,
    filter_realizations,
    refine_critical_point,
    solve_multistart,
)

__version__ = "0.1.0"

from .snapping import (
    DeformationPath,
    PathSample,
    RelaxationResult,
    SaddleAttempt,
    SingularSample,
    SnapConfig,
    SnappabilityReport,
    StableIndexReport,
    detect_reality_boundary,
    framework_snappability,
    relax,
    snappability_index,
    snappability_report,
    track_segment,
)
from .documents import (
    emit_report,
    export_trajectory,
    framework_to_document,
    parse_framework,
    report_document,
)
from .svgrender import RenderStyle, render_catalog_svg, render_svg
