from .errors import (
    CCHardyError,
    HoermanderFailure,
    Singularity,
    DegenerateBasis,
    InconclusiveVolume,
    ComparabilityViolation,
    NoPathFound,
    NonConvergence,
    ExponentViolation,
    GridError,
    DisconnectedDomain,
    EmptyDomain,
    NonFiniteWeight,
    ZeroGradient,
    PropertyViolation,
    AnomalousExcess,
)
from .frames import (
    VectorFieldSystem,
    CommutatorBasis,
    HTypeGroup,
    eval_frame,
    lie_bracket,
    build_commutator_basis,
    htype_ops,
)
from .systems import Geometry, get_system, geometry_for, builtin_names, load_system_file
from .nsw import (
    LocalParameters,
    nsw_profile,
    homogeneous_dimensions,
    ball_volume,
    comparability_report,
)
from .metric import (
    cc_distance,
    boundary_distance,
    fundamental_solution,
    gauge_profile,
    rho_gauge,
)
from .shapes import parse_shape
from .grid import (
    GridDomain,
    GridFunction,
    discretize,
    x_gradient,
    truncated_maximal,
    weak_norm,
    integrate,
)
from .capacity import (
    Condenser,
    p_capacity,
    annulus_check,
    fatness_scan,
    self_improvement,
    DiscreteMeasure,
    wolff,
)
from .cover import whitney, hausdorff_content, thickness_report
from .weights import WeightSpec
from .hardy import (
    HardyReport,
    hardy_ratio,
    maximize_ratio,
    pointwise_constant,
    mazya_check,
    fefferman_phong,
    sharp_experiment,
    hardy_1d,
    corollary_weights,
)

__version__ = "0.1.0"

__all__ = [
    "CCHardyError",
    "HoermanderFailure",
    "Singularity",
    "DegenerateBasis",
    "InconclusiveVolume",
    "ComparabilityViolation",
    "NoPathFound",
    "NonConvergence",
    "ExponentViolation",
    "GridError",
    "DisconnectedDomain",
    "EmptyDomain",
    "NonFiniteWeight",
    "ZeroGradient",
    "PropertyViolation",
    "AnomalousExcess",
    "VectorFieldSystem",
    "CommutatorBasis",
    "HTypeGroup",
    "eval_frame",
    "lie_bracket",
    "build_commutator_basis",
    "htype_ops",
    "Geometry",
    "get_system",
    "geometry_for",
    "builtin_names",
    "load_system_file",
    "LocalParameters",
    "nsw_profile",
    "homogeneous_dimensions",
    "ball_volume",
    "comparability_report",
    "cc_distance",
    "boundary_distance",
    "fundamental_solution",
    "gauge_profile",
    "rho_gauge",
    "parse_shape",
    "GridDomain",
    "GridFunction",
    "discretize",
    "x_gradient",
    "truncated_maximal",
    "weak_norm",
    "integrate",
    "Condenser",
    "p_capacity",
    "annulus_check",
    "fatness_scan",
    "self_improvement",
    "DiscreteMeasure",
    "wolff",
    "whitney",
    "hausdorff_content",
    "thickness_report",
    "WeightSpec",
    "HardyReport",
    "hardy_ratio",
    "maximize_ratio",
    "pointwise_constant",
    "mazya_check",
    "fefferman_phong",
    "sharp_experiment",
    "hardy_1d",
    "corollary_weights",
]
