"""softcrawl: shape control, calibration, and gait planning for a
piezoelectric crawling robot moving under height constraints."""

__version__ = "0.1.0"

from .calibration import (
    CalibrationSample,
    CorrectionField,
    calibrate_batch,
    corrected_shape,
    lms_update,
)
from .controller import (
    ControlCommand,
    RoofLossConfig,
    ShapeModel,
    roof_loss,
    shape_loss,
    solve_roof_shape,
    solve_target_shape,
)
from .errors import (
    ConfigError,
    OptimizerError,
    SafetyViolationError,
    ShapeSolveError,
    SoftcrawlError,
    UnboundedShapeError,
)
from .gait import (
    CycleResult,
    GaitPhase,
    advance_cycle,
    speed_vs_height_curve,
    stride_per_cycle,
)
from .optimizer import (
    BoxDomain,
    GpConfig,
    Observation,
    expected_improvement,
    gp_posterior,
    minimize,
)
from .plant import (
    Plant,
    PlantParams,
    SensedShape,
    make_linear_deviation,
    plant_shape,
)
from .roofs import (
    PiecewiseLinearRoof,
    SafetyLine,
    SinusoidalRoof,
    SlantedRoof,
    StepRoof,
    load_profile,
)
from .shape import (
    ContactSolution,
    RobotParams,
    ShapeCurve,
    actuation_moment_profile,
    chord_shortening,
    fit_moment_gain,
    shape_mse,
    solve_shape,
)

__all__ = [
    "__version__",
    "BoxDomain",
    "CalibrationSample",
    "ConfigError",
    "ContactSolution",
    "ControlCommand",
    "CorrectionField",
    "CycleResult",
    "GaitPhase",
    "GpConfig",
    "Observation",
    "OptimizerError",
    "PiecewiseLinearRoof",
    "Plant",
    "PlantParams",
    "RobotParams",
    "RoofLossConfig",
    "SafetyLine",
    "SafetyViolationError",
    "SensedShape",
    "ShapeCurve",
    "ShapeModel",
    "ShapeSolveError",
    "SinusoidalRoof",
    "SlantedRoof",
    "SoftcrawlError",
    "StepRoof",
    "UnboundedShapeError",
    "actuation_moment_profile",
    "advance_cycle",
    "calibrate_batch",
    "chord_shortening",
    "corrected_shape",
    "expected_improvement",
    "fit_moment_gain",
    "gp_posterior",
    "lms_update",
    "load_profile",
    "make_linear_deviation",
    "minimize",
    "plant_shape",
    "roof_loss",
    "shape_loss",
    "shape_mse",
    "solve_roof_shape",
    "solve_shape",
    "solve_target_shape",
    "speed_vs_height_curve",
    "stride_per_cycle",
]
