"""Voltage planning: target-shape tracking and roof-constrained bending.

Both planners score candidate voltages through the calibrated shape
model and search the admissible voltage box with the surrogate
optimizer.  Target tracking minimizes the integrated squared gap to a
reference curve; roof planning minimizes a penalized clearance loss
that drives the body as close to the safety line as possible without
ever crossing it.
"""

from __future__ import annotations

import json
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .calibration import CorrectionField, corrected_shape
from .errors import ConfigError
from .optimizer import BoxDomain, GpConfig, minimize
from .roofs import SafetyLine
from .shape import RobotParams, ShapeCurve, read_shape_csv, solve_shape

__all__ = [
    "ShapeModel",
    "RoofLossConfig",
    "ControlCommand",
    "load_target_shape",
    "shape_loss",
    "safety_clearance",
    "roof_loss",
    "solve_target_shape",
    "solve_roof_shape",
    "command_record",
    "write_command_records",
]


@dataclass(frozen=True)
class ShapeModel:
    """Physics model plus optional learned correction."""

    params: RobotParams
    correction: CorrectionField | None = None
    ground: bool = True

    def predict(self, v) -> ShapeCurve:
        shape = solve_shape(self.params, v, ground=self.ground).shape
        if self.correction is not None:
            shape = corrected_shape(self.correction, shape, np.asarray(v, float))
        return shape


@dataclass(frozen=True)
class RoofLossConfig:
    """Clearance-loss shape: collision penalty and footprint sampling."""

    penalty_cm: float = 1000.0
    sample_count: int = 201

    def __post_init__(self):
        if self.penalty_cm <= 0:
            raise ConfigError("collision penalty must be positive")
        if self.sample_count < 2:
            raise ConfigError("need at least 2 footprint samples")


@dataclass(frozen=True)
class ControlCommand:
    """Planned voltages with the model's prediction and diagnostics.

    ``dy_max_cm``/``dy_min_cm`` are the signed worst overshoot and the
    closest absolute distance to the safety line over the sampled
    footprint; they are ``None`` for commands planned without a roof.
    ``fallback`` marks the safe flat posture returned when every probe
    of the voltage box violated the line.
    """

    v: np.ndarray
    predicted: ShapeCurve
    loss: float
    dy_max_cm: float | None = None
    dy_min_cm: float | None = None
    fallback: bool = False


def load_target_shape(path, params: RobotParams) -> ShapeCurve:
    """Read a target curve and resample it onto the model grid."""
    raw = read_shape_csv(path)
    y = np.interp(params.grid_m, raw.x_m, raw.y_m)
    return ShapeCurve(x_m=params.grid_m, y_m=y)


def shape_loss(v, target: ShapeCurve, model: ShapeModel) -> float:
    """Integrated squared tracking gap, cm^2 * cm.

    Trapezoidal integral of (predicted - target)^2 over the body, with
    both curves in cm; equals body length times the mean squared error
    up to the trapezoid end-weight correction.
    """
    predicted = model.predict(v)
    if not predicted.same_grid(target):
        raise ConfigError("target grid does not match the model grid")
    gap_cm = (predicted.y_m - target.y_m) * 100.0
    return float(np.trapezoid(gap_cm**2, predicted.x_m * 100.0))


def safety_clearance(
    shape: ShapeCurve,
    line: SafetyLine,
    x0_m: float,
    cfg: RoofLossConfig,
) -> tuple[float, float]:
    """Signed max overshoot and min |gap| vs the safety line, in cm.

    The footprint [x0, x0 + length] is sampled at ``cfg.sample_count``
    points; samples outside the roof's domain are unconstrained and
    ignored.  With no constrained sample at all, returns (-inf, inf).
    """
    length = float(shape.x_m[-1] - shape.x_m[0])
    xs_local = np.linspace(0.0, length, cfg.sample_count)
    xs_world = x0_m + xs_local
    mask = line.roof.contains(xs_world)
    if not np.any(mask):
        return float("-inf"), float("inf")
    y_robot = np.interp(xs_local[mask], shape.x_m - shape.x_m[0], shape.y_m)
    y_safe = line.height_at(xs_world[mask])
    gap_cm = (y_robot - y_safe) * 100.0
    return float(np.max(gap_cm)), float(np.min(np.abs(gap_cm)))


def roof_loss(
    v,
    line: SafetyLine,
    x0_m: float,
    model: ShapeModel,
    cfg: RoofLossConfig | None = None,
) -> float:
    """Penalized clearance loss, cm.

    Any overshoot above the safety line costs the overshoot plus the
    large penalty; otherwise the loss is the closest distance to the
    line, so minimizing drives the body up to a touch without crossing.
    """
    cfg = cfg or RoofLossConfig()
    dy_max, dy_min = safety_clearance(model.predict(v), line, x0_m, cfg)
    if dy_max > 0.0:
        return dy_max + cfg.penalty_cm
    if not np.isfinite(dy_min):
        return 0.0
    return dy_min


def solve_target_shape(
    target: ShapeCurve,
    model: ShapeModel,
    domain: BoxDomain,
    budget: int,
    seed: int = 0,
    gp_config: GpConfig | None = None,
    extra_inits: Sequence[np.ndarray] | None = None,
) -> ControlCommand:
    """Search the voltage box for the best tracking command."""
    result = minimize(
        lambda v: shape_loss(v, target, model),
        domain,
        budget=budget,
        seed=seed,
        gp_config=gp_config,
        extra_inits=extra_inits,
    )
    return ControlCommand(
        v=result.best_v,
        predicted=model.predict(result.best_v),
        loss=result.best_loss,
    )


def solve_roof_shape(
    line: SafetyLine,
    x0_m: float,
    model: ShapeModel,
    domain: BoxDomain,
    budget: int,
    seed: int = 0,
    cfg: RoofLossConfig | None = None,
    gp_config: GpConfig | None = None,
    extra_inits: list[np.ndarray] | None = None,
) -> ControlCommand:
    """Plan the closest non-crossing posture under the safety line.

    When every probed voltage violates the line (an infeasible margin),
    the safe flat posture V=0 is returned with ``fallback=True`` rather
    than a violating incumbent.
    """
    cfg = cfg or RoofLossConfig()

    def loss(v):
        return roof_loss(v, line, x0_m, model, cfg)

    result = minimize(
        loss,
        domain,
        budget=budget,
        seed=seed,
        gp_config=gp_config,
        extra_inits=extra_inits,
    )
    best_v = result.best_v
    best_loss = result.best_loss
    fallback = best_loss >= cfg.penalty_cm
    if fallback:
        best_v = np.zeros(model.params.n_actuators)
        best_loss = roof_loss(best_v, line, x0_m, model, cfg)
    predicted = model.predict(best_v)
    dy_max, dy_min = safety_clearance(predicted, line, x0_m, cfg)
    return ControlCommand(
        v=best_v,
        predicted=predicted,
        loss=best_loss,
        dy_max_cm=dy_max,
        dy_min_cm=dy_min,
        fallback=fallback,
    )


def command_record(command: ControlCommand, x0_m: float) -> dict:
    """JSON-ready summary of one planned command."""
    return {
        "x0_cm": x0_m * 100.0,
        "v_volts": [float(x) for x in command.v],
        "loss": command.loss,
        "dy_max_cm": command.dy_max_cm,
        "dy_min_cm": command.dy_min_cm,
        "peak_cm": command.predicted.peak_m * 100.0,
    }


def write_command_records(path, records: list[dict]) -> None:
    """Write command summaries as JSON lines."""
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
