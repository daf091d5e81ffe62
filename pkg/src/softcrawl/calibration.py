"""Linear shape correction learned online.

The predicted robot shape is the physics model's shape plus a
node-wise linear term ``alpha(x)^T V``; the coefficient table alpha is
learned from sensed-vs-predicted residuals by least-mean-squares
updates.  All coefficients are stored in cm per volt, matching the
inspection CSV format.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .shape import RobotParams, ShapeCurve

__all__ = [
    "CorrectionField",
    "CalibrationSample",
    "corrected_shape",
    "lms_update",
    "calibrate_batch",
    "default_learning_rate",
    "write_correction_csv",
    "read_correction_csv",
]


@dataclass(frozen=True)
class CorrectionField:
    """Per-node linear voltage-to-displacement correction, cm/V."""

    x_m: np.ndarray
    alpha_cm_per_v: np.ndarray  # (n_nodes, n_actuators)
    learning_rate: float | None = None

    def __post_init__(self):
        x = np.asarray(self.x_m, dtype=float)
        alpha = np.asarray(self.alpha_cm_per_v, dtype=float)
        object.__setattr__(self, "x_m", x)
        object.__setattr__(self, "alpha_cm_per_v", alpha)
        if alpha.ndim != 2 or alpha.shape[0] != x.shape[0]:
            raise ConfigError("alpha must be (n_nodes, n_actuators)")
        if not np.all(np.isfinite(alpha)):
            raise ConfigError("alpha must be finite at every node")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ConfigError("learning rate must be positive")

    @classmethod
    def zeros(
        cls, params: RobotParams, learning_rate: float | None = None
    ) -> "CorrectionField":
        return cls(
            x_m=params.grid_m,
            alpha_cm_per_v=np.zeros((params.n_nodes, params.n_actuators)),
            learning_rate=learning_rate,
        )


@dataclass(frozen=True)
class CalibrationSample:
    """One sensed shape with the voltages and model prediction behind it."""

    v: np.ndarray
    sensed: ShapeCurve
    model_shape: ShapeCurve

    def __post_init__(self):
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if not self.sensed.same_grid(self.model_shape):
            raise ConfigError("sample shapes must share one grid")


def _check_grid(field: CorrectionField, shape: ShapeCurve) -> None:
    if field.x_m.shape != shape.x_m.shape or not np.allclose(
        field.x_m, shape.x_m
    ):
        raise ConfigError("correction grid does not match the shape grid")


def corrected_shape(
    field: CorrectionField, model_shape: ShapeCurve, v: np.ndarray
) -> ShapeCurve:
    """Apply the node-wise linear correction to a model shape."""
    _check_grid(field, model_shape)
    v = np.asarray(v, dtype=float)
    if v.shape != (field.alpha_cm_per_v.shape[1],):
        raise ConfigError("voltage vector length does not match alpha")
    delta_m = (field.alpha_cm_per_v @ v) / 100.0
    return ShapeCurve(x_m=model_shape.x_m, y_m=model_shape.y_m + delta_m)


def lms_update(
    field: CorrectionField, sample: CalibrationSample
) -> CorrectionField:
    """One least-mean-squares step on every node.

    Per node, alpha <- alpha - eta * (alpha^T V - dy) * V where dy is
    the sensed-minus-model residual in cm.
    """
    _check_grid(field, sample.model_shape)
    if field.learning_rate is None:
        raise ConfigError("correction field has no learning rate set")
    v = sample.v
    dy_cm = (sample.sensed.y_m - sample.model_shape.y_m) * 100.0
    residual = field.alpha_cm_per_v @ v - dy_cm
    alpha = field.alpha_cm_per_v - field.learning_rate * np.outer(residual, v)
    return replace(field, alpha_cm_per_v=alpha)


def default_learning_rate(samples: list[CalibrationSample]) -> float:
    """Normalized-LMS-style safe step: 0.5 / max ||V||^2 over the set."""
    if not samples:
        raise ConfigError("need at least one calibration sample")
    vmax = max(float(np.dot(s.v, s.v)) for s in samples)
    if vmax <= 0:
        raise ConfigError("calibration set has no nonzero voltages")
    return 0.5 / vmax


def calibrate_batch(
    field: CorrectionField, samples: list[CalibrationSample], epochs: int
) -> CorrectionField:
    """Run LMS over the samples, in order, for the given epoch count.

    When the field carries no learning rate, the default safe step for
    this sample set is filled in first.
    """
    if not samples:
        raise ConfigError("need at least one calibration sample")
    if epochs < 0:
        raise ConfigError("epochs must be nonnegative")
    if field.learning_rate is None:
        field = replace(field, learning_rate=default_learning_rate(samples))
    for _ in range(epochs):
        for sample in samples:
            field = lms_update(field, sample)
    return field


def write_correction_csv(path, field: CorrectionField) -> None:
    """Serialize the coefficient table as x_cm,a1..a5."""
    n_act = field.alpha_cm_per_v.shape[1]
    header = ["x_cm"] + [f"a{i + 1}" for i in range(n_act)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for x, row in zip(field.x_m, field.alpha_cm_per_v):
            writer.writerow(
                [f"{x * 100.0:.10g}"] + [f"{a:.10g}" for a in row]
            )


def read_correction_csv(path) -> CorrectionField:
    """Load a coefficient table written by :func:`write_correction_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0].strip() != "x_cm":
            raise ConfigError("expected header x_cm,a1..a5")
        xs: list[float] = []
        rows: list[list[float]] = []
        for row in reader:
            if not row:
                continue
            try:
                xs.append(float(row[0]) / 100.0)
                rows.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise ConfigError(f"non-numeric correction row: {row}") from exc
    if not xs:
        raise ConfigError("empty correction table")
    return CorrectionField(
        x_m=np.asarray(xs), alpha_cm_per_v=np.asarray(rows)
    )
