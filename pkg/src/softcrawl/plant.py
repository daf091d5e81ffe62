"""Simulated robot plus vision sensing.

The plant is the same beam physics with injected parameter deviations:
scaled stiffness and actuation gain, an additive per-node linear
voltage response the model does not know about, and seeded Gaussian
sensing noise.  It stands in for the physical robot when exercising
calibration and crawling end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .shape import RobotParams, ShapeCurve, solve_shape

__all__ = [
    "PlantParams",
    "SensedShape",
    "Plant",
    "plant_shape",
    "make_linear_deviation",
]


@dataclass(frozen=True)
class PlantParams:
    """Deviated-robot description: the model's params plus what it gets wrong."""

    base: RobotParams
    beta_cm_per_v: np.ndarray | None = None  # (n_nodes, n_actuators)
    stiffness_scale: float = 1.0
    gain_scale: float = 1.0
    noise_std_cm: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.stiffness_scale <= 0 or self.gain_scale <= 0:
            raise ConfigError("plant scales must be positive")
        if self.noise_std_cm < 0:
            raise ConfigError("sensor noise must be nonnegative")
        if self.beta_cm_per_v is not None:
            beta = np.asarray(self.beta_cm_per_v, dtype=float)
            object.__setattr__(self, "beta_cm_per_v", beta)
            expected = (self.base.n_nodes, self.base.n_actuators)
            if beta.shape != expected:
                raise ConfigError(f"beta must have shape {expected}")

    @property
    def scaled_base(self) -> RobotParams:
        return replace(
            self.base,
            bending_stiffness_nm2=self.base.bending_stiffness_nm2
            * self.stiffness_scale,
            moment_per_volt_nm_per_v=self.base.moment_per_volt_nm_per_v
            * self.gain_scale,
        )


@dataclass(frozen=True)
class SensedShape:
    """One vision measurement: noisy shape plus the tracked position."""

    shape: ShapeCurve
    x0_m: float


def plant_shape(plant: PlantParams, v, ground: bool = True) -> ShapeCurve:
    """True (noise-free) plant shape for a voltage vector."""
    v = np.asarray(v, dtype=float)
    shape = solve_shape(plant.scaled_base, v, ground=ground).shape
    if plant.beta_cm_per_v is not None:
        shape = ShapeCurve(
            x_m=shape.x_m, y_m=shape.y_m + (plant.beta_cm_per_v @ v) / 100.0
        )
    return shape


class Plant:
    """Stateful plant: owns the sensing-noise draw counter."""

    def __init__(self, params: PlantParams):
        self.params = params
        self._counter = 0

    def shape(self, v, ground: bool = True) -> ShapeCurve:
        return plant_shape(self.params, v, ground=ground)

    def sense(
        self, v, x0_m: float, ground: bool = True, counter: int | None = None
    ) -> SensedShape:
        """Noisy shape measurement at the current position.

        Noise is reproducible: each draw is keyed by (seed, counter),
        where the counter auto-increments unless given explicitly.
        """
        if counter is None:
            counter = self._counter
            self._counter += 1
        shape = self.shape(v, ground=ground)
        if self.params.noise_std_cm > 0:
            rng = np.random.default_rng([self.params.seed, counter])
            noise_m = rng.normal(
                0.0, self.params.noise_std_cm / 100.0, size=shape.y_m.shape
            )
            shape = ShapeCurve(x_m=shape.x_m, y_m=shape.y_m + noise_m)
        return SensedShape(shape=shape, x0_m=x0_m)


def make_linear_deviation(
    params: RobotParams,
    seed: int,
    reference_voltages: np.ndarray,
    target_mse_cm2: float = 0.05,
    smooth_window: int = 21,
) -> np.ndarray:
    """Draw a smooth per-node linear voltage response, cm/V.

    The raw field is white Gaussian per (node, actuator), smoothed
    along the body, then scaled so the mean squared deviation it adds,
    averaged over the given reference voltage vectors, equals
    ``target_mse_cm2`` exactly.
    """
    refs = np.atleast_2d(np.asarray(reference_voltages, dtype=float))
    if refs.shape[1] != params.n_actuators:
        raise ConfigError("reference voltages must match the actuator count")
    if target_mse_cm2 <= 0:
        raise ConfigError("target deviation MSE must be positive")
    if smooth_window < 1 or smooth_window % 2 == 0:
        raise ConfigError("smoothing window must be a positive odd count")
    rng = np.random.default_rng(seed)
    beta = rng.standard_normal((params.n_nodes, params.n_actuators))
    if smooth_window > 1:
        kernel = np.ones(smooth_window) / smooth_window
        beta = np.apply_along_axis(
            lambda col: np.convolve(col, kernel, mode="same"), 0, beta
        )
    deviations = beta @ refs.T  # (n_nodes, n_refs), cm at unit scale
    mean_sq = float(np.mean(deviations**2))
    if mean_sq <= 0:
        raise ConfigError("reference voltages produce no deviation")
    return beta * np.sqrt(target_mse_cm2 / mean_sq)
