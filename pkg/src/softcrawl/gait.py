"""Four-phase crawl cycle kinematics.

A cycle alternates anchoring between the two high-friction ends while
the body bends and straightens; the lift phases only swap the anchor
and contribute no displacement.  Net motion per cycle equals the
difference in chord shortening between the bent and straight postures,
so stride is a pure function of the two shapes.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .controller import ControlCommand, ShapeModel
from .errors import ConfigError, SafetyViolationError
from .shape import ShapeCurve, chord_shortening, solve_shape

__all__ = [
    "GaitPhase",
    "CycleResult",
    "CYCLE_PHASES",
    "REFERENCE_BENT_V",
    "straighten_voltages",
    "stride_per_cycle",
    "advance_cycle",
    "speed_vs_height_curve",
    "write_speed_curve_csv",
]

# Bent-posture reference command: lifted end pads, raised shoulders,
# strong downward center moment arching the body off the ground.
REFERENCE_BENT_V = np.array([300.0, 258.0, -1292.0, 258.0, 300.0])


@dataclass(frozen=True)
class GaitPhase:
    """One quarter of the crawl cycle."""

    index: int
    anchored_end: str  # "front" | "rear"
    posture: str  # "rear-lift" | "bent" | "front-lift" | "straight"


# Anchor the front while bending (rear slides forward), then anchor the
# rear while straightening (front slides forward).
CYCLE_PHASES: tuple[GaitPhase, ...] = (
    GaitPhase(index=1, anchored_end="front", posture="rear-lift"),
    GaitPhase(index=2, anchored_end="front", posture="bent"),
    GaitPhase(index=3, anchored_end="rear", posture="front-lift"),
    GaitPhase(index=4, anchored_end="rear", posture="straight"),
)


@dataclass(frozen=True)
class CycleResult:
    """Displacement outcome of one full cycle."""

    stride_m: float
    new_x0_m: float
    bent: ShapeCurve
    straight: ShapeCurve

    def __post_init__(self):
        if self.stride_m < 0:
            raise ConfigError("cycle stride must be nonnegative")


def straighten_voltages(v_bent: np.ndarray) -> np.ndarray:
    """Straight-posture command: keep end-pad voltages, zero the middle."""
    v = np.array(v_bent, dtype=float)
    v[1:-1] = 0.0
    return v


def stride_per_cycle(bent: ShapeCurve, straight: ShapeCurve) -> float:
    """Chord-shortening difference between postures, floored at zero."""
    return max(0.0, chord_shortening(bent) - chord_shortening(straight))


def advance_cycle(
    x0_m: float,
    command_bent: ControlCommand,
    command_straight: ControlCommand,
) -> CycleResult:
    """Advance the body by one full cycle from the given rear position.

    Both commands must be collision-free; a command whose diagnostics
    show the body crossing the safety line is rejected.  The anchored
    end is static within each phase, so the rear end never moves
    backward and the whole footprint shifts forward by the stride.
    """
    for name, command in (("bent", command_bent), ("straight", command_straight)):
        if command.dy_max_cm is not None and command.dy_max_cm > 0.0:
            raise SafetyViolationError(
                f"{name} command crosses the safety line "
                f"(overshoot {command.dy_max_cm:.4f} cm)"
            )
    stride = stride_per_cycle(command_bent.predicted, command_straight.predicted)
    return CycleResult(
        stride_m=stride,
        new_x0_m=x0_m + stride,
        bent=command_bent.predicted,
        straight=command_straight.predicted,
    )


def _max_scale(v_ref: np.ndarray, v_lower: float, v_upper: float) -> float:
    scale = np.inf
    for vi in v_ref:
        if vi > 0:
            scale = min(scale, v_upper / vi)
        elif vi < 0:
            scale = min(scale, v_lower / vi)
    if not np.isfinite(scale):
        raise ConfigError("reference command must be nonzero")
    return scale


def speed_vs_height_curve(
    model: ShapeModel,
    heights_m: np.ndarray,
    v_ref: np.ndarray | None = None,
    tol_m: float = 1e-7,
) -> np.ndarray:
    """Stride per cycle as a function of bent-arch peak height.

    For each requested height, bisection on the command scale finds the
    voltage vector ``s * v_ref`` whose ground-contact shape peaks at
    that height; the stride is its chord shortening relative to a flat
    body.  Returns an (n, 2) array of (height_m, stride_m) rows.
    """
    v_ref = REFERENCE_BENT_V if v_ref is None else np.asarray(v_ref, float)
    heights = np.asarray(heights_m, dtype=float)
    if heights.size == 0:
        raise ConfigError("height grid must be nonempty")
    if np.any(heights < 0):
        raise ConfigError("heights must be nonnegative")
    params = model.params
    s_hi = _max_scale(v_ref, params.v_lower, params.v_upper)

    def peak(scale: float) -> float:
        return solve_shape(params, scale * v_ref).shape.peak_m

    reach = peak(s_hi)
    rows = np.empty((heights.size, 2))
    for i, h in enumerate(heights):
        if h == 0.0:
            rows[i] = (0.0, 0.0)
            continue
        if h > reach:
            raise ConfigError(
                f"height {h * 100.0:.3f} cm is beyond the command family's "
                f"reach ({reach * 100.0:.3f} cm)"
            )
        lo_s, hi_s = 0.0, s_hi
        for _ in range(80):
            mid = 0.5 * (lo_s + hi_s)
            if abs(peak(mid) - h) <= tol_m:
                lo_s = hi_s = mid
                break
            if peak(mid) < h:
                lo_s = mid
            else:
                hi_s = mid
        scale = 0.5 * (lo_s + hi_s)
        bent = solve_shape(params, scale * v_ref).shape
        rows[i] = (h, chord_shortening(bent))
    return rows


def write_speed_curve_csv(path, table: np.ndarray) -> None:
    """Serialize a speed curve as height_cm,stride_cm."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["height_cm", "stride_cm"])
        for h, stride in table:
            writer.writerow([f"{h * 100.0:.10g}", f"{stride * 100.0:.10g}"])
