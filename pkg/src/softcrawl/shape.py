"""Planar bending model of the crawler.

The robot is a thin laminated strip discretized on a uniform grid.  Its
static shape minimizes the discrete bending energy

    U(y) = dx * sum[ 0.5*EI*(D2 y)^2 - M_p*(D2 y) + w*y ]

over node heights y, where ``D2`` is the second-difference operator,
``M_p`` the piecewise-constant actuation moment and ``w`` the weight
per unit length.  With ground contact enabled the minimization is
subject to y >= 0 and the constraint multipliers are the contact
reactions.  All quantities here are SI (m, N, V); the CSV interface
uses centimetres.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .errors import ConfigError, ShapeSolveError, UnboundedShapeError

__all__ = [
    "RobotParams",
    "ShapeCurve",
    "ContactSolution",
    "actuation_moment_profile",
    "solve_shape",
    "chord_shortening",
    "shape_mse",
    "fit_moment_gain",
    "write_shape_csv",
    "read_shape_csv",
]

# Default moment gain, produced by fit_moment_gain() against the
# reference crawl command (300, 258, -1292, 258, 300) V with a target
# ground-contact peak of 0.0135 m and the default stiffness/weight
# below.  test_shape.py re-runs the fit and checks this constant.
DEFAULT_MOMENT_GAIN_NM_PER_V = 2.8177442932128907e-05


@dataclass(frozen=True)
class RobotParams:
    """Geometry, stiffness, and actuation constants of the strip."""

    length_m: float = 0.5
    width_m: float = 0.02
    n_actuators: int = 5
    actuator_span_m: float = 0.1
    pad_span_m: float = 0.05
    n_nodes: int = 201
    bending_stiffness_nm2: float = 0.01
    weight_per_length_n_per_m: float = 0.39
    moment_per_volt_nm_per_v: float = DEFAULT_MOMENT_GAIN_NM_PER_V
    v_lower: float = -1500.0
    v_upper: float = 500.0

    def __post_init__(self):
        if self.length_m <= 0 or self.width_m <= 0:
            raise ConfigError("robot dimensions must be positive")
        if self.n_actuators < 1 or self.actuator_span_m <= 0:
            raise ConfigError("need at least one actuator with positive span")
        if abs(self.n_actuators * self.actuator_span_m - self.length_m) > 1e-9:
            raise ConfigError("actuator spans must partition the robot length")
        if not 0 < self.pad_span_m <= self.actuator_span_m:
            raise ConfigError("pad span must lie within the end actuator span")
        if self.n_nodes < 16:
            raise ConfigError("grid too coarse (need >= 16 nodes)")
        if self.bending_stiffness_nm2 <= 0:
            raise ConfigError("bending stiffness must be positive")
        if self.weight_per_length_n_per_m < 0:
            raise ConfigError("weight per length must be nonnegative")
        if self.moment_per_volt_nm_per_v <= 0:
            raise ConfigError("moment gain must be positive")
        if not self.v_lower < self.v_upper:
            raise ConfigError("voltage box is empty")

    @property
    def dx_m(self) -> float:
        return self.length_m / (self.n_nodes - 1)

    @property
    def grid_m(self) -> np.ndarray:
        return np.linspace(0.0, self.length_m, self.n_nodes)

    @property
    def span_edges_m(self) -> np.ndarray:
        return np.linspace(0.0, self.length_m, self.n_actuators + 1)


@dataclass(frozen=True)
class ShapeCurve:
    """Robot heights sampled on the model grid (SI units)."""

    x_m: np.ndarray
    y_m: np.ndarray

    def __post_init__(self):
        if self.x_m.shape != self.y_m.shape or self.x_m.ndim != 1:
            raise ConfigError("shape curve needs matching 1-d x and y arrays")

    @property
    def peak_m(self) -> float:
        return float(self.y_m.max())

    def same_grid(self, other: "ShapeCurve") -> bool:
        return self.x_m.shape == other.x_m.shape and np.array_equal(self.x_m, other.x_m)


@dataclass(frozen=True)
class ContactSolution:
    """Result of a ground-contact solve."""

    shape: ShapeCurve
    pressure_n_per_m: np.ndarray  # per-node contact reaction
    contact_set: np.ndarray  # node indices held at y = 0
    iterations: int


def _as_voltages(params: RobotParams, v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (params.n_actuators,):
        raise ConfigError(
            f"expected {params.n_actuators} actuator voltages, got shape {v.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise ConfigError("voltages must be finite")
    return v


def actuation_moment_profile(params: RobotParams, v) -> np.ndarray:
    """Per-node actuation moment M_p in N*m.

    The physical moment is piecewise constant, ``m_V * v_i`` over
    actuator i's span.  Nodes are assigned the average of the moment
    over their grid cell, so a node sitting exactly on a shared span
    edge carries the mean of the two adjacent spans.  This keeps
    palindromic commands exactly mirror-symmetric and matches the
    continuous double integral of the free shape to machine precision.
    """
    v = _as_voltages(params, v)
    moments = params.moment_per_volt_nm_per_v * v
    edges = params.span_edges_m
    cum = np.concatenate(([0.0], np.cumsum(moments * params.actuator_span_m)))
    x = params.grid_m
    half = 0.5 * params.dx_m
    lo = np.clip(x - half, 0.0, params.length_m)
    hi = np.clip(x + half, 0.0, params.length_m)
    integral = np.interp(hi, edges, cum) - np.interp(lo, edges, cum)
    return integral / (hi - lo)


def _trapezoid_weights(n: int) -> np.ndarray:
    c = np.ones(n)
    c[0] = 0.5
    c[-1] = 0.5
    return c


def _assemble_bands(params: RobotParams, moment: np.ndarray):
    """Pentadiagonal Hessian bands and linear term of the energy.

    The weight term uses trapezoid node weights so the contact
    reactions integrate to exactly w * length.
    """
    n = params.n_nodes
    dx = params.dx_m
    coef = params.bending_stiffness_nm2 / dx**3  # dx * EI / dx^4
    h0 = np.zeros(n)
    h1 = np.zeros(n - 1)
    h2 = np.zeros(n - 2)
    h0[:-2] += coef
    h0[1:-1] += 4.0 * coef
    h0[2:] += coef
    h1[:-1] += -2.0 * coef
    h1[1:] += -2.0 * coef
    h2[:] = coef

    q = moment[1:-1] / dx  # dx * (A^T M) rows carry the 1/dx^2 stencil
    f = np.zeros(n)
    f[:-2] += q
    f[1:-1] += -2.0 * q
    f[2:] += q
    f -= params.dx_m * params.weight_per_length_n_per_m * _trapezoid_weights(n)
    return h0, h1, h2, f


def _integrate_free_shape(kappa: np.ndarray, dx: float) -> np.ndarray:
    """Double integration of curvature with y(0) = y'(0) = 0.

    The discrete optimality system of the unconstrained energy on the
    pinned subspace reduces to the second-difference recurrence
    y[i+1] = 2 y[i] - y[i-1] + dx^2 * kappa[i], which this cumulative
    sum reproduces exactly.
    """
    n = kappa.shape[0] + 2
    y = np.zeros(n)
    slope = np.cumsum(kappa) * dx**2
    y[2:] = np.cumsum(slope)
    return y


def solve_shape(params: RobotParams, v, ground: bool = True) -> ContactSolution:
    """Static shape under actuation ``v``.

    With ``ground=True`` minimizes the discrete energy subject to
    y >= 0; contact reactions come out of the constraint multipliers.
    With ``ground=False`` the distributed weight must be zero (the
    problem is otherwise unbounded) and the shape is the free double
    integral of M_p / EI pinned at y(0) = y'(0) = 0.
    """
    v = _as_voltages(params, v)
    moment = actuation_moment_profile(params, v)
    x = params.grid_m

    if not ground:
        if params.weight_per_length_n_per_m > 0:
            raise UnboundedShapeError(
                "free-shape solve with w > 0 is unbounded; zero the weight first"
            )
        kappa = moment[1:-1] / params.bending_stiffness_nm2
        y = _integrate_free_shape(kappa, params.dx_m)
        return ContactSolution(
            shape=ShapeCurve(x_m=x, y_m=y),
            pressure_n_per_m=np.zeros(params.n_nodes),
            contact_set=np.empty(0, dtype=np.int64),
            iterations=0,
        )

    h0, h1, h2, f = _assemble_bands(params, moment)
    drop_tol = 1e-13 * max(1.0, float(np.abs(f).max()))
    ridge = 1e-12 * float(h0.max())
    max_iter = 30 * params.n_nodes
    y, lam, free, iters, status = kernels.contact_active_set(
        h0, h1, h2, f, max_iter, drop_tol, ridge
    )
    if status == kernels.STATUS_SINGULAR:
        raise ShapeSolveError("contact subproblem factorization failed")
    if status != kernels.STATUS_OK:
        raise ShapeSolveError(f"contact solve did not converge in {max_iter} iterations")
    return ContactSolution(
        shape=ShapeCurve(x_m=x, y_m=y),
        pressure_n_per_m=lam / params.dx_m,
        contact_set=np.flatnonzero(~free).astype(np.int64),
        iterations=iters,
    )


def chord_shortening(shape: ShapeCurve) -> float:
    """Horizontal contraction D = integral of (y')^2 / 2 dx (metres).

    Small-slope approximation of arc length minus chord; the quantity
    a bent posture pulls the free end forward by.
    """
    slope = np.gradient(shape.y_m, shape.x_m)
    return float(np.trapezoid(0.5 * slope**2, shape.x_m))


def shape_mse(a: ShapeCurve, b: ShapeCurve) -> float:
    """Mean squared vertical deviation between two curves in cm^2."""
    if not a.same_grid(b):
        raise ConfigError("shape MSE requires a shared grid")
    diff_cm = (a.y_m - b.y_m) * 100.0
    return float(np.mean(diff_cm**2))


def fit_moment_gain(
    params: RobotParams,
    v_ref,
    target_peak_m: float,
    lo: float = 1e-8,
    hi: float = 1e-3,
    max_iter: int = 200,
) -> float:
    """Moment gain m_V whose ground-contact peak matches the target.

    Bisection on the peak height of ``solve_shape`` at the reference
    command; the returned gain reproduces the target within 0.1%.
    """
    v_ref = _as_voltages(params, v_ref)
    if target_peak_m <= 0:
        raise ConfigError("target peak must be positive")

    def peak(gain: float) -> float:
        p = replace(params, moment_per_volt_nm_per_v=gain)
        return solve_shape(p, v_ref, ground=True).shape.peak_m

    f_lo = peak(lo) - target_peak_m
    f_hi = peak(hi) - target_peak_m
    if f_lo > 0 or f_hi < 0:
        raise ConfigError("target peak not bracketed by the gain search range")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = peak(mid) - target_peak_m
        if abs(f_mid) <= 1e-3 * target_peak_m:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    raise ShapeSolveError("moment gain bisection did not converge")


def write_shape_csv(path, shape: ShapeCurve) -> None:
    """Write a curve as ``x_cm,y_cm`` rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_cm", "y_cm"])
        for xv, yv in zip(shape.x_m, shape.y_m):
            writer.writerow([f"{xv * 100.0:.10g}", f"{yv * 100.0:.10g}"])


def read_shape_csv(path) -> ShapeCurve:
    """Read a ``x_cm,y_cm`` curve written by :func:`write_shape_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x_cm", "y_cm"]:
            raise ConfigError(f"{path}: expected header 'x_cm,y_cm'")
        xs, ys = [], []
        for row in reader:
            if not row:
                continue
            try:
                xs.append(float(row[0]) / 100.0)
                ys.append(float(row[1]) / 100.0)
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"{path}: bad row {row!r}") from exc
    if len(xs) < 2:
        raise ConfigError(f"{path}: need at least two samples")
    return ShapeCurve(x_m=np.array(xs), y_m=np.array(ys))
