"""World-frame roof profiles and the derived safety line.

A roof profile maps world x to a ceiling height over a finite domain;
queries outside the domain are rejected (callers treat the roof as
absent there).  The safety line is the roof lowered by a clearance
margin; crawl commands are checked against it, never against the roof
itself.
"""

from __future__ import annotations

import csv
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

__all__ = [
    "RoofProfile",
    "StepRoof",
    "SlantedRoof",
    "SinusoidalRoof",
    "PiecewiseLinearRoof",
    "SafetyLine",
    "roof_height_at",
    "safety_height_at",
    "load_profile",
]


class RoofProfile(ABC):
    """Positive ceiling height over a world-frame x interval."""

    domain_m: tuple[float, float]

    @abstractmethod
    def _height(self, xs: np.ndarray) -> np.ndarray:
        """Heights at points assumed inside the domain."""

    @property
    @abstractmethod
    def min_height_m(self) -> float:
        """Exact minimum height over the domain."""

    def contains(self, x_world) -> np.ndarray | bool:
        """Mask of query points lying inside the roof's domain."""
        xs = np.asarray(x_world, dtype=float)
        lo, hi = self.domain_m
        mask = (xs >= lo) & (xs <= hi)
        return bool(mask) if xs.ndim == 0 else mask

    def height_at(self, x_world):
        xs = np.asarray(x_world, dtype=float)
        if not np.all(self.contains(xs)):
            raise ConfigError("roof height queried outside the roof domain")
        out = self._height(np.atleast_1d(xs))
        return float(out[0]) if xs.ndim == 0 else out


def _validate_domain(domain_m) -> tuple[float, float]:
    lo, hi = float(domain_m[0]), float(domain_m[1])
    if not lo < hi:
        raise ConfigError("roof domain must be a nonempty interval")
    return lo, hi


class _PiecewiseLinear(RoofProfile):
    """Shared knot-interpolation backend for the linear profile kinds."""

    def __init__(self, knots_x: np.ndarray, knots_h: np.ndarray):
        self._kx = np.asarray(knots_x, dtype=float)
        self._kh = np.asarray(knots_h, dtype=float)
        if self._kx.size < 2 or np.any(np.diff(self._kx) <= 0):
            raise ConfigError("profile knots must be strictly increasing")
        if np.any(self._kh <= 0):
            raise ConfigError("roof height must be strictly positive")
        self.domain_m = (float(self._kx[0]), float(self._kx[-1]))

    def _height(self, xs: np.ndarray) -> np.ndarray:
        return np.interp(xs, self._kx, self._kh)

    @property
    def min_height_m(self) -> float:
        # Piecewise-linear minimum over the domain is attained at a knot.
        return float(self._kh.min())


class StepRoof(_PiecewiseLinear):
    """Two flat levels joined by a narrow linear ramp.

    The ramp spans ``[transition_x - ramp_width, transition_x]`` so the
    height at the transition point itself is already the right-hand
    level.  The finite ramp keeps footprint max/min queries well
    defined under sampling.
    """

    def __init__(
        self,
        left_height_m: float,
        right_height_m: float,
        transition_x_m: float,
        domain_m: tuple[float, float],
        ramp_width_m: float = 0.001,
    ):
        lo, hi = _validate_domain(domain_m)
        if ramp_width_m <= 0:
            raise ConfigError("ramp width must be positive")
        if not (lo + ramp_width_m <= transition_x_m <= hi):
            raise ConfigError("step transition must lie inside the domain")
        self.left_height_m = float(left_height_m)
        self.right_height_m = float(right_height_m)
        self.transition_x_m = float(transition_x_m)
        super().__init__(
            np.array([lo, transition_x_m - ramp_width_m, transition_x_m, hi]),
            np.array(
                [left_height_m, left_height_m, right_height_m, right_height_m]
            ),
        )


class SlantedRoof(_PiecewiseLinear):
    """Linear height between the two domain endpoints."""

    def __init__(
        self,
        start_height_m: float,
        end_height_m: float,
        domain_m: tuple[float, float],
    ):
        lo, hi = _validate_domain(domain_m)
        self.start_height_m = float(start_height_m)
        self.end_height_m = float(end_height_m)
        super().__init__(
            np.array([lo, hi]), np.array([start_height_m, end_height_m])
        )


class PiecewiseLinearRoof(_PiecewiseLinear):
    """Arbitrary piecewise-linear profile given by sorted knots."""

    def __init__(self, x_m: np.ndarray, height_m: np.ndarray):
        super().__init__(x_m, height_m)


class SinusoidalRoof(RoofProfile):
    """Sinusoidal ceiling mean + amplitude*sin(2*pi*x/wavelength + phase)."""

    def __init__(
        self,
        mean_height_m: float,
        amplitude_m: float,
        wavelength_m: float,
        phase_rad: float,
        domain_m: tuple[float, float],
    ):
        self.domain_m = _validate_domain(domain_m)
        if wavelength_m <= 0:
            raise ConfigError("wavelength must be positive")
        self.mean_height_m = float(mean_height_m)
        self.amplitude_m = float(amplitude_m)
        self.wavelength_m = float(wavelength_m)
        self.phase_rad = float(phase_rad)
        if self.min_height_m <= 0:
            raise ConfigError("roof height must be strictly positive")

    def _phase_at(self, xs: np.ndarray) -> np.ndarray:
        return 2.0 * np.pi * xs / self.wavelength_m + self.phase_rad

    def _height(self, xs: np.ndarray) -> np.ndarray:
        return self.mean_height_m + self.amplitude_m * np.sin(self._phase_at(xs))

    @property
    def min_height_m(self) -> float:
        # Exact interval minimum: endpoints plus interior critical
        # points of the sine (phase = pi/2 + k*pi).
        lo, hi = self.domain_m
        th_lo = float(self._phase_at(np.asarray(lo)))
        th_hi = float(self._phase_at(np.asarray(hi)))
        values = [np.sin(th_lo), np.sin(th_hi)]
        k_lo = int(np.ceil((th_lo - np.pi / 2.0) / np.pi))
        k_hi = int(np.floor((th_hi - np.pi / 2.0) / np.pi))
        for k in range(k_lo, k_hi + 1):
            values.append(np.sin(np.pi / 2.0 + k * np.pi))
        values = np.asarray(values)
        return float(np.min(self.mean_height_m + self.amplitude_m * values))


@dataclass(frozen=True)
class SafetyLine:
    """Roof lowered by a clearance margin.

    A margin at or above the lowest roof height leaves no admissible
    headroom; the line is still constructible so planners can detect
    the condition and fall back, exposed via :attr:`is_feasible`.
    """

    roof: RoofProfile
    margin_m: float = 0.001

    def __post_init__(self):
        if self.margin_m < 0:
            raise ConfigError("safety margin must be nonnegative")

    @property
    def is_feasible(self) -> bool:
        return self.margin_m < self.roof.min_height_m

    def height_at(self, x_world):
        return self.roof.height_at(x_world) - self.margin_m


def roof_height_at(roof: RoofProfile, x_world):
    """Ceiling height at world x; rejects out-of-domain queries."""
    return roof.height_at(x_world)


def safety_height_at(line: SafetyLine, x_world):
    """Safety-line height: roof height minus the margin, exactly."""
    return line.height_at(x_world)


def load_profile(path) -> PiecewiseLinearRoof:
    """Read a piecewise-linear profile from CSV of x_cm,height_cm."""
    xs: list[float] = []
    hs: list[float] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [c.strip() for c in header] != ["x_cm", "height_cm"]:
            raise ConfigError("expected header x_cm,height_cm")
        for row in reader:
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"expected 2 columns, got {len(row)}")
            try:
                xs.append(float(row[0]) / 100.0)
                hs.append(float(row[1]) / 100.0)
            except ValueError as exc:
                raise ConfigError(f"non-numeric profile row: {row}") from exc
    if len(xs) < 2:
        raise ConfigError("profile needs at least 2 rows")
    x_arr = np.asarray(xs)
    if np.any(np.diff(x_arr) <= 0):
        raise ConfigError("profile x values must be strictly increasing")
    return PiecewiseLinearRoof(x_arr, np.asarray(hs))
