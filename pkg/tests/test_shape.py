"""Shape-solver tests: free-shape closed forms, ground-contact
properties, the moment profile, and the frozen actuation gain."""

from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from softcrawl.errors import ConfigError, UnboundedShapeError
from softcrawl.shape import (
    DEFAULT_MOMENT_GAIN_NM_PER_V,
    RobotParams,
    ShapeCurve,
    actuation_moment_profile,
    chord_shortening,
    fit_moment_gain,
    read_shape_csv,
    shape_mse,
    solve_shape,
    write_shape_csv,
)

REFERENCE_BENT_V = np.array([300.0, 258.0, -1292.0, 258.0, 300.0])


def weightless(**kw):
    return RobotParams(weight_per_length_n_per_m=0.0, **kw)


class TestFreeShape:
    def test_uniform_moment_gives_quadratic(self):
        # Constant curvature kappa with the clamped start solves the
        # second-difference recurrence exactly as kappa*x*(x - dx)/2,
        # which approaches the continuous kappa*x^2/2 at rate O(dx).
        params = weightless()
        v = np.full(5, -400.0)
        sol = solve_shape(params, v, ground=False)
        kappa = params.moment_per_volt_nm_per_v * -400.0 / params.bending_stiffness_nm2
        x = params.grid_m
        discrete = 0.5 * kappa * x * (x - params.dx_m)
        assert np.abs(sol.shape.y_m - discrete).max() < 1e-15 + 1e-12 * np.abs(discrete).max()
        continuous = 0.5 * kappa * x**2
        gap = np.abs(sol.shape.y_m - continuous).max()
        assert gap <= abs(kappa) * params.dx_m * params.length_m

    def test_second_difference_matches_curvature_profile(self):
        params = weightless()
        v = np.array([120.0, -800.0, 333.0, -50.0, 470.0])
        sol = solve_shape(params, v, ground=False)
        dx = params.dx_m
        d2 = (sol.shape.y_m[2:] - 2 * sol.shape.y_m[1:-1] + sol.shape.y_m[:-2]) / dx**2
        kappa = actuation_moment_profile(params, v)[1:-1] / params.bending_stiffness_nm2
        assert np.abs(d2 - kappa).max() < 1e-9 * max(1.0, np.abs(kappa).max())

    def test_linearity_in_voltage(self):
        params = weightless()
        v = np.array([100.0, -200.0, 50.0, -75.0, 25.0])
        y1 = solve_shape(params, v, ground=False).shape.y_m
        y3 = solve_shape(params, 3.0 * v, ground=False).shape.y_m
        assert np.allclose(y3, 3.0 * y1, rtol=0, atol=1e-12)

    def test_free_solve_requires_zero_weight(self):
        with pytest.raises(UnboundedShapeError):
            solve_shape(RobotParams(), np.zeros(5), ground=False)


class TestGroundContact:
    def test_complementarity_and_force_balance(self, rng):
        params = RobotParams()
        total_weight = params.weight_per_length_n_per_m * params.length_m
        for _ in range(10):
            v = rng.uniform(params.v_lower, params.v_upper, size=5)
            sol = solve_shape(params, v)
            y = sol.shape.y_m
            p = sol.pressure_n_per_m
            assert y.min() >= 0.0
            assert p.min() > -1e-4
            assert np.abs(p * y).max() < 1e-9
            assert abs(p.sum() * params.dx_m - total_weight) < 1e-6

    def test_palindromic_command_gives_mirror_shape(self):
        params = RobotParams()
        sol = solve_shape(params, REFERENCE_BENT_V)
        y = sol.shape.y_m
        assert np.abs(y - y[::-1]).max() < 1e-9

    def test_rest_is_flat_with_uniform_interior_pressure(self):
        params = RobotParams()
        sol = solve_shape(params, np.zeros(5))
        assert np.all(sol.shape.y_m == 0.0)
        w = params.weight_per_length_n_per_m
        assert np.allclose(sol.pressure_n_per_m[1:-1], w, rtol=0, atol=1e-12)
        assert np.allclose(sol.pressure_n_per_m[[0, -1]], 0.5 * w, rtol=0, atol=1e-12)

    def test_reference_bend_arches_on_two_touch_points(self):
        params = RobotParams()
        sol = solve_shape(params, REFERENCE_BENT_V)
        mid = params.n_nodes // 2
        assert sol.shape.y_m[mid] > 0.01
        # The dome rests on two mirror-image tangent nodes; the +300 V
        # end segments curl the tips up off the ground.
        assert sol.contact_set.size == 2
        assert sol.shape.y_m.min() == 0.0
        i, j = sol.contact_set
        assert i + j == params.n_nodes - 1
        assert sol.shape.y_m[0] > 0.0 and sol.shape.y_m[-1] > 0.0


class TestMomentProfile:
    def test_zero_voltage_zero_moment(self):
        assert np.all(actuation_moment_profile(RobotParams(), np.zeros(5)) == 0.0)

    def test_single_actuator_span(self):
        params = RobotParams()
        v = np.array([0.0, 0.0, -1292.0, 0.0, 0.0])
        m = actuation_moment_profile(params, v)
        x = params.grid_m
        inner = (x > 0.2 + params.dx_m) & (x < 0.3 - params.dx_m)
        outer = (x < 0.2 - params.dx_m) | (x > 0.3 + params.dx_m)
        level = params.moment_per_volt_nm_per_v * -1292.0
        assert np.allclose(m[inner], level, rtol=1e-12)
        assert np.all(m[outer] == 0.0)
        # Nodes sitting exactly on a span edge average the two spans.
        edge = np.isclose(x, 0.2) | np.isclose(x, 0.3)
        assert np.allclose(m[edge], 0.5 * level, rtol=1e-12)

    def test_wrong_length_rejected(self):
        with pytest.raises(ConfigError):
            actuation_moment_profile(RobotParams(), np.zeros(4))


class TestMetricsAndIo:
    def test_shape_mse_known_offset(self):
        params = RobotParams()
        x = params.grid_m
        a = ShapeCurve(x_m=x, y_m=np.zeros_like(x))
        b = ShapeCurve(x_m=x, y_m=np.full_like(x, 0.01))  # 1 cm
        assert shape_mse(a, b) == pytest.approx(1.0, abs=1e-12)

    def test_shape_mse_requires_common_grid(self):
        a = ShapeCurve(x_m=np.linspace(0, 1, 11), y_m=np.zeros(11))
        b = ShapeCurve(x_m=np.linspace(0, 2, 11), y_m=np.zeros(11))
        with pytest.raises(ConfigError):
            shape_mse(a, b)

    def test_chord_shortening_parabola_closed_form(self):
        length = 0.5
        x = np.linspace(0.0, length, 2001)
        for h in (0.005, 0.01, 0.015):
            arch = ShapeCurve(x_m=x, y_m=4.0 * h * x * (length - x) / length**2)
            expect = 8.0 * h**2 / (3.0 * length)
            assert chord_shortening(arch) == pytest.approx(expect, rel=0.01)

    def test_csv_round_trip(self, tmp_path):
        params = RobotParams()
        sol = solve_shape(params, REFERENCE_BENT_V)
        path = tmp_path / "shape.csv"
        write_shape_csv(path, sol.shape)
        back = read_shape_csv(path)
        assert np.allclose(back.x_m, sol.shape.x_m, atol=1e-12)
        assert np.allclose(back.y_m, sol.shape.y_m, atol=1e-12)


class TestMomentGain:
    def test_default_gain_hits_reference_peak(self):
        # The frozen constant makes the reference bend peak at 13.5 mm,
        # the operating height the gain was fitted against.
        params = RobotParams()
        peak = solve_shape(params, REFERENCE_BENT_V).shape.peak_m
        assert abs(peak - 0.0135) < 1e-4

    def test_fit_recovers_default_gain(self):
        params = RobotParams()
        fitted = fit_moment_gain(params, REFERENCE_BENT_V, 0.0135)
        assert fitted == pytest.approx(DEFAULT_MOMENT_GAIN_NM_PER_V, rel=0.01)

    def test_rejects_nonpositive_target(self):
        with pytest.raises(ConfigError):
            fit_moment_gain(RobotParams(), REFERENCE_BENT_V, 0.0)


class TestParamValidation:
    def test_span_partition_enforced(self):
        with pytest.raises(ConfigError):
            RobotParams(length_m=0.6)

    def test_pad_span_bounded_by_actuator_span(self):
        with pytest.raises(ConfigError):
            RobotParams(pad_span_m=0.2)

    def test_voltage_box_must_be_nonempty(self):
        with pytest.raises(ConfigError):
            RobotParams(v_lower=500.0, v_upper=500.0)
