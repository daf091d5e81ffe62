"""Crawl-cycle kinematics tests: stride arithmetic, cycle advancement
safety gating, and the stride-vs-arch-height relation."""

from __future__ import annotations

import numpy as np
import pytest

from softcrawl.controller import ControlCommand, ShapeModel
from softcrawl.errors import ConfigError, SafetyViolationError
from softcrawl.gait import (
    CYCLE_PHASES,
    REFERENCE_BENT_V,
    advance_cycle,
    speed_vs_height_curve,
    straighten_voltages,
    stride_per_cycle,
    write_speed_curve_csv,
)
from softcrawl.shape import RobotParams, ShapeCurve, chord_shortening


@pytest.fixture(scope="module")
def model():
    return ShapeModel(params=RobotParams())


@pytest.fixture(scope="module")
def table(model):
    heights = np.linspace(0.0, 0.015, 7)
    return speed_vs_height_curve(model, heights)


def parabola(height_m, length_m=0.5, n=2001):
    x = np.linspace(0.0, length_m, n)
    y = 4.0 * height_m * x * (length_m - x) / length_m**2
    return ShapeCurve(x_m=x, y_m=y)


def command(shape, dy_max=None):
    return ControlCommand(
        v=np.zeros(5), predicted=shape, loss=0.0, dy_max_cm=dy_max, dy_min_cm=None
    )


class TestCyclePhases:
    def test_four_phases_alternate_anchor(self):
        assert len(CYCLE_PHASES) == 4
        assert [p.index for p in CYCLE_PHASES] == [1, 2, 3, 4]
        assert [p.anchored_end for p in CYCLE_PHASES] == [
            "front", "front", "rear", "rear",
        ]
        assert [p.posture for p in CYCLE_PHASES] == [
            "rear-lift", "bent", "front-lift", "straight",
        ]

    def test_straighten_keeps_only_end_pads(self):
        v = straighten_voltages(np.array([300.0, 258.0, -1292.0, 258.0, 300.0]))
        assert v.tolist() == [300.0, 0.0, 0.0, 0.0, 300.0]
        # input untouched
        ref = np.array([1.0, 2.0, 3.0])
        straighten_voltages(ref)
        assert ref.tolist() == [1.0, 2.0, 3.0]


class TestStride:
    def test_parabolic_arch_matches_closed_form(self):
        # Shallow parabola of height h: arc length exceeds the chord by
        # 8 h^2 / (3 L) to leading order.
        h, length = 0.012, 0.5
        flat = parabola(0.0, length)
        stride = stride_per_cycle(parabola(h, length), flat)
        assert stride == pytest.approx(8.0 * h**2 / (3.0 * length), rel=0.01)

    def test_floored_at_zero(self):
        assert stride_per_cycle(parabola(0.0), parabola(0.01)) == 0.0

    def test_taller_arch_travels_farther(self):
        flat = parabola(0.0)
        strides = [stride_per_cycle(parabola(h), flat) for h in (0.005, 0.01, 0.015)]
        assert strides[0] < strides[1] < strides[2]


class TestAdvanceCycle:
    def test_moves_forward_by_stride(self):
        bent, flat = parabola(0.012), parabola(0.0)
        res = advance_cycle(0.1, command(bent), command(flat))
        assert res.stride_m == stride_per_cycle(bent, flat)
        assert res.new_x0_m == pytest.approx(0.1 + res.stride_m)
        assert res.bent is bent and res.straight is flat

    def test_crossing_command_rejected(self):
        bent, flat = parabola(0.012), parabola(0.0)
        with pytest.raises(SafetyViolationError):
            advance_cycle(0.0, command(bent, dy_max=0.2), command(flat))
        with pytest.raises(SafetyViolationError):
            advance_cycle(0.0, command(bent), command(flat, dy_max=1e-6))

    def test_negative_clearance_accepted(self):
        res = advance_cycle(
            0.0, command(parabola(0.01), dy_max=-0.5), command(parabola(0.0), dy_max=-2.0)
        )
        assert res.stride_m > 0.0


class TestSpeedVsHeightCurve:
    def test_hits_requested_heights(self, table):
        np.testing.assert_allclose(table[:, 0], np.linspace(0.0, 0.015, 7), atol=1e-12)

    def test_zero_height_is_zero_stride(self, table):
        assert table[0, 1] == 0.0

    def test_monotone_in_height(self, table):
        assert np.all(np.diff(table[:, 1]) > 0)

    def test_quadratic_up_to_one_percent(self, table):
        # stride ~ c * h^2: fitting c on the positive rows must explain
        # essentially all the variance.
        h, s = table[1:, 0], table[1:, 1]
        c = np.sum(s * h**2) / np.sum(h**4)
        resid = s - c * h**2
        r2 = 1.0 - np.sum(resid**2) / np.sum((s - s.mean()) ** 2)
        assert r2 > 0.99

    def test_scaled_reference_peak_matches_height(self, model):
        # Cross-check one row against a direct solve: the stride equals
        # the chord shortening of the bent ground-contact shape.
        rows = speed_vs_height_curve(model, np.array([0.0135]))
        from softcrawl.shape import solve_shape

        bent = solve_shape(model.params, REFERENCE_BENT_V).shape
        assert bent.peak_m == pytest.approx(0.0135, abs=2e-4)
        assert rows[0, 1] == pytest.approx(chord_shortening(bent), rel=0.05)

    def test_unreachable_height_rejected(self, model):
        with pytest.raises(ConfigError):
            speed_vs_height_curve(model, np.array([0.2]))

    def test_bad_height_grids_rejected(self, model):
        with pytest.raises(ConfigError):
            speed_vs_height_curve(model, np.array([]))
        with pytest.raises(ConfigError):
            speed_vs_height_curve(model, np.array([-0.01]))
        with pytest.raises(ConfigError):
            speed_vs_height_curve(model, np.array([0.01]), v_ref=np.zeros(5))


class TestSpeedCurveCsv:
    def test_format(self, tmp_path):
        table = np.array([[0.0, 0.0], [0.015, 0.0012]])
        path = tmp_path / "speed.csv"
        write_speed_curve_csv(path, table)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "height_cm,stride_cm"
        assert lines[1] == "0,0"
        assert lines[2] == "1.5,0.12"
