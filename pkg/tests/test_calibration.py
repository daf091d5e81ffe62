"""Online shape-correction tests: single-step algebra, convergence to
the least-squares coefficients, and coefficient-table IO."""

from __future__ import annotations

import numpy as np
import pytest

from softcrawl.calibration import (
    CalibrationSample,
    CorrectionField,
    calibrate_batch,
    corrected_shape,
    default_learning_rate,
    lms_update,
    read_correction_csv,
    write_correction_csv,
)
from softcrawl.errors import ConfigError
from softcrawl.shape import ShapeCurve

N_NODES = 9
N_ACT = 3
GRID = np.linspace(0.0, 0.4, N_NODES)


def curve(y):
    return ShapeCurve(x_m=GRID, y_m=np.asarray(y, float))


def field(alpha=None, rate=None):
    if alpha is None:
        alpha = np.zeros((N_NODES, N_ACT))
    return CorrectionField(x_m=GRID, alpha_cm_per_v=alpha, learning_rate=rate)


def sample(v, true_alpha, rng=None):
    """Model predicts flat; sensing sees the linear deviation alpha@v."""
    v = np.asarray(v, float)
    dy_cm = true_alpha @ v
    if rng is not None:
        dy_cm = dy_cm + rng.normal(0.0, 1e-6, size=N_NODES)
    return CalibrationSample(
        v=v, sensed=curve(dy_cm / 100.0), model_shape=curve(np.zeros(N_NODES))
    )


class TestCorrectedShape:
    def test_adds_linear_term_exactly(self):
        alpha = np.arange(N_NODES * N_ACT, dtype=float).reshape(N_NODES, N_ACT)
        v = np.array([2.0, -1.0, 0.5])
        base = curve(np.full(N_NODES, 0.01))
        out = corrected_shape(field(alpha), base, v)
        np.testing.assert_array_equal(out.y_m, base.y_m + (alpha @ v) / 100.0)

    def test_grid_and_voltage_shape_checked(self):
        other = ShapeCurve(x_m=GRID + 0.1, y_m=np.zeros(N_NODES))
        with pytest.raises(ConfigError):
            corrected_shape(field(), other, np.zeros(N_ACT))
        with pytest.raises(ConfigError):
            corrected_shape(field(), curve(np.zeros(N_NODES)), np.zeros(N_ACT + 1))


class TestLmsUpdate:
    def test_single_step_algebra(self):
        # alpha' = alpha - eta * (alpha @ V - dy_cm) outer V, per node.
        rng = np.random.default_rng(11)
        alpha = rng.normal(size=(N_NODES, N_ACT))
        v = np.array([10.0, -5.0, 2.0])
        dy_cm = rng.normal(size=N_NODES)
        eta = 1e-3
        s = CalibrationSample(
            v=v, sensed=curve(dy_cm / 100.0), model_shape=curve(np.zeros(N_NODES))
        )
        updated = lms_update(field(alpha, rate=eta), s)
        expect = alpha - eta * np.outer(alpha @ v - dy_cm, v)
        np.testing.assert_allclose(updated.alpha_cm_per_v, expect, atol=1e-15)

    def test_requires_learning_rate(self):
        s = sample(np.ones(N_ACT), np.zeros((N_NODES, N_ACT)))
        with pytest.raises(ConfigError):
            lms_update(field(), s)

    def test_consistent_sample_is_fixed_point(self):
        true_alpha = np.random.default_rng(1).normal(size=(N_NODES, N_ACT))
        s = sample(np.array([3.0, 1.0, -2.0]), true_alpha)
        out = lms_update(field(true_alpha, rate=1e-2), s)
        np.testing.assert_allclose(out.alpha_cm_per_v, true_alpha, atol=1e-12)


class TestCalibrateBatch:
    def test_recovers_alpha_in_excited_directions(self):
        # Three linearly independent probes span the voltage space, so
        # LMS must converge to the same coefficients least squares gives.
        rng = np.random.default_rng(5)
        true_alpha = rng.normal(size=(N_NODES, N_ACT))
        probes = [
            np.array([100.0, 0.0, 0.0]),
            np.array([0.0, 80.0, 10.0]),
            np.array([20.0, -30.0, 90.0]),
        ]
        samples = [sample(v, true_alpha) for v in probes]
        out = calibrate_batch(field(), samples, epochs=4000)

        vmat = np.stack(probes)  # (n_samples, n_act)
        dy = np.stack([true_alpha @ v for v in probes])  # (n_samples, n_nodes)
        lsq = np.linalg.lstsq(vmat, dy, rcond=None)[0].T
        np.testing.assert_allclose(out.alpha_cm_per_v, lsq, atol=1e-6)

    def test_unexcited_directions_stay_zero(self):
        # A single probe along e1 cannot inform the other columns.
        true_alpha = np.random.default_rng(2).normal(size=(N_NODES, N_ACT))
        samples = [sample(np.array([50.0, 0.0, 0.0]), true_alpha)]
        out = calibrate_batch(field(), samples, epochs=2000)
        np.testing.assert_allclose(out.alpha_cm_per_v[:, 0], true_alpha[:, 0], atol=1e-9)
        np.testing.assert_array_equal(out.alpha_cm_per_v[:, 1:], 0.0)

    def test_default_rate_is_stable_at_box_scale_voltages(self):
        rng = np.random.default_rng(9)
        true_alpha = 0.01 * rng.normal(size=(N_NODES, N_ACT))
        probes = [rng.uniform(-1500.0, 500.0, N_ACT) for _ in range(4)]
        samples = [sample(v, true_alpha, rng=rng) for v in probes]
        out = calibrate_batch(field(), samples, epochs=500)
        assert np.all(np.isfinite(out.alpha_cm_per_v))
        worst = np.abs(out.alpha_cm_per_v - true_alpha).max()
        assert worst < 1e-3

    def test_zero_epochs_is_identity(self):
        start = field(np.full((N_NODES, N_ACT), 0.25))
        out = calibrate_batch(start, [sample(np.ones(N_ACT), np.zeros((N_NODES, N_ACT)))], epochs=0)
        np.testing.assert_array_equal(out.alpha_cm_per_v, start.alpha_cm_per_v)

    def test_sad_paths(self):
        with pytest.raises(ConfigError):
            calibrate_batch(field(), [], epochs=10)
        s = sample(np.ones(N_ACT), np.zeros((N_NODES, N_ACT)))
        with pytest.raises(ConfigError):
            calibrate_batch(field(), [s], epochs=-1)

    def test_default_learning_rate_value(self):
        s1 = sample(np.array([3.0, 0.0, 4.0]), np.zeros((N_NODES, N_ACT)))
        s2 = sample(np.array([1.0, 1.0, 1.0]), np.zeros((N_NODES, N_ACT)))
        assert default_learning_rate([s1, s2]) == pytest.approx(0.5 / 25.0)
        with pytest.raises(ConfigError):
            default_learning_rate([])
        zero = sample(np.zeros(N_ACT), np.zeros((N_NODES, N_ACT)))
        with pytest.raises(ConfigError):
            default_learning_rate([zero])


class TestCorrectionCsv:
    def test_round_trip(self, tmp_path):
        alpha = np.random.default_rng(3).normal(size=(N_NODES, N_ACT))
        path = tmp_path / "correction.csv"
        write_correction_csv(path, field(alpha))
        back = read_correction_csv(path)
        np.testing.assert_allclose(back.x_m, GRID, atol=1e-12)
        np.testing.assert_allclose(back.alpha_cm_per_v, alpha, rtol=1e-9)
        header = path.read_text().splitlines()[0]
        assert header == "x_cm,a1,a2,a3"

    def test_read_rejects_bad_tables(self, tmp_path):
        bad_header = tmp_path / "a.csv"
        bad_header.write_text("foo,a1\n0,1\n")
        with pytest.raises(ConfigError):
            read_correction_csv(bad_header)

        empty = tmp_path / "b.csv"
        empty.write_text("x_cm,a1\n")
        with pytest.raises(ConfigError):
            read_correction_csv(empty)

        garbage = tmp_path / "c.csv"
        garbage.write_text("x_cm,a1\n0,notanumber\n")
        with pytest.raises(ConfigError):
            read_correction_csv(garbage)

    def test_validation(self):
        with pytest.raises(ConfigError):
            CorrectionField(x_m=GRID, alpha_cm_per_v=np.zeros((N_NODES + 1, N_ACT)))
        with pytest.raises(ConfigError):
            CorrectionField(
                x_m=GRID,
                alpha_cm_per_v=np.full((N_NODES, N_ACT), np.nan),
            )
        with pytest.raises(ConfigError):
            field(rate=-1.0)
