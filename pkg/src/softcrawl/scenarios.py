"""End-to-end scenario runners behind the CLI.

Each runner builds the model, plant, and constraint objects from one
JSON config document, executes the task, and writes analysis-ready
artifacts: CSV data, JSON-lines command logs, and a metrics.json that
echoes the config and seed so every run is reproducible.  All
interface units are cm and volts; everything internal is SI.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calibration import (
    CalibrationSample,
    CorrectionField,
    calibrate_batch,
    write_correction_csv,
)
from .controller import (
    ControlCommand,
    RoofLossConfig,
    ShapeModel,
    command_record,
    load_target_shape,
    safety_clearance,
    solve_roof_shape,
    solve_target_shape,
    write_command_records,
)
from .errors import ConfigError, SafetyViolationError
from .gait import (
    REFERENCE_BENT_V,
    advance_cycle,
    speed_vs_height_curve,
    straighten_voltages,
    stride_per_cycle,
    write_speed_curve_csv,
)
from .optimizer import BoxDomain, GpConfig
from .plant import Plant, PlantParams, make_linear_deviation
from .roofs import (
    RoofProfile,
    SafetyLine,
    SinusoidalRoof,
    SlantedRoof,
    StepRoof,
    load_profile,
)
from .shape import RobotParams, ShapeCurve, shape_mse, write_shape_csv

__all__ = [
    "ScenarioConfig",
    "load_config",
    "phase_target_voltages",
    "reference_calibration_voltages",
    "run_shape_control",
    "run_crawl",
    "run_speed_map",
    "run_calibrate",
    "run_simulate_roofs",
]

# Inchworm-phase command family used for calibration targets: both end
# pads engaged, plus scaled arches and front/rear-biased variants.
_ENDS_ONLY_V = np.array([300.0, 0.0, 0.0, 0.0, 300.0])


def phase_target_voltages() -> list[np.ndarray]:
    """Five-command family behind the shape-control targets."""
    return [
        _ENDS_ONLY_V.copy(),
        0.5 * REFERENCE_BENT_V,
        REFERENCE_BENT_V.copy(),
        np.array([500.0, 0.0, 0.0, 0.0, 300.0]),
        np.array([300.0, 0.0, 0.0, 0.0, 500.0]),
    ]


def reference_calibration_voltages() -> list[np.ndarray]:
    """Two-command calibration set: full bent arch plus ends-only."""
    return [REFERENCE_BENT_V.copy(), _ENDS_ONLY_V.copy()]


# --------------------------------------------------------------------
# Config parsing
# --------------------------------------------------------------------

_ROBOT_KEYS = {
    "length_cm",
    "width_cm",
    "n_actuators",
    "actuator_span_cm",
    "pad_span_cm",
    "n_nodes",
    "bending_stiffness_nm2",
    "weight_per_length_n_per_m",
    "moment_per_volt_nm_per_v",
    "v_lower",
    "v_upper",
}
_PLANT_KEYS = {
    "noise_std_cm",
    "seed",
    "stiffness_scale",
    "gain_scale",
    "deviation",
}
_DEVIATION_KEYS = {"kind", "target_mse_cm2", "smooth_window", "seed"}
_OPTIMIZER_KEYS = {
    "box_lower",
    "box_upper",
    "budget",
    "seed",
    "symmetric_mode",
    "init_samples",
    "refit_every",
    "refit_multistart",
}
_CALIBRATION_KEYS = {"learning_rate", "epochs", "reference_voltages"}
_ROOF_KEYS = {
    "kind",
    "margin_cm",
    "domain_cm",
    "left_height_cm",
    "right_height_cm",
    "transition_x_cm",
    "start_height_cm",
    "end_height_cm",
    "mean_height_cm",
    "amplitude_cm",
    "wavelength_cm",
    "phase_rad",
    "path",
}
_RUN_KEYS = {
    "start_x0_cm",
    "max_cycles",
    "stop_x0_cm",
    "snapshot_every",
    "height_grid_cm",
    "position_step_cm",
}
_SECTION_KEYS = {"robot", "plant", "optimizer", "calibration", "roof", "run"}


def _check_keys(section: str, data: dict, allowed: set) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(
            f"unknown keys in '{section}' section: {sorted(unknown)}"
        )


@dataclass
class ScenarioConfig:
    """Parsed scenario document with every section resolved."""

    robot: RobotParams
    plant: dict = field(default_factory=dict)
    optimizer: dict = field(default_factory=dict)
    calibration: dict = field(default_factory=dict)
    roof: dict | None = None
    run: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)

    def seeded(self, seed: int | None) -> "ScenarioConfig":
        """Apply a CLI seed override to both optimizer and plant."""
        if seed is None:
            return self
        cfg = ScenarioConfig(
            robot=self.robot,
            plant=dict(self.plant),
            optimizer=dict(self.optimizer),
            calibration=dict(self.calibration),
            roof=dict(self.roof) if self.roof is not None else None,
            run=dict(self.run),
            raw=dict(self.raw),
        )
        cfg.optimizer["seed"] = int(seed)
        cfg.plant["seed"] = int(seed)
        return cfg


def _parse_robot(data: dict) -> RobotParams:
    _check_keys("robot", data, _ROBOT_KEYS)
    kwargs = {}
    for key, target in (
        ("length_cm", "length_m"),
        ("width_cm", "width_m"),
        ("actuator_span_cm", "actuator_span_m"),
        ("pad_span_cm", "pad_span_m"),
    ):
        if key in data:
            kwargs[target] = float(data[key]) / 100.0
    for key in (
        "n_actuators",
        "n_nodes",
    ):
        if key in data:
            kwargs[key] = int(data[key])
    for key in (
        "bending_stiffness_nm2",
        "weight_per_length_n_per_m",
        "moment_per_volt_nm_per_v",
        "v_lower",
        "v_upper",
    ):
        if key in data:
            kwargs[key] = float(data[key])
    return RobotParams(**kwargs)


def load_config(path=None, overrides: dict | None = None) -> ScenarioConfig:
    """Load a scenario JSON document (or defaults when path is None)."""
    raw: dict = {}
    if path is not None:
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"invalid config JSON: {exc}") from exc
    if overrides:
        raw = {**raw, **overrides}
    if not isinstance(raw, dict):
        raise ConfigError("config document must be a JSON object")
    _check_keys("document", raw, _SECTION_KEYS)

    robot = _parse_robot(raw.get("robot", {}))

    plant = dict(raw.get("plant", {}))
    _check_keys("plant", plant, _PLANT_KEYS)
    if "deviation" in plant and plant["deviation"] is not None:
        _check_keys("plant.deviation", plant["deviation"], _DEVIATION_KEYS)

    optimizer = dict(raw.get("optimizer", {}))
    _check_keys("optimizer", optimizer, _OPTIMIZER_KEYS)

    calibration = dict(raw.get("calibration", {}))
    _check_keys("calibration", calibration, _CALIBRATION_KEYS)

    roof = raw.get("roof")
    if roof is not None:
        roof = dict(roof)
        _check_keys("roof", roof, _ROOF_KEYS)

    run = dict(raw.get("run", {}))
    _check_keys("run", run, _RUN_KEYS)

    return ScenarioConfig(
        robot=robot,
        plant=plant,
        optimizer=optimizer,
        calibration=calibration,
        roof=roof,
        run=run,
        raw=raw,
    )


def _build_plant(config: ScenarioConfig, default_deviation: bool = False) -> Plant:
    section = config.plant
    beta = None
    deviation = section.get("deviation")
    if deviation is None and default_deviation:
        deviation = {}
    if deviation is not None and deviation.get("kind", "linear") != "none":
        kind = deviation.get("kind", "linear")
        if kind != "linear":
            raise ConfigError(f"unknown plant deviation kind: {kind}")
        beta = make_linear_deviation(
            config.robot,
            seed=int(deviation.get("seed", section.get("seed", 0))),
            reference_voltages=np.array(phase_target_voltages()),
            target_mse_cm2=float(deviation.get("target_mse_cm2", 0.07)),
            smooth_window=int(deviation.get("smooth_window", 21)),
        )
    params = PlantParams(
        base=config.robot,
        beta_cm_per_v=beta,
        stiffness_scale=float(section.get("stiffness_scale", 1.0)),
        gain_scale=float(section.get("gain_scale", 1.0)),
        noise_std_cm=float(section.get("noise_std_cm", 0.02)),
        seed=int(section.get("seed", 0)),
    )
    return Plant(params)


def _build_box(config: ScenarioConfig, symmetric_default: bool) -> BoxDomain:
    section = config.optimizer
    robot = config.robot
    lower = np.asarray(
        section.get("box_lower", [robot.v_lower] * robot.n_actuators), float
    )
    upper = np.asarray(
        section.get("box_upper", [robot.v_upper] * robot.n_actuators), float
    )
    return BoxDomain(
        lower=lower,
        upper=upper,
        symmetric_mode=bool(section.get("symmetric_mode", symmetric_default)),
    )


def _build_gp(config: ScenarioConfig) -> GpConfig:
    section = config.optimizer
    return GpConfig(
        refit_every=int(section.get("refit_every", 10)),
        refit_multistart=int(section.get("refit_multistart", 4)),
    )


def _build_roof(config: ScenarioConfig) -> SafetyLine:
    if config.roof is None:
        raise ConfigError("this scenario requires a 'roof' config section")
    section = config.roof
    kind = section.get("kind")
    margin_m = float(section.get("margin_cm", 0.1)) / 100.0

    def domain() -> tuple[float, float]:
        dom = section.get("domain_cm")
        if dom is None or len(dom) != 2:
            raise ConfigError("roof config needs domain_cm: [lo, hi]")
        return (float(dom[0]) / 100.0, float(dom[1]) / 100.0)

    if kind == "step":
        profile: RoofProfile = StepRoof(
            left_height_m=float(section["left_height_cm"]) / 100.0,
            right_height_m=float(section["right_height_cm"]) / 100.0,
            transition_x_m=float(section["transition_x_cm"]) / 100.0,
            domain_m=domain(),
        )
    elif kind == "slanted":
        profile = SlantedRoof(
            start_height_m=float(section["start_height_cm"]) / 100.0,
            end_height_m=float(section["end_height_cm"]) / 100.0,
            domain_m=domain(),
        )
    elif kind == "sinusoidal":
        profile = SinusoidalRoof(
            mean_height_m=float(section["mean_height_cm"]) / 100.0,
            amplitude_m=float(section["amplitude_cm"]) / 100.0,
            wavelength_m=float(section["wavelength_cm"]) / 100.0,
            phase_rad=float(section.get("phase_rad", 0.0)),
            domain_m=domain(),
        )
    elif kind == "file":
        profile = load_profile(section["path"])
    else:
        raise ConfigError(f"unknown roof kind: {kind}")
    return SafetyLine(roof=profile, margin_m=margin_m)


def _write_metrics(out_dir: Path, command: str, config: ScenarioConfig, seed, extra: dict) -> None:
    payload = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": config.raw,
        **extra,
    }
    with open(out_dir / "metrics.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _out_dir(out) -> Path:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# --------------------------------------------------------------------
# shape-control
# --------------------------------------------------------------------

def run_shape_control(config: ScenarioConfig, out, target_path=None) -> dict:
    """Track targets pre-calibration, calibrate, track again.

    Targets default to the plant's five phase-command shapes; an
    explicit target CSV replaces the batch with that single curve.
    Writes shapes.csv (per target: target/pre/post curves stacked),
    the learned correction table, and metrics.json with per-target
    and averaged MSEs.
    """
    t_start = time.time()
    out_dir = _out_dir(out)
    plant = _build_plant(config, default_deviation=True)
    model = ShapeModel(config.robot)
    box = _build_box(config, symmetric_default=False)
    gp = _build_gp(config)
    budget = int(config.optimizer.get("budget", 150))
    seed = int(config.optimizer.get("seed", 0))

    if target_path is not None:
        targets = [load_target_shape(target_path, config.robot)]
    else:
        targets = [plant.shape(v) for v in phase_target_voltages()]

    def track(
        target_list: list[ShapeCurve],
        use_model: ShapeModel,
        seed_offset: int,
        warm_starts: list[np.ndarray] | None = None,
    ):
        results = []
        for i, tgt in enumerate(target_list):
            cmd = solve_target_shape(
                tgt, use_model, box, budget=budget,
                seed=seed + seed_offset + i, gp_config=gp,
                extra_inits=None if warm_starts is None else [warm_starts[i]],
            )
            executed = plant.sense(cmd.v, 0.0)
            results.append((cmd, executed, shape_mse(executed.shape, tgt)))
        return results

    pre = track(targets, model, seed_offset=0)

    refs = [
        np.asarray(v, float)
        for v in config.calibration.get(
            "reference_voltages", [v.tolist() for v in reference_calibration_voltages()]
        )
    ]
    samples = [
        CalibrationSample(
            v=v, sensed=plant.sense(v, 0.0).shape, model_shape=model.predict(v)
        )
        for v in refs
    ]
    rate = config.calibration.get("learning_rate")
    field0 = CorrectionField.zeros(
        config.robot, learning_rate=float(rate) if rate is not None else None
    )
    epochs = int(config.calibration.get("epochs", 200))
    correction = calibrate_batch(field0, samples, epochs=epochs)
    write_correction_csv(out_dir / "correction.csv", correction)

    # Re-track each target with the calibrated model, seeding the search
    # with the pre-calibration command for the same target so the second
    # pass never regresses below what the controller already knew.
    calibrated = ShapeModel(config.robot, correction=correction)
    post = track(
        targets, calibrated, seed_offset=1000,
        warm_starts=[cmd.v for cmd, _, _ in pre],
    )

    with open(out_dir / "shapes.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["target_index", "x_cm", "target_y_cm", "pre_y_cm", "post_y_cm"]
        )
        for i, tgt in enumerate(targets):
            pre_y = pre[i][1].shape.y_m
            post_y = post[i][1].shape.y_m
            for x, ty, py, qy in zip(tgt.x_m, tgt.y_m, pre_y, post_y):
                writer.writerow(
                    [
                        str(i),
                        f"{x * 100.0:.10g}",
                        f"{ty * 100.0:.10g}",
                        f"{py * 100.0:.10g}",
                        f"{qy * 100.0:.10g}",
                    ]
                )

    per_target = [
        {
            "target": i,
            "pre_mse_cm2": pre[i][2],
            "post_mse_cm2": post[i][2],
        }
        for i in range(len(targets))
    ]
    metrics = {
        "per_target": per_target,
        "pre_mse_cm2": float(np.mean([r["pre_mse_cm2"] for r in per_target])),
        "post_mse_cm2": float(np.mean([r["post_mse_cm2"] for r in per_target])),
        "epochs": epochs,
        "runtime_s": time.time() - t_start,
    }
    _write_metrics(out_dir, "shape-control", config, seed, metrics)
    return metrics


# --------------------------------------------------------------------
# crawl
# --------------------------------------------------------------------

def _crawl_box(config: ScenarioConfig) -> BoxDomain:
    """Crawl command box: pinned end pads, raised shoulders, arched center."""
    if "box_lower" in config.optimizer or "box_upper" in config.optimizer:
        return _build_box(config, symmetric_default=True)
    return BoxDomain(
        lower=np.array([299.0, 200.0, -1500.0, 200.0, 299.0]),
        upper=np.array([301.0, 500.0, 0.0, 500.0, 301.0]),
        symmetric_mode=bool(config.optimizer.get("symmetric_mode", True)),
    )


def _profile_key(line: SafetyLine, x0_m: float, length_m: float, n: int):
    """Footprint constraint fingerprint: safety heights, -1 where unroofed."""
    xs = x0_m + np.linspace(0.0, length_m, n)
    mask = line.roof.contains(xs)
    key_heights = np.full(n, -1.0)
    if np.any(mask):
        key_heights[mask] = line.height_at(xs[mask])
    return tuple(np.round(key_heights, 12))


def run_crawl(config: ScenarioConfig, out) -> dict:
    """Crawl under the configured roof until it is traversed.

    Per cycle: plan the bent posture against the safety line (warm
    started from the previous cycle), derive the straight posture,
    verify both executed plant shapes against the line, then advance.
    Identical constraint profiles reuse the previously planned command,
    which keeps long flat roof sections cheap.
    """
    t_start = time.time()
    out_dir = _out_dir(out)
    line = _build_roof(config)
    plant = _build_plant(config)
    model = ShapeModel(config.robot)
    box = _crawl_box(config)
    gp = _build_gp(config)
    loss_cfg = RoofLossConfig()
    budget = int(config.optimizer.get("budget", 60))
    seed = int(config.optimizer.get("seed", 0))

    run_cfg = config.run
    x0 = float(run_cfg.get("start_x0_cm", -2.0)) / 100.0
    max_cycles = int(run_cfg.get("max_cycles", 2000))
    stop_x0 = run_cfg.get("stop_x0_cm", 60.0)
    stop_x0_m = float(stop_x0) / 100.0 if stop_x0 is not None else None
    snapshot_every = int(run_cfg.get("snapshot_every", 0))

    length = config.robot.length_m
    roof_hi = line.roof.domain_m[1]
    snapshot_dir = out_dir / "snapshots"
    if snapshot_every > 0:
        snapshot_dir.mkdir(exist_ok=True)

    command_cache: dict = {}
    records: list[dict] = []
    rows: list[list[str]] = []
    violations = 0
    prev_v = None
    v_held = np.zeros(config.robot.n_actuators)
    cycle = 0

    while cycle < max_cycles:
        if x0 > roof_hi:
            break
        if stop_x0_m is not None and x0 >= stop_x0_m:
            break
        sensed = plant.sense(v_held, x0)
        x0 = sensed.x0_m

        key = _profile_key(line, x0, length, loss_cfg.sample_count)
        cached = command_cache.get(key)
        if cached is not None:
            bent_cmd, straight_cmd = cached
        else:
            bent_cmd = solve_roof_shape(
                line,
                x0,
                model,
                box,
                budget=budget,
                seed=seed + cycle,
                cfg=loss_cfg,
                gp_config=gp,
                extra_inits=[prev_v] if prev_v is not None else None,
            )
            straight_v = straighten_voltages(bent_cmd.v)
            straight_pred = model.predict(straight_v)
            s_dy_max, s_dy_min = safety_clearance(
                straight_pred, line, x0, loss_cfg
            )
            straight_cmd = ControlCommand(
                v=straight_v,
                predicted=straight_pred,
                loss=0.0,
                dy_max_cm=s_dy_max,
                dy_min_cm=s_dy_min,
            )
            command_cache[key] = (bent_cmd, straight_cmd)
        prev_v = bent_cmd.v
        v_held = straight_cmd.v

        for v in (bent_cmd.v, straight_cmd.v):
            executed = plant.shape(v)
            dy_max, _ = safety_clearance(executed, line, x0, loss_cfg)
            if dy_max > 0.0:
                violations += 1

        result = advance_cycle(x0, bent_cmd, straight_cmd)
        records.append(command_record(bent_cmd, x0))
        rows.append(
            [
                str(cycle),
                f"{x0 * 100.0:.10g}",
                f"{result.stride_m * 100.0:.10g}",
                f"{bent_cmd.dy_min_cm:.10g}",
                f"{bent_cmd.predicted.peak_m * 100.0:.10g}",
            ]
            + [f"{v:.10g}" for v in bent_cmd.v]
        )
        if snapshot_every > 0 and cycle % snapshot_every == 0:
            world = ShapeCurve(
                x_m=bent_cmd.predicted.x_m + x0, y_m=bent_cmd.predicted.y_m
            )
            write_shape_csv(snapshot_dir / f"cycle_{cycle:05d}.csv", world)

        x0 = result.new_x0_m
        cycle += 1
        if result.stride_m <= 0.0:
            break

    n_act = config.robot.n_actuators
    with open(out_dir / "trajectory.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["cycle", "x0_cm", "stride_cm", "dy_min_cm", "peak_cm"]
            + [f"v{i + 1}" for i in range(n_act)]
        )
        writer.writerows(rows)
    write_command_records(out_dir / "commands.jsonl", records)

    metrics = {
        "cycles": cycle,
        "final_x0_cm": x0 * 100.0,
        "violations": violations,
        "max_dy_min_cm": max((r["dy_min_cm"] for r in records), default=None),
        "runtime_s": time.time() - t_start,
    }
    _write_metrics(out_dir, "crawl", config, seed, metrics)
    if violations:
        raise SafetyViolationError(
            f"{violations} executed cycle(s) crossed the safety line"
        )
    return metrics


# --------------------------------------------------------------------
# speed-map
# --------------------------------------------------------------------

def run_speed_map(config: ScenarioConfig, out) -> dict:
    """Emit stride-vs-height and, with a roof, stride-vs-position maps."""
    t_start = time.time()
    out_dir = _out_dir(out)
    model = ShapeModel(config.robot)
    seed = int(config.optimizer.get("seed", 0))

    grid_cm = config.run.get("height_grid_cm")
    if grid_cm is None:
        heights = np.linspace(0.0, 0.015, 16)
    else:
        if len(grid_cm) == 0:
            raise ConfigError("height grid must be nonempty")
        heights = np.asarray(grid_cm, dtype=float) / 100.0
    table = speed_vs_height_curve(model, heights)
    write_speed_curve_csv(out_dir / "speed_vs_height.csv", table)

    metrics: dict = {
        "heights": len(table),
        "max_stride_cm": float(table[:, 1].max() * 100.0),
    }

    if config.roof is not None:
        line = _build_roof(config)
        box = _crawl_box(config)
        gp = _build_gp(config)
        budget = int(config.optimizer.get("budget", 60))
        loss_cfg = RoofLossConfig()
        step_m = float(config.run.get("position_step_cm", 2.0)) / 100.0
        lo, hi = line.roof.domain_m
        positions = np.arange(lo, hi - config.robot.length_m + 1e-12, step_m)
        rows = []
        prev_v = None
        for i, x0 in enumerate(positions):
            cmd = solve_roof_shape(
                line, float(x0), model, box, budget=budget, seed=seed + i,
                cfg=loss_cfg, gp_config=gp,
                extra_inits=[prev_v] if prev_v is not None else None,
            )
            prev_v = cmd.v
            straight = model.predict(straighten_voltages(cmd.v))
            stride = stride_per_cycle(cmd.predicted, straight)
            rows.append((float(x0), stride))
        with open(out_dir / "speed_vs_position.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x0_cm", "stride_cm"])
            for x0, stride in rows:
                writer.writerow(
                    [f"{x0 * 100.0:.10g}", f"{stride * 100.0:.10g}"]
                )
        metrics["positions"] = len(rows)

    metrics["runtime_s"] = time.time() - t_start
    _write_metrics(out_dir, "speed-map", config, seed, metrics)
    return metrics


# --------------------------------------------------------------------
# calibrate
# --------------------------------------------------------------------

def run_calibrate(config: ScenarioConfig, samples_dir, out) -> dict:
    """Fit the correction table from recorded sensed shapes.

    The samples directory holds a samples.json manifest listing voltage
    vectors and sensed-shape CSV paths (relative to the directory).
    Writes the fitted correction CSV and a residual report comparing
    pre/post root-mean-square residuals per sample.
    """
    t_start = time.time()
    out_dir = _out_dir(out)
    samples_dir = Path(samples_dir)
    manifest_path = samples_dir / "samples.json"
    if not manifest_path.exists():
        raise ConfigError(f"missing manifest: {manifest_path}")
    with open(manifest_path) as fh:
        try:
            manifest = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid samples.json: {exc}") from exc
    if not isinstance(manifest, list) or not manifest:
        raise ConfigError("samples.json must be a nonempty list")

    model = ShapeModel(config.robot)
    samples = []
    for entry in manifest:
        try:
            v = np.asarray(entry["v_volts"], dtype=float)
            shape_path = samples_dir / entry["shape_csv"]
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed sample entry: {entry}") from exc
        sensed = load_target_shape(shape_path, config.robot)
        samples.append(
            CalibrationSample(
                v=v, sensed=sensed, model_shape=model.predict(v)
            )
        )

    rate = config.calibration.get("learning_rate")
    field0 = CorrectionField.zeros(
        config.robot, learning_rate=float(rate) if rate is not None else None
    )
    epochs = int(config.calibration.get("epochs", 200))
    fitted = calibrate_batch(field0, samples, epochs=epochs)
    write_correction_csv(out_dir / "correction.csv", fitted)

    def rms_residual(field: CorrectionField | None) -> list[float]:
        use = ShapeModel(config.robot, correction=field)
        out_rms = []
        for s in samples:
            pred = use.predict(s.v)
            out_rms.append(
                float(
                    np.sqrt(np.mean(((pred.y_m - s.sensed.y_m) * 100.0) ** 2))
                )
            )
        return out_rms

    pre_rms = rms_residual(None)
    post_rms = rms_residual(fitted)
    report = {
        "per_sample": [
            {"sample": i, "pre_rms_cm": a, "post_rms_cm": b}
            for i, (a, b) in enumerate(zip(pre_rms, post_rms))
        ],
        "pre_rms_cm": float(np.mean(pre_rms)),
        "post_rms_cm": float(np.mean(post_rms)),
        "epochs": epochs,
        "runtime_s": time.time() - t_start,
    }
    with open(out_dir / "residuals.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_metrics(
        out_dir, "calibrate", config, int(config.optimizer.get("seed", 0)), report
    )
    return report


# --------------------------------------------------------------------
# simulate-roofs
# --------------------------------------------------------------------

def builtin_roof_section(kind: str) -> dict:
    """Config roof sections for the built-in crawl ceilings."""
    if kind == "step":
        return {
            "kind": "step",
            "left_height_cm": 1.4,
            "right_height_cm": 0.9,
            "transition_x_cm": 52.0,
            "domain_cm": [-60.0, 200.0],
            "margin_cm": 0.1,
        }
    if kind == "slant":
        return {
            "kind": "slanted",
            "start_height_cm": 1.55,
            "end_height_cm": 0.95,
            "domain_cm": [-60.0, 160.0],
            "margin_cm": 0.1,
        }
    if kind == "sine":
        return {
            "kind": "sinusoidal",
            "mean_height_cm": 1.25,
            "amplitude_cm": 0.2,
            "wavelength_cm": 80.0,
            "phase_rad": 0.0,
            "domain_cm": [-60.0, 160.0],
            "margin_cm": 0.1,
        }
    raise ConfigError(f"no built-in roof named {kind!r}")


def run_simulate_roofs(config: ScenarioConfig, out) -> dict:
    """Crawl under both curved built-in ceilings (slanted, sinusoidal)."""
    out_dir = _out_dir(out)
    results = {}
    for kind in ("slant", "sine"):
        sub = ScenarioConfig(
            robot=config.robot,
            plant=dict(config.plant),
            optimizer=dict(config.optimizer),
            calibration=dict(config.calibration),
            roof=builtin_roof_section(kind),
            run=dict(config.run),
            raw={**config.raw, "roof": builtin_roof_section(kind)},
        )
        results[kind] = run_crawl(sub, out_dir / kind)
    return results
