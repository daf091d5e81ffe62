"""Command-line scenario runner.

Subcommands map one-to-one onto the scenario runners; every run writes
its artifacts plus a metrics.json into the output directory.  Exit
codes: 0 success, 2 config/input error, 3 solver or optimizer failure,
4 safety-line violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import (
    ConfigError,
    OptimizerError,
    SafetyViolationError,
    ShapeSolveError,
)
from .scenarios import (
    builtin_roof_section,
    load_config,
    run_calibrate,
    run_crawl,
    run_shape_control,
    run_simulate_roofs,
    run_speed_map,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SAFETY = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="softcrawl",
        description="Soft crawling-robot shape control scenario runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="scenario config JSON path")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument(
            "--seed", type=int, help="override optimizer and plant seeds"
        )

    p = sub.add_parser(
        "shape-control", help="track target shapes before/after calibration"
    )
    common(p)
    p.add_argument("--target", help="target shape CSV (x_cm,y_cm)")

    p = sub.add_parser("crawl", help="crawl under the configured roof")
    common(p)
    p.add_argument(
        "--roof",
        help="built-in roof {step|slant|sine} or file:PATH profile CSV",
    )

    p = sub.add_parser(
        "speed-map", help="stride-vs-height (and stride-vs-position) maps"
    )
    common(p)
    p.add_argument(
        "--roof",
        help="built-in roof {step|slant|sine} or file:PATH profile CSV",
    )

    p = sub.add_parser(
        "calibrate", help="fit the correction table from recorded samples"
    )
    common(p)
    p.add_argument(
        "--samples", required=True, help="directory with samples.json manifest"
    )

    p = sub.add_parser(
        "simulate-roofs", help="crawl under both curved built-in roofs"
    )
    common(p)
    return parser


def _roof_override(selector: str) -> dict:
    if selector.startswith("file:"):
        return {"kind": "file", "path": selector[len("file:"):], "margin_cm": 0.1}
    return builtin_roof_section(selector)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        overrides = {}
        roof_selector = getattr(args, "roof", None)
        if roof_selector:
            overrides["roof"] = _roof_override(roof_selector)
        config = load_config(args.config, overrides=overrides or None)
        config = config.seeded(args.seed)

        if args.command == "shape-control":
            metrics = run_shape_control(config, args.out, target_path=args.target)
        elif args.command == "crawl":
            metrics = run_crawl(config, args.out)
        elif args.command == "speed-map":
            metrics = run_speed_map(config, args.out)
        elif args.command == "calibrate":
            metrics = run_calibrate(config, args.samples, args.out)
        else:
            metrics = run_simulate_roofs(config, args.out)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ShapeSolveError, OptimizerError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except SafetyViolationError as exc:
        print(f"safety violation: {exc}", file=sys.stderr)
        return EXIT_SAFETY
    print(json.dumps(_summary(metrics)))
    return EXIT_OK


def _summary(metrics: dict) -> dict:
    """Shallow copy with long per-item lists elided for the console."""
    out = {}
    for key, value in metrics.items():
        if isinstance(value, list) and len(value) > 8:
            out[key] = f"[{len(value)} items]"
        else:
            out[key] = value
    return out


if __name__ == "__main__":
    sys.exit(main())
