#!/usr/bin/env python3
"""
Run every shipped scenario preset and write its time series and final state.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from replica_planner.config import load_settings  # noqa: E402
from replica_planner.logs import configure_logging  # noqa: E402
from replica_planner.services.simulator import load_scenario, run_scenario  # noqa: E402


def main():
    parser = argparse.ArgumentParser(description="Run all scenario presets.")
    parser.add_argument("--presets", type=Path, default=ROOT / "configs" / "scenarios", help="Preset directory.")
    parser.add_argument("--out", type=Path, default=ROOT / "runtime" / "presets", help="Output root.")
    parser.add_argument(
        "--only",
        action="append",
        metavar="NAME",
        help="Limit the run to one preset name, e.g. fig7 (repeatable).",
    )
    parser.add_argument("--config", type=Path, help="Path to settings.yaml.")
    args = parser.parse_args()

    settings = load_settings(args.config)
    configure_logging(settings.logging.level)

    presets = sorted(args.presets.glob("*.json"))
    if args.only:
        presets = [p for p in presets if p.stem in set(args.only)]
    if not presets:
        raise SystemExit(f"No presets found in {args.presets}")

    for path in presets:
        result = run_scenario(
            load_scenario(path),
            weight_mode=settings.placement.weight_mode,
            max_replicas=settings.placement.max_replicas,
            accept_clamped=settings.placement.accept_clamped,
        )
        dest = args.out / path.stem
        dest.mkdir(parents=True, exist_ok=True)
        (dest / "timeseries.csv").write_text(result.timeseries_csv(), encoding="utf-8")
        (dest / "final_state.json").write_text(
            json.dumps(result.final_state.to_dict(), indent=2) + "\n", encoding="utf-8"
        )
        print(f"{path.stem}: factor {result.replica_count}, {len(result.shortfalls)} shortfall(s) -> {dest}")


if __name__ == "__main__":
    main()
