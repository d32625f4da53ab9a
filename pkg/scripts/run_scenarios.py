#!/usr/bin/env python3
"""Drive the three bundled scenarios end to end.

For each scenario: single-shot plan, closed-loop simulation, and SVG figures,
written under out/. Prints one summary line per scenario.
"""
import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from kinoplan.planner import plan_once, simulate_run  # noqa: E402
from kinoplan.scenario_io import (  # noqa: E402
    parse_scenario,
    plan_result_to_dict,
    trace_to_lines,
)
from kinoplan.svg_render import render_plan, render_trace  # noqa: E402


def main() -> int:
    out_dir = ROOT / "out"
    out_dir.mkdir(exist_ok=True)
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    for name in ("scenario1", "scenario2", "scenario3"):
        scenario = parse_scenario(str(ROOT / "scenarios" / f"{name}.json"))

        result = plan_once(scenario, scenario.obstacles)
        plan_doc = plan_result_to_dict(result, scenario, scenario.obstacles)
        (out_dir / f"{name}_plan.json").write_text(json.dumps(plan_doc, indent=2) + "\n")
        (out_dir / f"{name}_plan.svg").write_text(render_plan(plan_doc))

        trace = simulate_run(scenario, seed=seed)
        lines = trace_to_lines(trace)
        (out_dir / f"{name}_trace.ndjson").write_text("\n".join(lines) + "\n")
        records = [json.loads(line) for line in lines]
        (out_dir / f"{name}_trace.svg").write_text(render_trace(records))

        print(
            f"{name}: plan {result.state_count} states / eta {result.eta:.2f} s / "
            f"{result.plan_time_ms:.1f} ms; sim {trace.status} in {trace.elapsed:.2f} s, "
            f"min clearance {trace.min_clearance:.3f} m, "
            f"replan mean {trace.plan_time_mean_ms:.1f} ms (p95 {trace.plan_time_p95_ms:.1f})"
        )
    print(f"artifacts in {out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
