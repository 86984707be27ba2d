"""Command-line entry point.

``gridshield run`` executes one or more scenario fixtures and writes, per
scenario, the JSON-lines event log (``events.jsonl``), the scored result
(``result.json``) and the delay report (``delay_report.json``). ``gridshield
replay`` re-scores a saved log and must reproduce the live result.

Exit codes are the machine contract: 0 when every requested scenario
passes, 1 when any fails, 2 on configuration or input errors. Stdout is
a human-readable summary and may change. The ``GRIDSHIELD_LOG`` variable
(DEBUG/INFO/WARNING/ERROR) controls diagnostic verbosity.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import logging
import os
import sys
from pathlib import Path

from gridshield.netsim import EventLog
from gridshield.scenarios import (
    SCENARIO_IDS,
    ScenarioError,
    ScenarioResult,
    check_complete,
    load_scenario,
    run_scenario,
    score,
)

log = logging.getLogger("gridshield")

EXIT_OK = 0
EXIT_SCENARIO_FAILED = 1
EXIT_CONFIG_ERROR = 2


def _parse_override(text: str):
    if "=" not in text:
        raise ScenarioError(f"override {text!r} is not key=value")
    key, value = text.split("=", 1)
    lowered = value.lower()
    if lowered in ("true", "false"):
        parsed = lowered == "true"
    else:
        try:
            parsed = int(value)
        except ValueError:
            try:
                parsed = float(value)
            except ValueError:
                parsed = value
    return key, parsed


def _write_outputs(result: ScenarioResult, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "events.jsonl").write_text(result.log.to_jsonl())
    (out_dir / "result.json").write_text(result.to_json() + "\n")
    if result.delay is not None:
        delay_text = result.delay.to_json() + "\n"
    else:
        delay_text = json.dumps({"error": "no_trip_found"}, indent=2) + "\n"
    (out_dir / "delay_report.json").write_text(delay_text)


def _summarize(result: ScenarioResult) -> str:
    lines = [f"{result.scenario}: {'PASS' if result.passed else 'FAIL'}"]
    if result.verdict_culprit:
        lines.append(
            f"  verdict: {result.verdict_culprit} "
            f"(evidence at ports {', '.join(map(str, result.verdict_evidence_ports))})"
        )
    lines.append(
        f"  alerts: {result.alerts}, injected: {result.injected} "
        f"({result.injected_alerted} alerted), breaker trips: {result.breaker_trips}"
    )
    if result.disabled_ports:
        parts = [
            f"{node} p{','.join(map(str, ports))}"
            for node, ports in sorted(result.disabled_ports.items())
        ]
        lines.append(f"  disabled: {'; '.join(parts)}")
    if result.delay is not None:
        lines.append(f"  fault-to-trip: {result.delay.total_us / 1000:.3f} ms")
    for reason in result.reasons:
        lines.append(f"  reason: {reason}")
    return "\n".join(lines)


def _run_one(name: str, overrides: dict, out_root: Path, nested: bool) -> ScenarioResult:
    spec = load_scenario(name, overrides)
    result = run_scenario(spec)
    out_dir = out_root / spec.id if nested else out_root
    _write_outputs(result, out_dir)
    return result


def cmd_run(args: argparse.Namespace) -> int:
    try:
        overrides = dict(_parse_override(o) for o in args.override or [])
        if args.config:
            names = [args.config]
        elif args.scenario == "all":
            names = list(SCENARIO_IDS)
        elif args.scenario:
            names = [s.strip() for s in args.scenario.split(",") if s.strip()]
        else:
            raise ScenarioError("nothing to run; pass --scenario or --config")
        out_root = Path(args.out)
        nested = len(names) > 1

        results: list[ScenarioResult] = []
        if args.jobs > 1 and len(names) > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
                futures = [
                    pool.submit(_run_one, name, overrides, out_root, nested) for name in names
                ]
                results = [f.result() for f in futures]
        else:
            results = [_run_one(name, overrides, out_root, nested) for name in names]
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    for result in results:
        print(_summarize(result))
    return EXIT_OK if all(r.passed for r in results) else EXIT_SCENARIO_FAILED


def cmd_replay(args: argparse.Namespace) -> int:
    path = Path(args.log)
    try:
        text = path.read_text()
    except OSError as exc:
        print(f"error: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        event_log = EventLog.from_jsonl(text)
    except (ValueError, KeyError) as exc:
        print(f"error: malformed log: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if not check_complete(event_log):
        print("error: log is truncated or missing its completion record", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    try:
        result = score(event_log)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    if args.out:
        _write_outputs(result, Path(args.out))
    print(_summarize(result))
    return EXIT_OK if result.passed else EXIT_SCENARIO_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridshield",
        description="Deterministic digital-substation attack/mitigation simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run scenario fixtures and write logs/reports")
    run_p.add_argument("--scenario", help="builtin id (baseline, attack1, attack2), "
                       "comma list, 'all', or a YAML path")
    run_p.add_argument("--config", help="path to a scenario YAML (alternative to --scenario)")
    run_p.add_argument("--out", default="out", help="output directory (default: ./out)")
    run_p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="config override, repeatable (e.g. t_ids=0, with_ids=true)")
    run_p.add_argument("--jobs", type=int, default=1, help="run scenarios concurrently")
    run_p.set_defaults(func=cmd_run)

    replay_p = sub.add_parser("replay", help="re-score a saved events.jsonl")
    replay_p.add_argument("log", help="path to events.jsonl")
    replay_p.add_argument("--out", help="write result/report files here")
    replay_p.set_defaults(func=cmd_replay)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=os.environ.get("GRIDSHIELD_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
