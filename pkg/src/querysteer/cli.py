"""Command-line entry points: benchmark runs, report generation, HTTP service."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from querysteer.bench import (
    BenchError,
    ExperimentSpec,
    RunRecord,
    report,
    run,
    write_results,
)


def records_from_jsonl(path) -> list:
    records = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        records.append(
            RunRecord(
                spec_name=doc["spec"],
                strategy=doc["strategy"],
                seed=doc["seed"],
                iterations=doc["iterations"],
                times=[],
                status=doc["status"],
                samples_to_target=doc["samples_to_target"],
            )
        )
    return records


def cmd_bench(args) -> int:
    spec = ExperimentSpec.from_dict(json.loads(Path(args.spec).read_text()))
    if args.seeds:
        spec.seeds = [int(s) for s in args.seeds.split(",")]
        spec.validate()
    records = run(spec, parallelism=args.parallel)
    out = write_results(records, args.out, spec=spec)
    print(f"wrote {len(records)} run records to {out}")
    failed = [r for r in records if not r.iterations]
    if failed:
        for r in failed:
            print(f"run produced no iterations: {r.strategy} seed {r.seed}", file=sys.stderr)
        return 1
    return 0


def cmd_report(args) -> int:
    records = records_from_jsonl(args.records)
    summary = report(records)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"wrote summary to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from querysteer.service import create_app, load_manifest

    manifest = args.manifest or os.environ.get("QUERYSTEER_MANIFEST")
    if not manifest:
        print("serve needs --manifest or QUERYSTEER_MANIFEST", file=sys.stderr)
        return 2
    defaults = {}
    if args.defaults:
        defaults = json.loads(Path(args.defaults).read_text())
    app = create_app(load_manifest(manifest), defaults=defaults)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="querysteer",
        description="Interactive query steering: benchmarks and labeling service.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_bench = sub.add_parser("bench", help="run an experiment spec")
    p_bench.add_argument("--spec", required=True, help="experiment spec JSON path")
    p_bench.add_argument("--out", required=True, help="output directory")
    p_bench.add_argument("--parallel", type=int, default=1, help="seeds in parallel")
    p_bench.add_argument("--seeds", help="comma-separated seed override")
    p_bench.set_defaults(fn=cmd_bench)

    p_report = sub.add_parser("report", help="summarize a results.jsonl")
    p_report.add_argument("--records", required=True, help="results.jsonl path")
    p_report.add_argument("--out", required=True, help="summary JSON output path")
    p_report.set_defaults(fn=cmd_report)

    p_serve = sub.add_parser("serve", help="run the labeling HTTP service")
    p_serve.add_argument("--manifest", help="dataset manifest JSON path")
    p_serve.add_argument("--defaults", help="default session config JSON path")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8180)
    p_serve.set_defaults(fn=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (BenchError, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
