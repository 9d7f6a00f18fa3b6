"""Command-line entry point: ``bigmas gen|oracle|run|bench|stats``.

Exit codes: 0 success, 1 task failure (``run --strict`` with an incorrect
answer), 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from bigmas.bench import BenchConfig, ConfigError, compute_metrics, load_records, make_gateway_factory, run_benchmark, run_cell, write_csvs
from bigmas.tasks import TASK_KINDS, generate_instances, oracle_solve, read_instances, write_instances
from bigmas.trace import write_trace

EXIT_OK, EXIT_TASK_FAILURE, EXIT_USAGE = 0, 1, 2
METHOD_CHOICES = ("bigmas", "base", "react", "tot")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(EXIT_USAGE, f"\n{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="bigmas", description="Graph-designed multi-agent runs over a shared workspace.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate seeded task instances as JSONL")
    g.add_argument("--task", required=True, choices=TASK_KINDS)
    g.add_argument("--count", required=True, type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, type=Path)

    o = sub.add_parser("oracle", help="annotate an instance file with oracle solutions")
    o.add_argument("--in", dest="inp", required=True, type=Path)
    o.add_argument("--out", type=Path, help="output file (default: rewrite the input)")

    r = sub.add_parser("run", help="run one method on one instance")
    r.add_argument("--task", required=True, choices=TASK_KINDS)
    r.add_argument("--instance", required=True, help="instance id, or 0-based index into --instances")
    r.add_argument("--instances", type=Path, help="instance JSONL (default: generate with --seed)")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--method", choices=METHOD_CHOICES, default="bigmas")
    r.add_argument("--backend", choices=("scripted", "oracle", "http"), default="oracle")
    r.add_argument("--manifest", type=Path, help="JSONL (phase, response) script for --backend scripted")
    r.add_argument("--model", default="gpt-4o-mini", help="model name for --backend http")
    r.add_argument("--base-url", help="endpoint for --backend http (default: $OPENAI_BASE_URL)")
    r.add_argument("--t-max", type=int, default=15)
    r.add_argument("--r", type=int, default=3)
    r.add_argument("--trace", type=Path, help="where to write the JSONL trace")
    r.add_argument("--strict", action="store_true", help="exit 1 when the answer is incorrect")

    b = sub.add_parser("bench", help="run a benchmark from a JSON config")
    b.add_argument("--config", required=True, type=Path)

    s = sub.add_parser("stats", help="recompute summaries from runs.jsonl")
    s.add_argument("--runs", required=True, type=Path)
    s.add_argument("--out", type=Path, help="directory for CSVs (default: next to --runs)")
    return p


def _pick_instance(args):
    key = args.instance
    if args.instances:
        pool = read_instances(args.instances)
    else:
        # generated ids end in the 0-based index, so generate just enough
        tail = key.rsplit("-", 1)[-1]
        if not tail.isdigit():
            raise ConfigError(f"instance {key!r} is neither an index nor a generated id")
        pool = generate_instances(args.task, int(tail) + 1, args.seed)
    for i, inst in enumerate(pool):
        if inst.id == key or str(i) == key:
            if inst.kind != args.task:
                raise ConfigError(f"instance {inst.id} is a {inst.kind} instance, not {args.task}")
            return inst
    raise ConfigError(f"instance {key!r} not found")


def _cmd_gen(args) -> int:
    if args.count < 1:
        raise ConfigError("--count must be >= 1")
    n = write_instances(args.out, generate_instances(args.task, args.count, args.seed))
    print(f"wrote {n} {args.task} instances to {args.out}")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    instances = read_instances(args.inp)
    annotated = [inst.with_oracle(oracle_solve(inst)) for inst in instances]
    out = args.out or args.inp
    write_instances(out, annotated)
    solved = sum(1 for inst in annotated if inst.oracle.get("solution") is not None)
    print(f"annotated {len(annotated)} instances ({solved} solved) -> {out}")
    return EXIT_OK


def _cmd_run(args) -> int:
    backend: dict = {"kind": args.backend}
    if args.backend == "scripted":
        if not args.manifest:
            raise ConfigError("--backend scripted needs --manifest")
        backend["manifest"] = str(args.manifest)
    elif args.backend == "http":
        backend.update(model=args.model, base_url=args.base_url)
    config = BenchConfig(tasks=(args.task,), methods=(args.method,), backend=backend, t_max=args.t_max, r=args.r)
    inst = _pick_instance(args)
    gateway = make_gateway_factory(backend)(inst, args.method)
    record, trace = run_cell(inst, args.method, gateway, config)
    trace_path = args.trace or Path(f"{inst.id}-{args.method}.trace.jsonl")
    write_trace(trace_path, trace)
    verdict = record.verdict
    print(f"answer: {record.answer}")
    print(f"verdict: {'correct' if verdict['correct'] else 'incorrect'} ({verdict['reason']})")
    if record.termination:
        print(f"termination: {record.termination} after {record.steps} steps")
    print(f"trace: {trace_path}")
    return EXIT_TASK_FAILURE if args.strict and not verdict["correct"] else EXIT_OK


def _print_accuracy(metrics) -> None:
    for (task, method), g in metrics.groups.items():
        print(f"{task:9s} {method:7s} n={g.n:4d} accuracy={g.accuracy:6.2f}%")


def _cmd_bench(args) -> int:
    config = BenchConfig.load(args.config)
    records = run_benchmark(config)
    print(f"{len(records)} records -> {Path(config.out_dir) / 'runs.jsonl'}")
    _print_accuracy(compute_metrics(records))
    return EXIT_OK


def _cmd_stats(args) -> int:
    try:
        records = load_records(args.runs)
    except (OSError, ValueError, TypeError) as exc:
        raise ConfigError(f"cannot read {args.runs}: {exc}") from exc
    if not records:
        raise ConfigError(f"{args.runs} holds no records")
    metrics = compute_metrics(records)
    write_csvs(metrics, records, args.out or args.runs.parent)
    _print_accuracy(metrics)
    return EXIT_OK


_COMMANDS = {"gen": _cmd_gen, "oracle": _cmd_oracle, "run": _cmd_run, "bench": _cmd_bench, "stats": _cmd_stats}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"bigmas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
