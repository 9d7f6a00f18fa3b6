"""Batch runner and metrics over (task, method, instance) cells.

``runs.jsonl`` holds one record per cell in cell order and contains no wall
times, so two runs with a scripted backend produce identical bytes. Wall
times go to a ``timings.jsonl`` sidecar. All metrics are a pure function of
the run records, so recomputing them from disk gives the in-memory result.
"""

from __future__ import annotations

import csv
import json
import math
import os
import statistics
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping

from bigmas.baselines import BASELINE_KINDS, BaselineConfig, run_baseline
from bigmas.config import RunConfig
from bigmas.executor import solve
from bigmas.gateway import Gateway, HttpGateway, ScriptedGateway, UsageLedger, load_script
from bigmas.graph import ROLE_CATEGORIES, classify_role
from bigmas.simulate import oracle_gateway
from bigmas.tasks import TASK_KINDS, TaskInstance, generate_instances, read_instances, verify
from bigmas.trace import dump_jsonl, write_trace

__all__ = [
    "SCHEMA_VERSION",
    "METHODS",
    "BIGMAS_PHASES",
    "ConfigError",
    "BenchConfig",
    "RunRecord",
    "GroupMetrics",
    "MetricsSummary",
    "run_cell",
    "run_benchmark",
    "compute_metrics",
    "load_records",
    "write_csvs",
    "make_gateway_factory",
]

SCHEMA_VERSION = 1
METHODS = ("bigmas",) + BASELINE_KINDS
BIGMAS_PHASES = ("design", "routing", "node_execution")
BACKENDS = ("oracle", "scripted", "http")


class ConfigError(ValueError):
    """Unusable benchmark configuration."""


@dataclass(frozen=True)
class BenchConfig:
    tasks: tuple[str, ...] = TASK_KINDS
    methods: tuple[str, ...] = METHODS
    count: int = 5
    seed: int = 0
    backend: Mapping[str, Any] = field(default_factory=lambda: {"kind": "oracle"})
    parallelism: int = 1
    t_max: int = 15
    r: int = 3
    temperature: float = 0.7
    out_dir: str = "bench_out"
    instances: Mapping[str, str] = field(default_factory=dict)  # task -> instance file
    save_traces: bool = False

    def __post_init__(self):
        for t in self.tasks:
            if t not in TASK_KINDS:
                raise ConfigError(f"unknown task {t!r}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if not self.tasks or not self.methods:
            raise ConfigError("tasks and methods must be non-empty")
        if self.count < 1 or self.parallelism < 1:
            raise ConfigError("count and parallelism must be >= 1")
        if self.backend.get("kind") not in BACKENDS:
            raise ConfigError(f"backend.kind must be one of {BACKENDS}")
        try:
            self.run_config
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def run_config(self) -> RunConfig:
        return RunConfig(t_max=self.t_max, r=self.r, temperature=self.temperature, seed=self.seed)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | os.PathLike = ".") -> "BenchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
        kwargs = dict(data)
        for key in ("tasks", "methods"):
            if key in kwargs:
                if isinstance(kwargs[key], str):
                    kwargs[key] = [kwargs[key]]
                kwargs[key] = tuple(kwargs[key])
        if isinstance(kwargs.get("backend"), str):
            kwargs["backend"] = {"kind": kwargs["backend"]}
        base = Path(base_dir)
        backend = dict(kwargs.get("backend", {"kind": "oracle"}))
        if "manifest" in backend:
            backend["manifest"] = str(base / backend["manifest"])
        kwargs["backend"] = backend
        if "instances" in kwargs:
            kwargs["instances"] = {t: str(base / p) for t, p in kwargs["instances"].items()}
        if "out_dir" in kwargs:
            kwargs["out_dir"] = str(base / kwargs["out_dir"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | os.PathLike) -> "BenchConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data, Path(path).parent)


@dataclass
class RunRecord:
    task: str
    method: str
    instance_id: str
    answer: str
    verdict: dict
    ledger: dict
    termination: str | None = None
    steps: int = 0
    corrections: int = 0
    routing_decisions: int = 0
    hops: int = 0
    nodes: int | None = None
    edges: int | None = None
    roles: list[str] = field(default_factory=list)
    design_source: str | None = None
    calls: int = 0
    error: str | None = None

    @property
    def correct(self) -> bool:
        return bool(self.verdict["correct"])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunRecord":
        return cls(**data)


GatewayFactory = Callable[[TaskInstance, str], Gateway]


def make_gateway_factory(backend: Mapping[str, Any]) -> GatewayFactory:
    """Per-cell gateway builder; scripted and oracle gateways are fresh per cell."""
    kind = backend.get("kind")
    if kind == "oracle":
        broken = bool(backend.get("broken_generator", False))
        return lambda inst, method: oracle_gateway(inst, broken_generator=broken)
    if kind == "scripted":
        if "manifest" not in backend:
            raise ConfigError("scripted backend needs a 'manifest' path")
        script = load_script(backend["manifest"])
        return lambda inst, method: ScriptedGateway(script)
    if kind == "http":
        shared = HttpGateway(
            model=backend.get("model", "gpt-4o-mini"),
            base_url=backend.get("base_url"),
            timeout=float(backend.get("timeout", 60.0)),
        )
        return lambda inst, method: shared
    raise ConfigError(f"unknown backend {kind!r}")


def run_cell(
    instance: TaskInstance, method: str, gateway: Gateway, config: BenchConfig | None = None
) -> tuple[RunRecord, list[dict]]:
    """One (instance, method) cell: the record and the full trace."""
    config = config or BenchConfig()
    if method == "bigmas":
        res = solve(instance, gateway, config.run_config)
        graph = res.design.graph
        verdict = verify(instance, res.answer)
        record = RunRecord(
            task=instance.kind,
            method=method,
            instance_id=instance.id,
            answer=res.answer,
            verdict=_verdict_dict(verdict),
            ledger=res.ledger.to_dict(),
            termination=res.termination,
            steps=res.steps,
            corrections=res.corrections,
            routing_decisions=res.routing_decisions,
            hops=res.hops,
            nodes=len(graph.nodes),
            edges=len(graph.edges),
            roles=[classify_role(n.role) for n in graph.nodes.values()],
            design_source=res.design_source,
            calls=res.ledger.total_calls,
        )
        return record, res.trace
    bcfg = BaselineConfig(method, temperature=config.temperature)
    res = run_baseline(instance, gateway, bcfg)
    verdict = verify(instance, res.answer)
    record = RunRecord(
        task=instance.kind,
        method=method,
        instance_id=instance.id,
        answer=res.answer,
        verdict=_verdict_dict(verdict),
        ledger=res.ledger.to_dict(),
        steps=res.turns,
        calls=res.n_calls,
        error=res.error,
    )
    return record, res.trace(instance, bcfg)


def _verdict_dict(verdict) -> dict:
    return {"correct": verdict.correct, "reason": verdict.reason, "detail": verdict.detail}


def _instances(config: BenchConfig, task: str) -> list[TaskInstance]:
    if task in config.instances:
        try:
            return read_instances(config.instances[task])[: config.count]
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load instances for {task}: {exc}") from exc
    return generate_instances(task, config.count, config.seed)


def run_benchmark(
    config: BenchConfig | str | os.PathLike, gateway_factory: GatewayFactory | None = None
) -> list[RunRecord]:
    """Run every (task, instance, method) cell, appending records as they finish.

    Records are appended in cell order through one writer, each line flushed,
    so an interrupted run leaves a prefix of valid lines.
    """
    if not isinstance(config, BenchConfig):
        config = BenchConfig.load(config)
    factory = gateway_factory or make_gateway_factory(config.backend)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config.save_traces:
        (out / "traces").mkdir(exist_ok=True)
    cells = [(inst, m) for task in config.tasks for inst in _instances(config, task) for m in config.methods]

    def work(cell):
        inst, method = cell
        start = time.perf_counter()
        record, trace = run_cell(inst, method, factory(inst, method), config)
        return record, trace, time.perf_counter() - start

    records: list[RunRecord] = []
    lock = threading.Lock()
    with open(out / "runs.jsonl", "w", encoding="utf-8") as runs, open(
        out / "timings.jsonl", "w", encoding="utf-8"
    ) as timings, ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        # map() yields in submission order, which keeps runs.jsonl ordered
        for record, trace, wall in pool.map(work, cells):
            with lock:
                runs.write(dump_jsonl(record.to_dict()) + "\n")
                runs.flush()
                timings.write(
                    dump_jsonl({"task": record.task, "method": record.method, "instance_id": record.instance_id, "wall_s": round(wall, 6)})
                    + "\n"
                )
                timings.flush()
            if config.save_traces:
                write_trace(out / "traces" / f"{record.instance_id}-{record.method}.jsonl", trace)
            records.append(record)
    write_csvs(compute_metrics(records), records, out)
    return records


def load_records(path: str | os.PathLike) -> list[RunRecord]:
    with open(path, encoding="utf-8") as fh:
        return [RunRecord.from_dict(json.loads(line)) for line in fh if line.strip()]


@dataclass
class Stats:
    mean: float
    sd: float  # population sd
    min: float
    max: float
    n: int

    @classmethod
    def of(cls, values: Iterable[float]) -> "Stats | None":
        values = list(values)
        if not values:
            return None
        return cls(statistics.fmean(values), statistics.pstdev(values), min(values), max(values), len(values))


@dataclass
class RoutingSplit:
    n: int
    mean: float
    max: int
    ci_low: float
    ci_high: float

    @classmethod
    def of(cls, values: list[int]) -> "RoutingSplit | None":
        if not values:
            return None
        m = statistics.fmean(values)
        # normal approximation; standard error from the sample sd
        half = 1.96 * statistics.stdev(values) / math.sqrt(len(values)) if len(values) > 1 else 0.0
        return cls(len(values), m, max(values), m - half, m + half)


@dataclass
class GroupMetrics:
    task: str
    method: str
    n: int
    correct: int
    accuracy: float
    nodes: Stats | None = None
    edges: Stats | None = None
    roles: dict[str, float] = field(default_factory=dict)
    role_counts: dict[str, int] = field(default_factory=dict)
    routing_all: Stats | None = None
    routing_correct: RoutingSplit | None = None
    routing_incorrect: RoutingSplit | None = None
    tokens: dict[str, dict[str, int]] = field(default_factory=dict)
    token_shares: dict[str, float] = field(default_factory=dict)
    terminations: dict[str, int] = field(default_factory=dict)


@dataclass
class MetricsSummary:
    groups: dict[tuple[str, str], GroupMetrics]

    def __getitem__(self, key: tuple[str, str]) -> GroupMetrics:
        return self.groups[key]

    def to_dict(self) -> dict:
        return {f"{t}/{m}": asdict(g) for (t, m), g in self.groups.items()}


def _group(task: str, method: str, recs: list[RunRecord]) -> GroupMetrics:
    correct = sum(r.correct for r in recs)
    g = GroupMetrics(task, method, len(recs), correct, 100.0 * correct / len(recs))
    designed = [r for r in recs if r.nodes is not None]
    g.nodes = Stats.of(r.nodes for r in designed)
    g.edges = Stats.of(r.edges for r in designed)
    counts = Counter(role for r in designed for role in r.roles)
    total_roles = sum(counts.values())
    g.role_counts = {c: counts.get(c, 0) for c in ROLE_CATEGORIES}
    if total_roles:
        g.roles = {c: 100.0 * counts.get(c, 0) / total_roles for c in ROLE_CATEGORIES}
    if method == "bigmas":
        g.routing_all = Stats.of(r.routing_decisions for r in recs)
        g.routing_correct = RoutingSplit.of([r.routing_decisions for r in recs if r.correct])
        g.routing_incorrect = RoutingSplit.of([r.routing_decisions for r in recs if not r.correct])
        g.terminations = dict(sorted(Counter(r.termination for r in recs).items()))
    tokens: dict[str, dict[str, int]] = {}
    for r in recs:
        for phase, row in r.ledger.items():
            acc = tokens.setdefault(phase, {"calls": 0, "prompt_tokens": 0, "completion_tokens": 0})
            for k in acc:
                acc[k] += row[k]
    g.tokens = dict(sorted(tokens.items()))
    phases = BIGMAS_PHASES if method == "bigmas" else ("baseline",)
    totals = {p: tokens.get(p, {}).get("prompt_tokens", 0) + tokens.get(p, {}).get("completion_tokens", 0) for p in phases}
    denom = sum(totals.values())
    if denom:
        g.token_shares = {p: 100.0 * v / denom for p, v in totals.items()}
    return g


def compute_metrics(records: Iterable[RunRecord]) -> MetricsSummary:
    """Per (task, method) metrics plus pooled ``all`` rows per method."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    by_key: dict[tuple[str, str], list[RunRecord]] = {}
    for r in records:
        by_key.setdefault((r.task, r.method), []).append(r)
        by_key.setdefault(("all", r.method), []).append(r)
    return MetricsSummary({key: _group(*key, recs) for key, recs in sorted(by_key.items())})


def _summary_rows(g: GroupMetrics) -> Iterable[tuple[str, float]]:
    yield "n", g.n
    yield "correct", g.correct
    yield "accuracy_pct", g.accuracy
    for name in ("nodes", "edges", "routing_all"):
        s = getattr(g, name)
        if s is not None:
            for stat in ("mean", "sd", "min", "max"):
                yield f"{name}_{stat}", getattr(s, stat)
    for name in ("routing_correct", "routing_incorrect"):
        s = getattr(g, name)
        if s is not None:
            for stat in ("n", "mean", "max", "ci_low", "ci_high"):
                yield f"{name}_{stat}", getattr(s, stat)
    for cat, pct in g.roles.items():
        yield f"role_pct_{cat}", pct
    for phase, pct in g.token_shares.items():
        yield f"token_share_pct_{phase}", pct
    for term, n in g.terminations.items():
        yield f"termination_{term}", n


def _write_csv(path: Path, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def _fmt(value: Any) -> Any:
    return round(value, 6) if isinstance(value, float) else value


def write_csvs(metrics: MetricsSummary, records: list[RunRecord], out_dir: str | os.PathLike) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    groups = metrics.groups.values()
    _write_csv(
        out / "summary.csv",
        ["schema_version", "task", "method", "metric", "value"],
        ((SCHEMA_VERSION, g.task, g.method, k, _fmt(v)) for g in groups for k, v in _summary_rows(g)),
    )
    _write_csv(
        out / "topology.csv",
        ["task", "method", "instance_id", "nodes", "edges", "design_source"],
        ((r.task, r.method, r.instance_id, r.nodes, r.edges, r.design_source) for r in records if r.nodes is not None),
    )
    _write_csv(
        out / "roles.csv",
        ["task", "method", "category", "count", "percent"],
        (
            (g.task, g.method, c, g.role_counts[c], _fmt(g.roles[c]))
            for g in groups
            if g.roles
            for c in ROLE_CATEGORIES
        ),
    )
    _write_csv(
        out / "routing.csv",
        ["task", "method", "instance_id", "correct", "routing_decisions", "hops", "steps", "termination"],
        (
            (r.task, r.method, r.instance_id, int(r.correct), r.routing_decisions, r.hops, r.steps, r.termination)
            for r in records
            if r.method == "bigmas"
        ),
    )
    _write_csv(
        out / "tokens.csv",
        ["task", "method", "phase", "calls", "prompt_tokens", "completion_tokens", "share_pct"],
        (
            (g.task, g.method, phase, row["calls"], row["prompt_tokens"], row["completion_tokens"], _fmt(g.token_shares.get(phase, 0.0)))
            for g in groups
            for phase, row in g.tokens.items()
        ),
    )


def ledger_of(record: RunRecord) -> UsageLedger:
    return UsageLedger(record.ledger)
