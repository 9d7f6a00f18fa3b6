"""One test per acceptance criterion; each records a PASS/FAIL/SKIP line.

Tolerances are pinned here: exact verdicts and counts everywhere, token
shares summing to 100 within 0.1, and the wall-clock limits of 120 s
(protocol suite) and 300 s (oracle cross-checks).
"""

import json
import os
import random
import re
import time
from fractions import Fraction
from itertools import product

import pytest

from bigmas.baselines import BaselineConfig, run_baseline
from bigmas.bench import BenchConfig, compute_metrics, run_benchmark
from bigmas.config import RunConfig
from bigmas.designer import DesignOutput, default_design
from bigmas.executor import fallback_resolve, run, solve
from bigmas.gateway import ScriptedGateway
from bigmas.graph import AgentGraph, NodeSpec
from bigmas.instructions import parse_instruction
from bigmas.simulate import oracle_gateway, random_design, random_protocol_responder
from bigmas.tasks import generate_instances, verify
from bigmas.tasks.game24 import solvable_pairwise, solve as solve24
from bigmas.tasks.sixfives import LOW, HIGH, solve as solve_fives
from bigmas.tasks.tol import bfs, enumerate_states, pairs_by_length
from bigmas.trace import read_trace, replay_matches, trace_usage
from bigmas.workspace import NO_ANSWER, WriteInstruction, init_workspace
from conftest import ACCEPTANCE, game24, sixfives
from parser_corpus import CASES
from protocol_checks import protocol_violations

PROTOCOL_RUNS = 1000
PROTOCOL_SECONDS = 120
ORACLE_SECONDS = 300
SHARE_TOLERANCE = 0.1
FUZZ_CASES = 100_000


def report(n: int, ok: bool, detail: str, skipped: bool = False) -> None:
    status = "SKIP" if skipped else ("PASS" if ok else "FAIL")
    ACCEPTANCE[n] = f"criterion {n}: {status} ({detail})"
    print(ACCEPTANCE[n])
    if skipped:
        pytest.skip(detail)
    assert ok, detail


def w(path, action, payload):
    return json.dumps({"target_path": path, "action": action, "payload": payload})


def test_criterion_1_protocol_invariants():
    instance = generate_instances("game24", 1, 0)[0]
    start = time.perf_counter()
    violations = []
    terminations = set()
    for seed in range(PROTOCOL_RUNS):
        rng = random.Random(seed)
        config = RunConfig(t_max=rng.randint(1, 15), r=rng.randint(1, 4))
        gateway = ScriptedGateway(responder=random_protocol_responder(rng, rng.random()))
        res = run(instance, random_design(rng), config, gateway)
        terminations.add(res.termination)
        violations += [f"seed {seed}: {v}" for v in protocol_violations(res, config)]
    elapsed = time.perf_counter() - start
    ok = not violations and elapsed < PROTOCOL_SECONDS and len(terminations) == 3
    report(1, ok, f"{PROTOCOL_RUNS} runs, {len(violations)} violations, terminations {sorted(terminations)}, {elapsed:.1f}s")


def test_criterion_2_algorithm_conformance():
    inst = game24(4, 9, 10, 13)
    good = ["(13-9)*(10-4)"]
    gen = w("candidates", "append", {"expr": good[0]})
    val = w("validated", "update", {"candidate": good[0], "status": "verified"})
    ans = w("answer", "replace", good[0])
    bad = w("nowhere", "append", {"expr": "1"})
    checks = []

    happy = run(inst, default_design("game24"), RunConfig(), ScriptedGateway({"node_execution": [gen, val, ans]}))
    checks.append(("happy", (happy.termination, happy.steps, happy.corrections), ("sink", 3, 0), happy))

    failing = run(inst, default_design("game24"), RunConfig(r=3), ScriptedGateway({"node_execution": [bad] * 4 + [ans]}))
    first = failing.history[0]
    checks.append(
        ("r-exhaustion", (failing.termination, first.corrections, first.next), ("node-failure-to-sink", 3, "formatter"), failing)
    )

    nodes = {"loop": NodeSpec("loop", "refiner"), "out": NodeSpec("out", "formatter")}
    cyclic = DesignOutput(AgentGraph(nodes, (("loop", "loop"), ("loop", "out")), "loop", "out"), {"candidates": []}, "")
    gw = ScriptedGateway({"node_execution": [w("candidates", "append", {"expr": "5*5-5"})] * 15, "routing": ["loop"] * 15})
    looped = run(inst, cyclic, RunConfig(t_max=15), gw)
    checks.append(
        ("budget", (looped.termination, looped.steps, looped.fallback is not None), ("budget-exhausted", 15, True), looped)
    )

    failures = [f"{name}: got {got}" for name, got, want, _ in checks if got != want]
    failures += [f"{name}: replay mismatch" for name, _, _, res in checks if not replay_matches(res.trace)]
    report(2, not failures, "; ".join(failures) or "three examples reproduce terminations and step counts; replays identical")


def _game24_truth(expr: str, numbers) -> bool:
    """Independent check: Fraction evaluation through Python plus a literal count."""
    if sorted(int(x) for x in re.findall(r"\d+", expr)) != sorted(numbers):
        return False
    try:
        return eval(re.sub(r"(\d+)", r"Fraction(\1)", expr), {"Fraction": Fraction}) == 24
    except ZeroDivisionError:
        return False


def test_criterion_3_oracle_cross_checks():
    start = time.perf_counter()
    problems = []
    states = enumerate_states()
    if len(states) != 36:
        problems.append(f"{len(states)} ToL states")
    if any(set(bfs(s)) != states for s in states):
        problems.append("ToL graph not connected")
    lengths = set(pairs_by_length())
    generated = {i.target["optimal_length"] for i in generate_instances("tol", 8, 0)}
    if not set(range(1, 9)) <= lengths or generated != set(range(1, 9)):
        problems.append(f"ToL lengths {sorted(lengths)} / generated {sorted(generated)}")
    disagree = [n for n in product(range(1, 7), repeat=4) if (solve24(n) is not None) != solvable_pairwise(n)]
    if disagree:
        problems.append(f"Game24 oracles disagree on {len(disagree)} tuples, e.g. {disagree[0]}")
    solved = {t: solve_fives(t) for t in range(LOW, HIGH + 1)}
    found = {t: s for t, s in solved.items() if s is not None}
    unverified = [t for t, s in found.items() if not verify(sixfives(t), s).correct]
    coverage = len(found) / (HIGH - LOW + 1)
    if coverage < 0.9 or unverified:
        problems.append(f"Six Fives coverage {coverage:.0%}, unverified {unverified}")
    elapsed = time.perf_counter() - start
    if elapsed >= ORACLE_SECONDS:
        problems.append(f"{elapsed:.0f}s")
    report(3, not problems, "; ".join(problems) or f"36 states, lengths 1..8, 1296 tuples agree, Six Fives {coverage:.0%}, {elapsed:.1f}s")


def _mutate_game24(inst, rng, kind):
    sol = inst.oracle["solution"]
    numbers = inst.input["numbers"]
    if kind == "multiset":
        lits = list(re.finditer(r"\d+", sol))
        m = rng.choice(lits)
        new = rng.choice([n for n in range(1, 14) if n != int(m.group())])
        return sol[: m.start()] + str(new) + sol[m.end() :]
    ops = [m.start() for m in re.finditer(r"[+\-*/]", sol)]
    for _ in range(50):
        pos = rng.choice(ops)
        cand = sol[:pos] + rng.choice([o for o in "+-*/" if o != sol[pos]]) + sol[pos + 1 :]
        if not _game24_truth(cand, numbers):
            return cand
    return f"({sol})*(1+{numbers[0]}-{numbers[0]})"  # still a multiset violation


def test_criterion_4_verifier_exactness():
    spec_examples = [
        (game24(4, 9, 10, 13), "(13-9)*(10-4)", True),
        (sixfives(30), "5+5+5+5+5+5", True),
        (sixfives(60), "55+5", False),
        (game24(4, 9, 10, 13), "(12-9)*(10-4)", False),
    ]
    errors = [f"example {a!r}" for inst, a, want in spec_examples if verify(inst, a).correct != want]
    reasons = (verify(sixfives(60), "55+5").detail, verify(game24(4, 9, 10, 13), "(12-9)*(10-4)").detail)
    if "digit-count 3 ≠ 6" not in reasons[0] or "literal 12 not in input multiset" not in reasons[1]:
        errors.append(f"reasons {reasons}")

    rng = random.Random(4)
    g24 = generate_instances("game24", 100, 11)
    fives = generate_instances("sixfives", 100, 11)
    positives = [(i, i.oracle["solution"]) for i in g24 + fives]
    negatives = []
    for k, inst in enumerate(g24):
        negatives.append((inst, _mutate_game24(inst, rng, "multiset" if k % 2 else "value")))
    for k, inst in enumerate(fives):
        sol = inst.oracle["solution"]
        if k % 2:
            negatives.append((inst, rng.choice([f"{sol}+5-5", sol.replace("5", "55", 1), f"({sol})*5/5"])))
        else:
            shifted = sixfives(inst.target + rng.choice([-3, -2, -1, 1, 2, 3]))
            negatives.append((shifted, sol))
    false_rejects = [a for i, a in positives if not verify(i, a).correct]
    false_accepts = [a for i, a in negatives if verify(i, a).correct]
    # the independent game24 check agrees with the verifier on every case
    disagreements = [a for i, a in positives[:100] + negatives[:100] if _game24_truth(a, i.input["numbers"]) != verify(i, a).correct]
    errors += [f"false rejects {false_rejects[:3]}"] * bool(false_rejects)
    errors += [f"false accepts {false_accepts[:3]}"] * bool(false_accepts)
    errors += [f"independent check disagrees on {disagreements[:3]}"] * bool(disagreements)
    ok = not errors and len(positives) == 200 and len(negatives) == 200
    report(4, ok, "; ".join(errors) or "4 examples, 200 positives accepted, 200 mutated negatives rejected")


def test_criterion_5_scripted_accuracy():
    problems = []
    counts = {}
    for task in ("game24", "sixfives", "tol"):
        insts = generate_instances(task, 20, 5)
        good = [solve(i, oracle_gateway(i)) for i in insts]
        broken = [solve(i, oracle_gateway(i, broken_generator=True)) for i in insts]
        acc = sum(verify(i, r.answer).correct for i, r in zip(insts, good)) / 20
        acc_broken = sum(verify(i, r.answer).correct for i, r in zip(insts, broken)) / 20
        counts[task] = (acc, acc_broken)
        if acc != 1.0 or acc_broken != 0.0:
            problems.append(f"{task}: {acc:.0%} / broken {acc_broken:.0%}")
        if any(r.design_source != "model" or len(r.design.graph.nodes) != 3 for r in good):
            problems.append(f"{task}: default design not used")
        if any(r.termination != "node-failure-to-sink" or r.fallback is None for r in broken):
            problems.append(f"{task}: broken runs did not fail to sink with fallback")
    inst = game24(4, 9, 10, 13)
    ws = init_workspace(inst, {"candidates": [{"expr": "1+1"}, {"expr": "(13-9)*(10-4)"}], "validated": {}})
    _, out = fallback_resolve(ws, [], lambda a: verify(inst, a).correct)
    if (out.answer, out.source) != ("(13-9)*(10-4)", "verified"):
        problems.append(f"fallback priority picked {out.answer!r}")
    empty_ws, empty = fallback_resolve(init_workspace(inst, {}), [], lambda a: True)
    if empty_ws.ans != NO_ANSWER:
        problems.append("empty fallback did not write the marker")
    report(5, not problems, "; ".join(problems) or "oracle agents 100% x 3 tasks, broken generator 0% via sink and fallback")


def _random_instruction(rng):
    seg = lambda: "".join(rng.choice("abcdefgh_") for _ in range(rng.randint(1, 6)))
    leaf = lambda: rng.choice([rng.randint(-50, 50), seg(), [rng.randint(0, 3), seg()], {seg(): rng.randint(0, 9)}])
    return WriteInstruction(tuple(seg() for _ in range(rng.randint(1, 3))), rng.choice(["append", "update", "replace"]), leaf())


def _render(instr, k, rng):
    body = instr.to_json()
    pre, post = rng.choice(["", "Sure.", "Here is my write:"]), rng.choice(["", "Done.", "Let me know."])
    return [
        body,
        f"{pre}\n```json\n{body}\n```\n{post}",
        f"{pre} {body} {post}",
        f"{pre}\ntarget_path: {'.'.join(instr.path)}\naction: {instr.action.upper()}\npayload: {json.dumps(instr.payload)}",
    ][k - 1]


def test_criterion_6_parser_robustness():
    problems = []
    accepted = [c for c in CASES if c[1] in (1, 2, 4)]
    wrong = [t for t, s, e in CASES if (parse_instruction(t).strategy_used, parse_instruction(t).instruction) != (s, e)]
    if len(accepted) < 30 or wrong:
        problems.append(f"{len(accepted)} strategy-1/2/4 cases, {len(wrong)} mismatches")
    rng = random.Random(6)
    for _ in range(2000):
        instr, k = _random_instruction(rng), rng.randint(1, 4)
        out = parse_instruction(_render(instr, k, rng))
        if not out.ok or out.strategy_used > k or out.instruction != instr:
            problems.append(f"monotonicity broken at strategy {k}: {instr}")
            break
    alphabet = '{}[]":,`\n\t target_path action payload append update replace answer 0123456789 ```json'
    crashes = 0
    for i in range(FUZZ_CASES):
        if i % 2:
            text = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 80)))
        else:
            chars = list(rng.choice(CASES)[0])
            for _ in range(rng.randint(1, 6)):
                pos = rng.randrange(len(chars) + 1)
                if rng.random() < 0.5 and chars:
                    del chars[min(pos, len(chars) - 1)]
                else:
                    chars.insert(pos, rng.choice(alphabet))
            text = "".join(chars)
        try:
            parse_instruction(text)
        except Exception:  # noqa: BLE001 - any exception is a crash here
            crashes += 1
    if crashes:
        problems.append(f"{crashes} crashes in fuzz")
    report(6, not problems, "; ".join(problems) or f"{len(accepted)} pinned strategy-1/2/4 cases of {len(CASES)}, monotone, {FUZZ_CASES} fuzz cases, 0 crashes")


def test_criterion_7_determinism_and_accounting(tmp_path):
    manifest = tmp_path / "m.jsonl"
    entries = [
        ("design", "no design"),
        ("node_execution", w("candidates", "append", {"expr": "6*4"})),
        ("node_execution", "junk"),
        ("node_execution", w("validated", "update", {"ok": 1})),
        ("node_execution", w("answer", "replace", "6*4")),
        ("baseline", "check[1+1]"),
        ("baseline", "ANSWER: 6*4"),
        ("baseline", "7"),
    ]
    manifest.write_text("".join(json.dumps({"phase": p, "response": r}) + "\n" for p, r in entries))
    outs = []
    for name in ("a", "b"):
        cfg = BenchConfig(
            tasks=("game24", "sixfives", "tol"),
            methods=("bigmas", "base", "react", "tot"),
            count=5,
            backend={"kind": "scripted", "manifest": str(manifest)},
            out_dir=str(tmp_path / name),
            save_traces=True,
            parallelism=1 if name == "a" else 4,
        )
        outs.append(run_benchmark(cfg))
    problems = []
    if (tmp_path / "a" / "runs.jsonl").read_bytes() != (tmp_path / "b" / "runs.jsonl").read_bytes():
        problems.append("runs.jsonl differs")
    for key, g in compute_metrics(outs[0]).groups.items():
        if g.token_shares and abs(sum(g.token_shares.values()) - 100.0) > SHARE_TOLERANCE:
            problems.append(f"{key} shares sum {sum(g.token_shares.values())}")
    leaks = []
    for r in outs[0]:
        trace = read_trace(tmp_path / "a" / "traces" / f"{r.instance_id}-{r.method}.jsonl")
        if trace_usage(trace).to_dict() != r.ledger or sum(v["calls"] for v in r.ledger.values()) != r.calls:
            leaks.append(f"{r.instance_id}/{r.method}")
    if leaks:
        problems.append(f"ledger mismatch on {leaks[:3]}")
    report(7, not problems, "; ".join(problems) or f"{len(outs[0])} records byte-identical, shares sum to 100, ledgers conserved")


def test_criterion_8_baseline_bounds():
    defaults = BaselineConfig()
    problems = []
    if (defaults.react_max_turns, defaults.tot_max_rounds, defaults.tot_n_thoughts) != (10, 4, 3):
        problems.append(f"defaults {defaults}")
    replies = ["check[1+1]", "finish[2]", "ANSWER: 3", "nonsense", "8", "Action: check[[[1,2]]]", ""]
    instances = generate_instances("game24", 5, 8) + generate_instances("tol", 5, 8)
    maxima = {}
    for kind, bound in (("base", 1), ("react", 10), ("tot", 24)):
        rng = random.Random(kind)
        calls = []
        for k in range(100):
            inst = instances[k % len(instances)]
            res = run_baseline(inst, ScriptedGateway(responder=lambda req: rng.choice(replies)), BaselineConfig(kind))
            calls.append(res.n_calls)
        maxima[kind] = max(calls)
        if max(calls) > bound or (kind == "base" and min(calls) != 1):
            problems.append(f"{kind} used {max(calls)} calls")
    report(8, not problems, "; ".join(problems) or f"max calls over 100 runs: {maxima}; defaults 10 / 4 / 3")


def test_criterion_9_live_smoke(tmp_path):
    base_url = os.environ.get("BIGMAS_LIVE_BASE_URL")
    if not base_url:
        report(9, True, "BIGMAS_LIVE_BASE_URL not set; live smoke test not run", skipped=True)
    from test_live import live_problems

    problems = [f"{task}: {p}" for task in ("game24", "sixfives", "tol") for p in live_problems(task, tmp_path)]
    report(9, not problems, "; ".join(problems) or "one live run per task, protocol clean, traces well-formed")
