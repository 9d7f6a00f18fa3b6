import json

import pytest

from bigmas.cli import main
from bigmas.tasks import read_instances

W = '{"target_path": "candidates", "action": "append", "payload": {"moves": [[1, 2]]}}'


def test_gen_tol(tmp_path, capsys):
    out = tmp_path / "i.jsonl"
    assert main(["gen", "--task", "tol", "--count", "8", "--seed", "7", "--out", str(out)]) == 0
    insts = read_instances(out)
    assert len(out.read_text().splitlines()) == 8
    assert sorted(i.target["optimal_length"] for i in insts) == list(range(1, 9))


def test_oracle_annotates(tmp_path):
    out = tmp_path / "g.jsonl"
    main(["gen", "--task", "game24", "--count", "3", "--out", str(out)])
    lines = [json.loads(l) for l in out.read_text().splitlines()]
    for l in lines:
        l["oracle"] = {}
    out.write_text("".join(json.dumps(l) + "\n" for l in lines))
    assert main(["oracle", "--in", str(out)]) == 0
    assert all(i.oracle["solvable"] for i in read_instances(out))


def test_scripted_run_trace_is_deterministic(tmp_path):
    manifest = tmp_path / "m.jsonl"
    manifest.write_text(
        "".join(json.dumps({"phase": "node_execution", "response": r}) + "\n" for r in [W, "junk", W])
        + json.dumps({"phase": "design", "response": "none"}) + "\n"
    )
    traces = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.jsonl"
        rc = main(["run", "--task", "tol", "--instance", "0", "--backend", "scripted", "--manifest", str(manifest), "--trace", str(path)])
        assert rc == 0
        traces.append(path.read_bytes())
    assert traces[0] == traces[1] and traces[0]


def test_oracle_run_strict(tmp_path, capsys):
    rc = main(["run", "--task", "sixfives", "--instance", "sixfives-0-0002", "--strict", "--trace", str(tmp_path / "t.jsonl")])
    assert rc == 0
    assert "verdict: correct" in capsys.readouterr().out


def test_strict_failure_exit_code(tmp_path):
    manifest = tmp_path / "m.jsonl"
    manifest.write_text(json.dumps({"phase": "baseline", "response": "ANSWER: 1"}) + "\n")
    args = ["run", "--task", "game24", "--instance", "0", "--method", "base", "--backend", "scripted", "--manifest", str(manifest), "--trace", str(tmp_path / "t.jsonl")]
    assert main(args) == 0
    assert main(args + ["--strict"]) == 1


@pytest.mark.parametrize(
    "argv",
    [
        ["frobnicate"],
        [],
        ["gen", "--task", "chess", "--count", "1", "--out", "x"],
        ["gen", "--task", "tol", "--count", "0", "--out", "x"],
        ["run", "--task", "tol", "--instance", "0", "--backend", "scripted"],
        ["run", "--task", "tol", "--instance", "abc"],
        ["bench", "--config", "/nonexistent.json"],
        ["stats", "--runs", "/nonexistent.jsonl"],
    ],
)
def test_usage_errors_exit_2(argv, capsys):
    assert main(argv) == 2


def test_bench_and_stats(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"tasks": ["tol"], "methods": ["bigmas", "base"], "count": 2, "out_dir": "out"}))
    assert main(["bench", "--config", str(cfg)]) == 0
    summary = (tmp_path / "out" / "summary.csv").read_bytes()
    assert main(["stats", "--runs", str(tmp_path / "out" / "runs.jsonl"), "--out", str(tmp_path / "re")]) == 0
    assert (tmp_path / "re" / "summary.csv").read_bytes() == summary
    assert "accuracy=100.00%" in capsys.readouterr().out
