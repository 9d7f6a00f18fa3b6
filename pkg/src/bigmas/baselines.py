"""Comparison harnesses on the same gateway and verifiers: single call, ReAct, ToT.

ReAct's two actions are verifier-backed (``check[...]`` and ``finish[...]``)
since these tasks have no external tools. ToT is a greedy width-1 search:
each round proposes ``n`` thoughts, rates each with a separate call, and
carries the best-rated one forward.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from typing import Any

from bigmas.gateway import DEFAULT_TEMPERATURE, ChatRequest, Gateway, GatewayError, UsageLedger
from bigmas.tasks import TaskInstance, render_context, verify

__all__ = [
    "BASELINE_KINDS",
    "BaselineConfig",
    "BaselineResult",
    "run_base",
    "run_react",
    "run_tot",
    "run_baseline",
    "extract_tagged_answer",
    "parse_react_action",
    "parse_rating",
]

BASELINE_KINDS = ("base", "react", "tot")


@dataclass(frozen=True)
class BaselineConfig:
    kind: str = "base"
    react_max_turns: int = 10
    tot_max_rounds: int = 4
    tot_n_thoughts: int = 3
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline {self.kind!r}")
        for name in ("react_max_turns", "tot_max_rounds", "tot_n_thoughts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BaselineResult:
    kind: str
    answer: str
    ledger: UsageLedger
    calls: list[dict] = field(default_factory=list)
    error: str | None = None
    turns: int = 0  # ReAct turns or ToT rounds actually run

    @property
    def n_calls(self) -> int:
        return len(self.calls)

    def trace(self, instance: TaskInstance, config: BaselineConfig) -> list[dict]:
        """Header, one record per call, result; design and routing left empty."""
        records: list[dict] = [
            {
                "record": "header",
                "instance": instance.to_dict(),
                "design": None,
                "design_source": None,
                "config": config.to_dict(),
            }
        ]
        for i, call in enumerate(self.calls):
            records.append({"record": "step", "step": i, "node": self.kind, "routing": None, **call})
        records.append(
            {
                "record": "result",
                "answer": self.answer,
                "error": self.error,
                "turns": self.turns,
                "calls": self.n_calls,
                "ledger": self.ledger.to_dict(),
            }
        )
        return records


class _Session:
    """Gateway calls plus their bookkeeping for one baseline run."""

    def __init__(self, kind: str, instance: TaskInstance, gateway: Gateway, temperature: float):
        self.kind = kind
        self.instance = instance
        self.gateway = gateway
        self.temperature = temperature
        self.ledger = UsageLedger()
        self.calls: list[dict] = []

    def call(self, system: str, user: str, **meta: Any) -> str:
        req = ChatRequest(
            system,
            user,
            phase="baseline",
            temperature=self.temperature,
            meta={"baseline": self.kind, "instance": self.instance.to_dict(), **meta},
        )
        resp = self.gateway.complete(req)
        self.ledger.record("baseline", resp.usage)
        self.calls.append(
            {"label": meta.get("step", ""), "prompt": user, "response": resp.text, "usage": resp.usage.to_dict()}
        )
        return resp.text

    def result(self, answer: str, error: str | None = None, turns: int = 0) -> BaselineResult:
        return BaselineResult(self.kind, answer, self.ledger, self.calls, error, turns)


_ANSWER_TAG = re.compile(r"^\s*[*_`]*answer\s*[*_`]*\s*:\s*(.*?)\s*$", re.IGNORECASE)


def extract_tagged_answer(text: str) -> str:
    """Content of the last ``ANSWER:`` line, or the whole (stripped) text."""
    tagged = None
    for line in (text or "").splitlines():
        m = _ANSWER_TAG.match(line)
        if m:
            tagged = m.group(1)
    return (tagged if tagged is not None else text or "").strip().strip("`").strip()


_ANSWER_FORMAT = "Finish with a final line of the form\nANSWER: <your answer>"


def run_base(instance: TaskInstance, gateway: Gateway, config: BaselineConfig | None = None) -> BaselineResult:
    config = config or BaselineConfig("base")
    s = _Session("base", instance, gateway, config.temperature)
    system = "Solve the problem. Think as needed, then give the answer."
    try:
        text = s.call(system, f"{render_context(instance)}\n\n{_ANSWER_FORMAT}", step="answer")
    except GatewayError as exc:
        return s.result("", error=str(exc))
    return s.result(extract_tagged_answer(text), turns=1)


_ACTION = re.compile(r"\b(check|finish)\s*\[", re.IGNORECASE)


def parse_react_action(text: str) -> tuple[str, str] | None:
    """Last ``check[...]``/``finish[...]`` in ``text`` as ``(verb, argument)``.

    Brackets are matched by depth so move lists like ``[[1,2],[3,1]]`` survive.
    """
    matches = list(_ACTION.finditer(text or ""))
    if not matches:
        return None
    m = matches[-1]
    start = m.end()
    depth = 1
    for j in range(start, len(text)):
        if text[j] == "[":
            depth += 1
        elif text[j] == "]":
            depth -= 1
            if depth == 0:
                return m.group(1).lower(), text[start:j].strip()
    # unterminated: everything up to the last closing bracket, or to the end
    end = text.rfind("]")
    return m.group(1).lower(), text[start : end if end >= start else len(text)].strip()


_REACT_SYSTEM = """\
Solve the problem by interleaving Thought and Action lines. Available actions:
check[<candidate answer>]  runs the constraint checker and reports the result
finish[<final answer>]     submits the answer and ends the episode
Emit exactly one Action per reply."""


def run_react(instance: TaskInstance, gateway: Gateway, config: BaselineConfig | None = None) -> BaselineResult:
    config = config or BaselineConfig("react")
    s = _Session("react", instance, gateway, config.temperature)
    transcript: list[str] = []
    last_check = ""
    for turn in range(1, config.react_max_turns + 1):
        history = "\n".join(transcript) if transcript else "(none yet)"
        user = f"{render_context(instance)}\n\nPrevious turns:\n{history}\n\nTurn {turn} of {config.react_max_turns}."
        try:
            text = s.call(_REACT_SYSTEM, user, step="act", turn=turn, last_check=last_check)
        except GatewayError as exc:
            return s.result("", error=str(exc), turns=turn)
        action = parse_react_action(text)
        transcript.append(text.strip())
        if action is None:
            transcript.append("Observation: no valid action found; use check[...] or finish[...].")
            continue
        verb, arg = action
        if verb == "finish":
            return s.result(arg, turns=turn)
        last_check = arg
        verdict = verify(instance, arg)
        observation = "correct" if verdict.correct else f"incorrect ({verdict.reason}: {verdict.detail})"
        transcript.append(f"Observation: {observation}")
    return s.result(last_check, turns=config.react_max_turns)


_RATING = re.compile(r"(?<!\d)(10|[1-9])(?!\d)")


def parse_rating(text: str) -> int:
    """First integer in 1..10 found in ``text``; anything else rates 1."""
    m = _RATING.search(text or "")
    return int(m.group(1)) if m else 1


_TOT_PROPOSE = "Propose one promising next step towards the solution, or a full solution if you can."
_TOT_RATE = "Rate how likely the proposal leads to a correct solution, from 1 (hopeless) to 10 (certainly correct). Reply with the number."


def run_tot(instance: TaskInstance, gateway: Gateway, config: BaselineConfig | None = None) -> BaselineResult:
    config = config or BaselineConfig("tot")
    s = _Session("tot", instance, gateway, config.temperature)
    context = render_context(instance)
    frontier = ""
    best: tuple[int, str] | None = None  # (rating, answer); first-seen wins ties
    for rnd in range(1, config.tot_max_rounds + 1):
        partial = frontier or "(empty)"
        thoughts: list[str] = []
        try:
            for i in range(config.tot_n_thoughts):
                user = f"{context}\n\nCurrent partial solution:\n{partial}\n\n{_TOT_PROPOSE}\n{_ANSWER_FORMAT}"
                text = s.call("You explore a tree of thoughts.", user, step="propose", round=rnd, index=i)
                answer = extract_tagged_answer(text)
                if verify(instance, answer).correct:
                    return s.result(answer, turns=rnd)
                thoughts.append(text)
            ratings = []
            for i, thought in enumerate(thoughts):
                user = f"{context}\n\nProposal:\n{thought}\n\n{_TOT_RATE}"
                ratings.append(parse_rating(s.call("You evaluate proposals.", user, step="rate", round=rnd, index=i)))
        except GatewayError as exc:
            return s.result("", error=str(exc), turns=rnd)
        top = max(range(len(thoughts)), key=lambda i: (ratings[i], -i))
        frontier = thoughts[top]
        if best is None or ratings[top] > best[0]:
            best = (ratings[top], extract_tagged_answer(thoughts[top]))
    return s.result(best[1] if best else "", turns=config.tot_max_rounds)


_RUNNERS = {"base": run_base, "react": run_react, "tot": run_tot}


def run_baseline(instance: TaskInstance, gateway: Gateway, config: BaselineConfig) -> BaselineResult:
    return _RUNNERS[config.kind](instance, gateway, config)
