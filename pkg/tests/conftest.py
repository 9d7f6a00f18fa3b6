from __future__ import annotations

import pytest

from bigmas.tasks import TaskInstance


def game24(*numbers: int) -> TaskInstance:
    return TaskInstance("game24", {"numbers": list(numbers)}, 24, id="g24-" + "-".join(map(str, numbers)))


def sixfives(target: int) -> TaskInstance:
    return TaskInstance("sixfives", {"target": target}, target, id=f"s5-{target}")


def tol(initial, goal, optimal_length: int) -> TaskInstance:
    return TaskInstance(
        "tol",
        {"initial": initial, "goal": goal},
        {"goal": goal, "optimal_length": optimal_length},
        id="tol-fixture",
    )


@pytest.fixture
def g24_4_9_10_13() -> TaskInstance:
    return game24(4, 9, 10, 13)


# acceptance verdicts, printed once at the end of the session
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
