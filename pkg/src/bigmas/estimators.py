"""Estimator-style facade: ``fit`` validates, ``predict`` answers, ``score`` verifies.

Nothing is learned. ``fit`` only checks the instances and records the task
kinds seen, which keeps the objects usable with scikit-learn utilities such
as ``clone`` and ``get_params``.
"""

from __future__ import annotations

from typing import Any, Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from bigmas.baselines import BaselineConfig, run_baseline
from bigmas.config import RunConfig
from bigmas.executor import solve
from bigmas.gateway import Gateway, HttpGateway
from bigmas.simulate import oracle_gateway
from bigmas.tasks import TaskInstance, verify

__all__ = ["check_instances", "BigmasSolver", "BaseLLMSolver", "ReActSolver", "ToTSolver"]


def check_instances(X: Any) -> list[TaskInstance]:
    """Coerce ``X`` (task instances or their dict form) to a non-empty list."""
    if isinstance(X, (TaskInstance, Mapping, str, bytes)):
        raise TypeError("expected a sequence of task instances, not a single item")
    try:
        items = list(X)
    except TypeError:
        raise TypeError(f"expected a sequence of task instances, got {type(X).__name__}") from None
    if not items:
        raise ValueError("found an empty sequence of instances; at least one is required")
    out = []
    for i, item in enumerate(items):
        if isinstance(item, TaskInstance):
            out.append(item)
        elif isinstance(item, Mapping):
            try:
                out.append(TaskInstance.from_dict(item))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"item {i} is not a valid instance: {exc}") from exc
        else:
            raise TypeError(f"item {i} has type {type(item).__name__}, expected TaskInstance or dict")
    return out


class _SolverBase(BaseEstimator):
    def _gateway(self, instance: TaskInstance) -> Gateway:
        gw = self.gateway
        if gw is None or gw == "oracle":
            return oracle_gateway(instance)
        if gw == "http":
            return HttpGateway(model=self.model)
        if callable(gw) and not hasattr(gw, "complete"):
            return gw(instance)
        return gw

    def fit(self, X: Iterable, y: Any = None) -> "_SolverBase":
        instances = check_instances(X)
        self.task_kinds_ = sorted({inst.kind for inst in instances})
        self.n_instances_seen_ = len(instances)
        return self

    def _answer(self, instance: TaskInstance) -> str:
        raise NotImplementedError

    def predict(self, X: Iterable) -> np.ndarray:
        check_is_fitted(self, "n_instances_seen_")
        return np.array([self._answer(inst) for inst in check_instances(X)], dtype=object)

    def score(self, X: Iterable, y: Any = None) -> float:
        """Fraction judged correct by the task verifiers; ``y`` is ignored."""
        instances = check_instances(X)
        answers = self.predict(instances)
        return float(np.mean([verify(inst, ans).correct for inst, ans in zip(instances, answers)]))


class BigmasSolver(_SolverBase):
    """Design-then-execute multi-agent solver.

    ``gateway`` is ``"oracle"`` (offline simulated agents), ``"http"``, a
    gateway object, or a callable mapping an instance to a gateway.
    """

    def __init__(
        self,
        gateway: Any = "oracle",
        model: str = "gpt-4o-mini",
        t_max: int = 15,
        r: int = 3,
        temperature: float = 0.7,
        seed: int = 0,
    ):
        self.gateway = gateway
        self.model = model
        self.t_max = t_max
        self.r = r
        self.temperature = temperature
        self.seed = seed

    def _answer(self, instance: TaskInstance) -> str:
        config = RunConfig(t_max=self.t_max, r=self.r, temperature=self.temperature, seed=self.seed)
        return solve(instance, self._gateway(instance), config).answer


class _BaselineSolver(_SolverBase):
    _kind = "base"

    def __init__(self, gateway: Any = "oracle", model: str = "gpt-4o-mini", temperature: float = 0.7):
        self.gateway = gateway
        self.model = model
        self.temperature = temperature

    def _config(self) -> BaselineConfig:
        return BaselineConfig(self._kind, temperature=self.temperature)

    def _answer(self, instance: TaskInstance) -> str:
        return run_baseline(instance, self._gateway(instance), self._config()).answer


class BaseLLMSolver(_BaselineSolver):
    """Single direct model call."""


class ReActSolver(_BaselineSolver):
    _kind = "react"

    def __init__(self, gateway: Any = "oracle", model: str = "gpt-4o-mini", temperature: float = 0.7, max_turns: int = 10):
        super().__init__(gateway, model, temperature)
        self.max_turns = max_turns

    def _config(self) -> BaselineConfig:
        return BaselineConfig("react", react_max_turns=self.max_turns, temperature=self.temperature)


class ToTSolver(_BaselineSolver):
    _kind = "tot"

    def __init__(
        self,
        gateway: Any = "oracle",
        model: str = "gpt-4o-mini",
        temperature: float = 0.7,
        max_rounds: int = 4,
        n_thoughts: int = 3,
    ):
        super().__init__(gateway, model, temperature)
        self.max_rounds = max_rounds
        self.n_thoughts = n_thoughts

    def _config(self) -> BaselineConfig:
        return BaselineConfig(
            "tot", tot_max_rounds=self.max_rounds, tot_n_thoughts=self.n_thoughts, temperature=self.temperature
        )

