from __future__ import annotations

from dataclasses import asdict, dataclass, field

from bigmas.gateway import DEFAULT_MAX_TOKENS, DEFAULT_TEMPERATURE
from bigmas.graph import MAX_PATH_LENGTH

__all__ = ["RunConfig", "DEFAULT_CORRECTIONS"]

DEFAULT_CORRECTIONS = 3


@dataclass(frozen=True)
class RunConfig:
    """Budgets for one run: ``t_max`` steps, ``r`` corrections per step."""

    t_max: int = MAX_PATH_LENGTH
    r: int = DEFAULT_CORRECTIONS
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: dict = field(default_factory=lambda: dict(DEFAULT_MAX_TOKENS))
    seed: int = 0

    def __post_init__(self):
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.r < 1:
            raise ValueError("r must be >= 1")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        merged = dict(DEFAULT_MAX_TOKENS)
        merged.update(self.max_tokens)
        object.__setattr__(self, "max_tokens", merged)

    def to_dict(self) -> dict:
        return asdict(self)
