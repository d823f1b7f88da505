from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class CovertResult:
    """Probability that no alarm fires during the transmission, given none before it."""

    value: float
    test: str
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"covert probability {self.value} outside [0, 1]")
