from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer and schedule settings; ``early_stop_patience`` applies to the regressor only."""

    learning_rate: float = 1e-4
    epochs: int = 3
    dropout: float = 0.2
    batch_size: int = 16
    seed: int = 0
    early_stop_patience: int = 5
    min_delta: float = 1e-4

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1 or self.early_stop_patience < 1:
            raise ValueError("epochs, batch_size and early_stop_patience must be at least 1")
        if self.min_delta < 0:
            raise ValueError("min_delta must be non-negative")

    @classmethod
    def for_kind(cls, kind: str, **overrides) -> TrainConfig:
        """Defaults for a model kind: 3 epochs at dropout 0.2 for classifiers, up to 100 at 0.1 for the regressor."""
        base = cls(epochs=100, dropout=0.1) if kind == "intensity_reg" else cls()
        return replace(base, **overrides)

    @classmethod
    def from_dict(cls, d: Mapping, kind: str | None = None) -> TrainConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown train config keys: {sorted(unknown)}")
        return cls.for_kind(kind or "", **d)

    def to_dict(self) -> dict:
        return asdict(self)
