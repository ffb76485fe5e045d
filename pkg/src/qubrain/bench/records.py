from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .metrics import Metrics

RUN_SCHEMA = "qubrain.run/1"


@dataclass
class RunRecord:
    model_id: str
    seed: int
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    metrics: Metrics | None = None
    duration_s: float = 0.0
    epochs: int = 0
    phases: list = field(default_factory=list)
    lr: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add_epoch(self, train_loss: float, val_loss: float, lr: float, phase: str = "") -> None:
        self.train_loss.append(float(train_loss))
        self.val_loss.append(float(val_loss))
        self.lr.append(float(lr))
        self.phases.append(phase)
        self.epochs = len(self.train_loss)

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        d["schema"] = RUN_SCHEMA
        if not include_timing:
            d.pop("duration_s")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = {k: v for k, v in d.items() if k != "schema"}
        metrics = d.pop("metrics", None)
        rec = cls(**d)
        rec.metrics = Metrics(**metrics) if metrics else None
        return rec

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1))

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_dict(json.loads(Path(path).read_text()))
