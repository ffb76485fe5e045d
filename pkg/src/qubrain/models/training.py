"""Per-model training configurations and the training loops."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, replace

import numpy as np

from .. import autodiff as ad
from ..autodiff import ContractError, Tensor
from ..bench.metrics import compute_metrics
from ..bench.records import RunRecord
from ..data import ConfigurationError, SplitData, Splits, batch_iterator
from ..nn import Module, Optimizer, PlateauScheduler, make_optimizer, spike_count_ce
from .base import Model
from .classical import ANN, LSTMModel, SNN
from .hybrid import HybridModel
from .quantum import QLSTMModel, QNN, QSNN


@dataclass
class TrainConfig:
    model_id: str
    optimizer: str
    lr: float
    batch_size: int
    epochs: int
    preprocessing: str
    scheduler_patience: int | None = None
    steps: int | None = None
    # second optimizer group (QSNN-QLSTM only)
    qlstm_optimizer: str | None = None
    qlstm_lr: float | None = None
    phase1_epochs: int = 0
    phase3_epochs: int = 0
    seed: int = 0

    def with_overrides(self, epochs: int | None = None, batch_size: int | None = None, seed: int | None = None) -> "TrainConfig":
        cfg = replace(self)
        if batch_size is not None:
            cfg.batch_size = batch_size
        if seed is not None:
            cfg.seed = seed
        if epochs is not None:
            cfg.epochs = epochs
            if cfg.phase1_epochs or cfg.phase3_epochs:
                cfg.phase1_epochs = (epochs + 1) // 2
                cfg.phase3_epochs = epochs // 2
        return cfg

    def to_dict(self) -> dict:
        return asdict(self)


REFERENCE_CONFIGS: dict[str, TrainConfig] = {
    "ann": TrainConfig("ann", "sgd", 1e-2, 128, 700, "standard"),
    "lstm": TrainConfig("lstm", "adam", 1e-3, 128, 350, "standard", scheduler_patience=30),
    "snn": TrainConfig("snn", "adam", 1e-3, 64, 350, "standard", steps=25),
    "qnn": TrainConfig("qnn", "rmsprop", 1e-2, 256, 70, "standard+l2"),
    "qlstm": TrainConfig("qlstm", "adam", 1e-2, 256, 100, "minmax", scheduler_patience=20),
    "qsnn": TrainConfig("qsnn", "sgd", 1e-3, 64, 80, "standard+l2", steps=25),
    "qsnn-qlstm": TrainConfig("qsnn-qlstm", "adam", 1e-2, 128, 40, "standard+l2", steps=25,
                              qlstm_optimizer="rmsprop", qlstm_lr=1e-2, phase1_epochs=20, phase3_epochs=20),
}

MODEL_CLASSES = {
    "ann": ANN, "snn": SNN, "lstm": LSTMModel, "qnn": QNN,
    "qsnn": QSNN, "qlstm": QLSTMModel, "qsnn-qlstm": HybridModel,
}

EXPECTED_PARAM_COUNTS = {
    "ann": 731, "snn": 3302, "lstm": 43457, "qnn": 108,
    "qsnn": 362, "qlstm": 6521, "qsnn-qlstm": 774,
}

MODEL_IDS = tuple(MODEL_CLASSES)


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent PCG64 streams for one run, split from a single seed."""
    names = ("init", "train")
    children = np.random.SeedSequence(seed).spawn(len(names))
    return {n: np.random.default_rng(c) for n, c in zip(names, children)}


def build_model(model_id: str, seed: int = 0) -> Model:
    try:
        cls = MODEL_CLASSES[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; choose from {', '.join(MODEL_IDS)}") from None
    return cls(seed_streams(seed)["init"])


def count_parameters(model: Module) -> int:
    return model.num_parameters()


# ------------------------------------------------------------------ loops


def _epoch(model: Model, forward_loss, optimizers: list[Optimizer], split: SplitData,
           batch_size: int, seed: int, epoch: int) -> tuple[float, int]:
    total, seen = 0.0, 0
    for xb, yb in batch_iterator(split, batch_size, seed, epoch):
        for opt in optimizers:
            opt.zero_grad()
        loss = forward_loss(Tensor(xb), yb)
        loss.backward()
        for opt in optimizers:
            opt.step()
        total += loss.item() * yb.size
        seen += yb.size
    return total / max(seen, 1), seen


def _eval_loss(forward_loss, split: SplitData) -> float:
    with ad.no_grad():
        return forward_loss(Tensor(split.X), split.y).item()


def _check_splits(data: Splits) -> None:
    for name in ("train", "val", "test"):
        if len(getattr(data, name)) == 0:
            raise ConfigurationError(f"{name} split is empty")


def evaluate(model: Model, split: SplitData, chunk: int = 512):
    scores = np.concatenate([model.predict_scores(split.X[i:i + chunk]) for i in range(0, len(split), chunk)])
    return compute_metrics(scores, split.y), scores


def train_model(model: Model, cfg: TrainConfig, data: Splits) -> RunRecord:
    """Epoch loop over shuffled mini-batches with per-epoch validation loss."""
    if isinstance(model, HybridModel):
        return train_hybrid_three_phase(model, cfg, data)
    _check_splits(data)
    start = time.perf_counter()
    rec = RunRecord(model.model_id, cfg.seed, config=cfg.to_dict())
    opt = make_optimizer(cfg.optimizer, model.parameters(), cfg.lr)
    sched = PlateauScheduler(opt, cfg.scheduler_patience) if cfg.scheduler_patience is not None else None

    def forward_loss(x, y):
        return model.loss(model(x), y)

    for epoch in range(cfg.epochs):
        train_loss, _ = _epoch(model, forward_loss, [opt], data.train, cfg.batch_size, cfg.seed, epoch)
        val_loss = _eval_loss(forward_loss, data.val)
        rec.add_epoch(train_loss, val_loss, opt.lr)
        if sched is not None:
            sched.step(val_loss)
    rec.metrics, _ = evaluate(model, data.test)
    rec.duration_s = time.perf_counter() - start
    return rec


# ------------------------------------------------------- three-phase hybrid


def _require_phase(m: HybridModel, done: int) -> None:
    if m.completed_phases != done:
        raise ContractError(
            f"phase {done + 1} requires phases 1..{done} completed; model has {m.completed_phases}"
        )


def phase_one(m: HybridModel, cfg: TrainConfig, data: Splits, rec: RunRecord) -> None:
    """Pre-train the QSNN alone on the spike-count loss."""
    _require_phase(m, 0)
    opt = make_optimizer(cfg.optimizer, m.qsnn_parameters(), cfg.lr)

    def forward_loss(x, y):
        return spike_count_ce(m.qsnn_forward(x), y)

    for epoch in range(cfg.phase1_epochs):
        tl, _ = _epoch(m, forward_loss, [opt], data.train, cfg.batch_size, cfg.seed, epoch)
        rec.add_epoch(tl, _eval_loss(forward_loss, data.val), opt.lr, "I")
    m.completed_phases = 1


def phase_two(m: HybridModel, cfg: TrainConfig, data: Splits, rec: RunRecord) -> Optimizer:
    """One pass over the training data that updates only the QLSTM branch."""
    _require_phase(m, 1)
    opt = make_optimizer(cfg.qlstm_optimizer, m.qlstm_parameters(), cfg.qlstm_lr)
    frozen = m.qsnn_parameters()
    for p in frozen:
        p.requires_grad = False
    try:
        def forward_loss(x, y):
            return m.loss(m(x), y)

        tl, seen = _epoch(m, forward_loss, [opt], data.train, cfg.batch_size, cfg.seed, cfg.phase1_epochs)
        rec.add_epoch(tl, _eval_loss(forward_loss, data.val), opt.lr, "II")
        rec.extra["phase2_samples"] = seen
    finally:
        for p in frozen:
            p.requires_grad = True
    m.completed_phases = 2
    return opt


def phase_three(m: HybridModel, cfg: TrainConfig, data: Splits, rec: RunRecord,
                qlstm_opt: Optimizer | None = None) -> None:
    """Joint training; loss from the QLSTM output only, one optimizer per branch."""
    _require_phase(m, 2)
    qsnn_opt = make_optimizer(cfg.optimizer, m.joint_qsnn_parameters(), cfg.lr)
    qlstm_opt = qlstm_opt or make_optimizer(cfg.qlstm_optimizer, m.qlstm_parameters(), cfg.qlstm_lr)

    def forward_loss(x, y):
        return m.loss(m(x), y)

    base = cfg.phase1_epochs + 1
    for epoch in range(cfg.phase3_epochs):
        tl, _ = _epoch(m, forward_loss, [qsnn_opt, qlstm_opt], data.train, cfg.batch_size, cfg.seed, base + epoch)
        rec.add_epoch(tl, _eval_loss(forward_loss, data.val), qsnn_opt.lr, "III")
    m.completed_phases = 3


def train_hybrid_three_phase(m: HybridModel, cfg: TrainConfig, data: Splits) -> RunRecord:
    _check_splits(data)
    start = time.perf_counter()
    rec = RunRecord(m.model_id, cfg.seed, config=cfg.to_dict())
    phase_one(m, cfg, data, rec)
    opt = phase_two(m, cfg, data, rec)
    phase_three(m, cfg, data, rec, opt)
    rec.metrics, _ = evaluate(m, data.test)
    rec.duration_s = time.perf_counter() - start
    return rec
