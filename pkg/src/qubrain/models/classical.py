"""Classical baselines: feed-forward ANN, two-layer LIF SNN, stacked LSTM."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import DimensionError, Tensor
from ..nn import LIFConfig, Linear, LSTMCell, lif_sequence, lstm_cell_step
from .base import Model

N_FEATURES = 30
SPIKE_STEPS = 25


def _check_features(x: Tensor, n: int = N_FEATURES) -> None:
    if x.data.ndim != 2 or x.shape[1] != n:
        raise DimensionError(f"expected batch x {n} features, got {x.shape}")


class ANN(Model):
    model_id = "ann"

    def __init__(self, rng: np.random.Generator):
        self.fc1 = Linear(N_FEATURES, 20, rng)
        self.fc2 = Linear(20, 5, rng)
        self.fc3 = Linear(5, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        _check_features(x)
        h = ad.relu(self.fc1(x))
        h = ad.relu(self.fc2(h))
        return ad.reshape(ad.sigmoid(self.fc3(h)), (-1,))


def ann_forward(model: ANN, x) -> Tensor:
    return model(x)


class SNN(Model):
    """Linear(30->100) -> LIF -> Linear(100->2) -> LIF, 25 steps of direct
    current injection; the spike record is decoded by rate."""

    model_id = "snn"
    output_kind = "spikes"

    def __init__(self, rng: np.random.Generator, hidden: int = 100, steps: int = SPIKE_STEPS, cfg: LIFConfig | None = None):
        self.fc1 = Linear(N_FEATURES, hidden, rng)
        self.fc2 = Linear(hidden, 2, rng)
        self.steps = steps
        self.cfg1 = cfg or LIFConfig()
        self.cfg2 = LIFConfig(**vars(self.cfg1))

    def lif_configs(self):
        return [self.cfg1, self.cfg2]

    def forward(self, x: Tensor) -> Tensor:
        _check_features(x)
        currents = ad.expand(self.fc1(x), self.steps)
        hidden_spikes = lif_sequence(currents, self.cfg1)
        return lif_sequence(ad.time_linear(hidden_spikes, self.fc2.W, self.fc2.b), self.cfg2)


def snn_forward(model: SNN, x) -> tuple[Tensor, np.ndarray]:
    record = model(x)
    return record, model.scores(record)


class LSTMModel(Model):
    """Two stacked LSTM layers (30->50, 50->50) on a length-1 sequence, then
    Linear(50->128) -> Linear(128->1) -> sigmoid."""

    model_id = "lstm"

    def __init__(self, rng: np.random.Generator, hidden: int = 50):
        self.cells = [LSTMCell(N_FEATURES, hidden, rng), LSTMCell(hidden, hidden, rng)]
        self.fc1 = Linear(hidden, 128, rng)
        self.fc2 = Linear(128, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        _check_features(x)
        inp = x
        for cell in self.cells:
            zeros = Tensor(np.zeros((x.shape[0], cell.hidden_size)))
            inp, _ = lstm_cell_step(inp, zeros, zeros, cell)
        return ad.reshape(ad.sigmoid(self.fc2(self.fc1(inp))), (-1,))


def lstm_model_forward(model: LSTMModel, x) -> Tensor:
    return model(x)
