from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..nn import LIFConfig, Module


class Model(Module):
    """Common surface used by the trainer and the benchmark harness.

    ``forward`` returns either class-1 probabilities (``output_kind ==
    "probability"``), per-class sigmoid outputs (``"two_logit"``) or an output
    spike record of shape steps x batch x 2 (``"spikes"``).
    """

    model_id = ""
    output_kind = "probability"
    regime = "classical"

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x) -> Tensor:
        return self.forward(x if isinstance(x, Tensor) else Tensor(x))

    def loss(self, out: Tensor, y) -> Tensor:
        y = np.asarray(y, dtype=np.float64)
        if self.output_kind == "spikes":
            from ..nn import spike_count_ce

            return spike_count_ce(out, y)
        if self.output_kind == "two_logit":
            onehot = np.stack([1.0 - y, y], axis=1)
            return ad.bce_loss(out, onehot)
        return ad.bce_loss(out, y)

    def scores(self, out) -> np.ndarray:
        data = out.data if isinstance(out, Tensor) else np.asarray(out)
        if self.output_kind == "spikes":
            from ..nn import spike_scores

            return spike_scores(data)[1]
        if self.output_kind == "two_logit":
            return data[:, 1]
        return data

    def predict_scores(self, x) -> np.ndarray:
        with ad.no_grad():
            return self.scores(self(x))

    def lif_configs(self) -> list[LIFConfig]:
        return []

    def set_spike_mode(self, mode: str) -> None:
        for cfg in self.lif_configs():
            cfg.spike_mode = mode
            cfg.__post_init__()
