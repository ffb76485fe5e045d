"""QSNN front end feeding a QLSTM memory: the QSNN-QLSTM composite."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..nn import LIFConfig, Linear, lif_sequence
from .base import Model
from .classical import N_FEATURES, SPIKE_STEPS, _check_features
from .quantum import QLIFCell, QLSTMGateBank, qlif_sequence, qlstm_cell_step


class HybridModel(Model):
    """Linear(30->10) -> QLIF(10) produces a 25-step spike train; each step is
    projected by Linear(10->20) into a QLSTM cell (hidden 10, one entangler
    layer); the final hidden state goes through Linear(10->2) and a sigmoid.

    ``qsnn_head`` (10->2) plus a parameter-free LIF is the stand-alone QSNN
    read-out used while pre-training; it takes no part in the joint loss.
    """

    model_id = "qsnn-qlstm"
    output_kind = "two_logit"
    regime = "quantum"

    def __init__(self, rng: np.random.Generator, hidden: int = 10, steps: int = SPIKE_STEPS):
        self.front = Linear(N_FEATURES, hidden, rng)
        self.qlif1 = QLIFCell(hidden, rng)
        self.qsnn_head = Linear(hidden, 2, rng)
        self.head_cfg = LIFConfig()
        self.pre = Linear(hidden, 2 * hidden, rng)
        self.bank = QLSTMGateBank(2 * hidden, hidden, 1, rng)
        self.final = Linear(hidden, 2, rng)
        self.steps = steps
        self.completed_phases = 0

    def lif_configs(self):
        return [self.qlif1.cfg, self.head_cfg]

    def qsnn_parameters(self) -> list[Tensor]:
        return self.front.parameters() + self.qlif1.parameters() + self.qsnn_head.parameters()

    def joint_qsnn_parameters(self) -> list[Tensor]:
        """QSNN parameters reachable from the QLSTM output (head excluded)."""
        return self.front.parameters() + self.qlif1.parameters()

    def qlstm_parameters(self) -> list[Tensor]:
        return self.pre.parameters() + self.bank.parameters() + self.final.parameters()

    def spike_record(self, x: Tensor) -> Tensor:
        """QLIF spikes, steps x batch x hidden."""
        _check_features(x)
        return qlif_sequence(self.qlif1, ad.expand(self.front(x), self.steps))

    def spike_train(self, x: Tensor) -> list[Tensor]:
        record = self.spike_record(x)
        return [ad.take(record, t, axis=0) for t in range(self.steps)]

    def qsnn_forward(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        head = ad.time_linear(self.spike_record(x), self.qsnn_head.W, self.qsnn_head.b)
        return lif_sequence(head, self.head_cfg)

    def qlstm_forward(self, spikes: list[Tensor]) -> Tensor:
        batch = spikes[0].shape[0]
        h = Tensor(np.zeros((batch, self.bank.hidden)))
        c = Tensor(np.zeros((batch, self.bank.hidden)))
        for s in spikes:
            h, c = qlstm_cell_step(self.pre(s), h, c, self.bank)
        return ad.sigmoid(self.final(h))

    def forward(self, x: Tensor) -> Tensor:
        return self.qlstm_forward(self.spike_train(x))


def hybrid_forward(m: HybridModel, x) -> Tensor:
    return m(x)
