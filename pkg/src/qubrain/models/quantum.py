"""Quantum models: QNN, QLIF-based QSNN, and QLSTM."""

from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import DimensionError, Tensor
from ..nn import LIFConfig, LIFState, Linear, Module, lif_sequence, lif_step, uniform_angles
from ..qsim import CircuitSpec, basic_entangler_layers, quantum_layer, rot_cz_layers
from .base import Model
from .classical import N_FEATURES, SPIKE_STEPS, _check_features

N_QUBITS = 5


class QNN(Model):
    """Amplitude embedding (30 -> 5 qubits), 5 Rot-CZ layers, 32 basis
    probabilities, Linear(32->1), sigmoid."""

    model_id = "qnn"
    regime = "quantum"

    def __init__(self, rng: np.random.Generator, n_layers: int = 5, n_qubits: int = N_QUBITS):
        self.circuit_params = uniform_angles(rng, (n_layers, n_qubits, 3))
        self.fc = Linear(1 << n_qubits, 1, rng)
        self.spec = CircuitSpec(n_qubits, "amplitude", rot_cz_layers(n_qubits, n_layers), "probabilities")

    def forward(self, x: Tensor) -> Tensor:
        _check_features(x)
        probs = quantum_layer(self.spec, x, self.circuit_params)
        return ad.reshape(ad.sigmoid(self.fc(probs)), (-1,))


def qnn_forward(model: QNN, x) -> Tensor:
    return model(x)


class QLIFCell(Module):
    """LIF population whose initial membrane comes from a one-layer Rot-CZ
    circuit on the amplitude-embedded first input current."""

    def __init__(self, dim: int, rng: np.random.Generator, cfg: LIFConfig | None = None,
                 n_qubits: int = N_QUBITS, n_layers: int = 1, vqc_init: bool = True):
        self.vqc_params = uniform_angles(rng, (n_layers, n_qubits, 3))
        self.cfg = cfg or LIFConfig()
        self.dim = dim
        self.vqc_init = vqc_init
        self.spec = CircuitSpec(n_qubits, "amplitude", rot_cz_layers(n_qubits, n_layers), "expval_z")

    def initial_membrane(self, current: Tensor) -> Tensor:
        if not self.vqc_init:
            return Tensor(np.zeros(current.shape))
        z = quantum_layer(self.spec, current, self.vqc_params)
        # cyclic tiling of the per-qubit <Z> values over the d neurons
        return ad.take(z, np.arange(self.dim) % self.spec.n_qubits, axis=1)


def qlif_step(cell: QLIFCell, state: LIFState | None, current: Tensor, t: int) -> tuple[LIFState, Tensor]:
    if current.shape[-1] != cell.dim:
        raise DimensionError(f"QLIF cell of {cell.dim} neurons got current {current.shape}")
    if state is None or t == 0:
        state = LIFState(cell.initial_membrane(current), Tensor(np.zeros(current.shape)))
    return lif_step(state, current, cell.cfg)


def qlif_sequence(cell: QLIFCell, currents: Tensor) -> Tensor:
    """All steps of ``qlif_step`` as one fused LIF node (steps x batch x d)."""
    if currents.shape[-1] != cell.dim:
        raise DimensionError(f"QLIF cell of {cell.dim} neurons got currents {currents.shape}")
    return lif_sequence(currents, cell.cfg, cell.initial_membrane(ad.take(currents, 0, axis=0)))


class QSNN(Model):
    """Linear(30->10) -> QLIF(10) -> Linear(10->2) -> QLIF(2), 25 steps."""

    model_id = "qsnn"
    output_kind = "spikes"
    regime = "quantum"

    def __init__(self, rng: np.random.Generator, hidden: int = 10, steps: int = SPIKE_STEPS):
        self.fc1 = Linear(N_FEATURES, hidden, rng)
        self.qlif1 = QLIFCell(hidden, rng)
        self.fc2 = Linear(hidden, 2, rng)
        self.qlif2 = QLIFCell(2, rng)
        self.steps = steps

    def lif_configs(self):
        return [self.qlif1.cfg, self.qlif2.cfg]

    def set_vqc_init(self, flag: bool) -> None:
        self.qlif1.vqc_init = flag
        self.qlif2.vqc_init = flag

    def forward(self, x: Tensor) -> Tensor:
        _check_features(x)
        hidden = qlif_sequence(self.qlif1, ad.expand(self.fc1(x), self.steps))
        return qlif_sequence(self.qlif2, ad.time_linear(hidden, self.fc2.W, self.fc2.b))


def qsnn_forward(model: QSNN, x) -> tuple[Tensor, np.ndarray]:
    record = model(x)
    return record, model.scores(record)


class QLSTMGateBank(Module):
    """Shared Linear(concat->qubits), four basic-entangler circuits (forget,
    input, update, output) on angle-embedded inputs, shared Linear(qubits->hidden)."""

    GATES = ("forget", "input", "update", "output")

    def __init__(self, concat_size: int, hidden: int, n_layers: int, rng: np.random.Generator, n_qubits: int = N_QUBITS):
        if concat_size < hidden:
            raise DimensionError(f"concat size {concat_size} smaller than hidden size {hidden}")
        self.concat_size = concat_size
        self.hidden = hidden
        self.lin_in = Linear(concat_size, n_qubits, rng)
        self.gate_params = [uniform_angles(rng, (n_layers, n_qubits)) for _ in self.GATES]
        self.lin_out = Linear(n_qubits, hidden, rng)
        self.spec = CircuitSpec(n_qubits, "angle", basic_entangler_layers(n_qubits, n_layers), "expval_z")


def embed_hidden(h: Tensor, concat_size: int) -> Tensor:
    """Place h in the trailing slots of a concat-sized zero vector."""
    pad = concat_size - h.shape[1]
    return ad.concat([Tensor(np.zeros((h.shape[0], pad))), h], axis=1)


def qlstm_cell_step(x_vec: Tensor, h_prev: Tensor, c_prev: Tensor, bank: QLSTMGateBank) -> tuple[Tensor, Tensor]:
    if x_vec.shape[-1] != bank.concat_size or h_prev.shape[-1] != bank.hidden or c_prev.shape != h_prev.shape:
        raise DimensionError(
            f"qlstm_cell_step: x {x_vec.shape}, h {h_prev.shape}, c {c_prev.shape} "
            f"do not fit concat {bank.concat_size} / hidden {bank.hidden}"
        )
    v = x_vec + embed_hidden(h_prev, bank.concat_size)
    z = bank.lin_in(v)
    acts = [bank.lin_out(quantum_layer(bank.spec, z, p)) for p in bank.gate_params]
    f = ad.sigmoid(acts[0])
    i = ad.sigmoid(acts[1])
    c_tilde = ad.tanh(acts[2])
    o = ad.sigmoid(acts[3])
    c = f * c_prev + i * c_tilde
    return o * ad.tanh(c), c


class QLSTMModel(Model):
    """Linear(30->155) -> one QLSTM step (hidden 125, 3 entangler layers)
    -> Linear(125->1) -> sigmoid.  Inputs are MinMax-scaled to [0, pi/2]."""

    model_id = "qlstm"
    regime = "quantum"

    def __init__(self, rng: np.random.Generator, hidden: int = 125, n_layers: int = 3):
        concat = N_FEATURES + hidden
        self.lin_a = Linear(N_FEATURES, concat, rng)
        self.bank = QLSTMGateBank(concat, hidden, n_layers, rng)
        self.lin_d = Linear(hidden, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        _check_features(x)
        zeros = Tensor(np.zeros((x.shape[0], self.bank.hidden)))
        h, _ = qlstm_cell_step(self.lin_a(x), zeros, zeros, self.bank)
        return ad.reshape(ad.sigmoid(self.lin_d(h)), (-1,))


def qlstm_model_forward(model: QLSTMModel, x) -> Tensor:
    return model(x)
