"""Classical building blocks: layers, LIF neurons, LSTM cells, optimizers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, DimensionError, Tensor, make_node


class Module:
    """Parameter container.

    Every ``Tensor`` attribute is a registered parameter; ``Module``
    attributes (and lists of them) are walked recursively.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor):
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Tensor):
                        yield f"{full}.{i}", item
                    elif isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def set_requires_grad(self, flag: bool) -> None:
        for p in self.parameters():
            p.requires_grad = flag


def uniform_fan_in(rng: np.random.Generator, shape, fan_in: int) -> Tensor:
    bound = 1.0 / math.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


def uniform_angles(rng: np.random.Generator, shape) -> Tensor:
    return Tensor(rng.uniform(0.0, 2 * math.pi, size=shape), requires_grad=True)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator):
        self.W = uniform_fan_in(rng, (out_features, in_features), in_features)
        self.b = uniform_fan_in(rng, (out_features,), in_features)

    @property
    def in_features(self) -> int:
        return self.W.shape[1]

    @property
    def out_features(self) -> int:
        return self.W.shape[0]

    def __call__(self, x: Tensor) -> Tensor:
        return ad.linear(x, self.W, self.b)


LinearLayer = Linear


# ------------------------------------------------------------------- LIF


@dataclass
class LIFConfig:
    beta: float = 0.95
    threshold: float = 1.0
    surrogate_alpha: float = 2.0
    # "heaviside" for training; "smooth" swaps the forward step for the arctan
    # primitive so finite differences see the surrogate derivative
    spike_mode: str = "heaviside"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.threshold <= 0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.surrogate_alpha <= 0:
            raise ValueError(f"surrogate_alpha must be positive, got {self.surrogate_alpha}")
        if self.spike_mode not in ("heaviside", "smooth"):
            raise ValueError(f"unknown spike_mode {self.spike_mode!r}")


@dataclass
class LIFState:
    U: Tensor
    S_prev: Tensor


def beta_from_tau(delta_t: float, tau: float) -> float:
    if delta_t <= 0 or tau <= 0:
        raise ValueError(f"delta_t and tau must be positive (got {delta_t}, {tau})")
    return math.exp(-delta_t / tau)


def surrogate_grad(u, alpha: float = 2.0):
    """Arctan surrogate derivative (alpha/2) / (1 + (pi alpha u / 2)^2)."""
    u = np.asarray(u, dtype=np.float64)
    half = alpha / 2.0
    if u.ndim == 0:
        return half / (1.0 + (math.pi * half * float(u)) ** 2)
    x = (math.pi * half) * u
    x *= x
    x += 1.0
    return np.divide(half, x, out=x)


def surrogate_spike(u_minus_theta, alpha: float = 2.0, mode: str = "heaviside", threshold: float = 0.0) -> Tensor:
    """Heaviside forward, arctan surrogate backward.

    ``threshold`` is subtracted inside the op, so ``surrogate_spike(U, a,
    threshold=theta)`` equals ``surrogate_spike(U - theta, a)`` with one tape
    node fewer.
    """
    u = u_minus_theta if isinstance(u_minus_theta, Tensor) else Tensor(u_minus_theta)
    ud = u.data - threshold if threshold else u.data
    if mode == "heaviside":
        out = (ud > 0).astype(np.float64)
    else:
        out = np.arctan(math.pi * alpha / 2.0 * ud) / math.pi + 0.5
    return make_node(out, (u,), lambda g: (g * surrogate_grad(ud, alpha),), "spike")


def lif_init(shape) -> LIFState:
    return LIFState(Tensor(np.zeros(shape)), Tensor(np.zeros(shape)))


def lif_membrane(U: Tensor, current: Tensor, S_prev: Tensor, beta: float, threshold: float) -> Tensor:
    """beta*U + current - threshold*S_prev as a single tape node."""
    out = beta * U.data + current.data - threshold * S_prev.data
    return make_node(out, (U, current, S_prev), lambda g: (beta * g, g, -threshold * g), "lif")


def lif_step(state: LIFState, current, cfg: LIFConfig) -> tuple[LIFState, Tensor]:
    """Decay, integrate, reset-by-subtraction of the previous spike, then fire."""
    current = current if isinstance(current, Tensor) else Tensor(current)
    if state.U.shape != current.shape:
        raise DimensionError(f"lif_step: membrane {state.U.shape} vs current {current.shape}")
    u = lif_membrane(state.U, current, state.S_prev, cfg.beta, cfg.threshold)
    spikes = surrogate_spike(u, cfg.surrogate_alpha, cfg.spike_mode, threshold=cfg.threshold)
    return LIFState(u, spikes), spikes


def lif_sequence(currents: Tensor, cfg: LIFConfig, U0: Tensor | None = None) -> Tensor:
    """Run ``lif_step`` over the leading time axis as one tape node.

    ``currents`` is steps x batch x neurons; the result is the spike record of
    the same shape.  The membrane starts at ``U0`` (zeros when omitted) with no
    previous spike.  Backward is hand-written BPTT and agrees with unrolling
    ``lif_step``.
    """
    I = currents.data
    steps = I.shape[0]
    u0 = np.zeros(I.shape[1:]) if U0 is None else U0.data
    if u0.shape != I.shape[1:]:
        raise DimensionError(f"lif_sequence: initial membrane {u0.shape} vs currents {I.shape}")
    beta, theta, alpha = cfg.beta, cfg.threshold, cfg.surrogate_alpha
    smooth = cfg.spike_mode == "smooth"
    U = np.empty_like(I)
    S = np.zeros_like(I)
    u = np.array(u0, dtype=np.float64)
    for t in range(steps):
        u *= beta
        u += I[t]
        if t:
            u -= theta * S[t - 1]
        U[t] = u
        if smooth:
            S[t] = np.arctan(math.pi * alpha / 2.0 * (u - theta)) / math.pi + 0.5
        else:
            np.greater(u, theta, out=S[t], casting="unsafe")

    def backward(g):
        dsurr = surrogate_grad(U - theta, alpha)
        gI = np.empty_like(I)
        gu = np.zeros_like(u0)
        for t in range(steps - 1, -1, -1):
            # gu holds dL/dU[t+1] on entry
            gs = g[t] - theta * gu
            gu *= beta
            gs *= dsurr[t]
            gu += gs
            gI[t] = gu
        return (gI,) if U0 is None else (gI, beta * gu)

    parents = (currents,) if U0 is None else (currents, U0)
    return make_node(S, parents, backward, "lif_sequence")


# ------------------------------------------------------------------ LSTM


class LSTMCell(Module):
    """LSTM cell over v = [x, h_prev].

    ``W`` stacks the forget, input, candidate and output gate rows.  Two bias
    vectors (input side and recurrent side) are kept, as in the usual
    cuDNN-style layout; they enter as their sum.
    """

    def __init__(self, input_size: int, hidden_size: int, rng: np.random.Generator):
        self.input_size = input_size
        self.hidden_size = hidden_size
        k = hidden_size  # torch-style bound 1/sqrt(hidden)
        self.W = uniform_fan_in(rng, (4 * hidden_size, input_size + hidden_size), k)
        self.b_ih = uniform_fan_in(rng, (4 * hidden_size,), k)
        self.b_hh = uniform_fan_in(rng, (4 * hidden_size,), k)

    def gate(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(weight rows, summed bias) of one gate: 'f', 'i', 'c' or 'o'."""
        k = "fico".index(name)
        h = self.hidden_size
        rows = np.s_[k * h:(k + 1) * h]
        return self.W.data[rows], self.b_ih.data[rows] + self.b_hh.data[rows]


LSTMCellWeights = LSTMCell


def lstm_cell_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, w: LSTMCell) -> tuple[Tensor, Tensor]:
    if x_t.shape[-1] != w.input_size or h_prev.shape[-1] != w.hidden_size or c_prev.shape != h_prev.shape:
        raise DimensionError(
            f"lstm_cell_step: x {x_t.shape}, h {h_prev.shape}, c {c_prev.shape} do not fit "
            f"input {w.input_size} / hidden {w.hidden_size}"
        )
    h = w.hidden_size
    v = ad.concat([x_t, h_prev], axis=1)
    a = ad.linear(v, w.W, w.b_ih + w.b_hh)
    f = ad.sigmoid(ad.slice(a, 0, h, axis=1))
    i = ad.sigmoid(ad.slice(a, h, 2 * h, axis=1))
    c_tilde = ad.tanh(ad.slice(a, 2 * h, 3 * h, axis=1))
    o = ad.sigmoid(ad.slice(a, 3 * h, 4 * h, axis=1))
    c = f * c_prev + i * c_tilde
    return o * ad.tanh(c), c


# ------------------------------------------------------------ optimizers


class Optimizer:
    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def _grads(self) -> list[np.ndarray]:
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ContractError(f"{type(self).__name__}.step: parameter {i} {p.shape} has no gradient")
        return [p.grad for p in self.params]

    def step(self) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    def step(self) -> None:
        for p, g in zip(self.params, self._grads()):
            p.data -= self.lr * g


class Adam(Optimizer):
    def __init__(self, params, lr: float = 1e-3, betas=(0.9, 0.999), eps: float = 1e-8):
        super().__init__(params, lr)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        grads = self._grads()
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(self.params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class RMSprop(Optimizer):
    def __init__(self, params, lr: float = 1e-2, alpha: float = 0.99, eps: float = 1e-8):
        super().__init__(params, lr)
        self.alpha = alpha
        self.eps = eps
        self.square_avg = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, g, v in zip(self.params, self._grads(), self.square_avg):
            v *= self.alpha
            v += (1.0 - self.alpha) * g * g
            p.data -= self.lr * g / (np.sqrt(v) + self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam, "rmsprop": RMSprop}


def make_optimizer(kind: str, params, lr: float) -> Optimizer:
    try:
        cls = OPTIMIZERS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}") from None
    return cls(params, lr=lr)


class PlateauScheduler:
    """Multiply the learning rate by ``factor`` once validation loss stalls
    for more than ``patience`` epochs."""

    def __init__(self, optimizer: Optimizer, patience: int, factor: float = 0.1, min_delta: float = 1e-8):
        if not 0.0 < factor < 1.0:
            raise ValueError("factor must lie in (0, 1)")
        self.optimizer = optimizer
        self.patience = patience
        self.factor = factor
        self.min_delta = min_delta
        self.best = math.inf
        self.wait = 0

    def step(self, val_loss: float) -> float:
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.wait = 0
        else:
            self.wait += 1
            if self.wait > self.patience:
                self.optimizer.lr *= self.factor
                self.wait = 0
        return self.optimizer.lr


def plateau_step(s: PlateauScheduler, val_loss: float) -> float:
    return s.step(val_loss)


# --------------------------------------------------------- spiking heads


def spike_counts(spike_record: Tensor) -> Tensor:
    if spike_record.data.ndim != 3 or spike_record.shape[-1] != 2:
        raise DimensionError(f"expected a steps x batch x 2 spike record, got {spike_record.shape}")
    return ad.reduce("sum", spike_record, axis=0)


def spike_count_ce(spike_record: Tensor, y) -> Tensor:
    """Cross-entropy on spike counts accumulated over the time axis."""
    return ad.cross_entropy(spike_counts(spike_record), y)


def spike_scores(spike_record) -> tuple[np.ndarray, np.ndarray]:
    """(argmax prediction, class-1 softmax score) from a spike record."""
    data = spike_record.data if isinstance(spike_record, Tensor) else np.asarray(spike_record)
    counts = data.sum(axis=0)
    return counts.argmax(axis=1), ad.softmax(counts, axis=1)[:, 1]
