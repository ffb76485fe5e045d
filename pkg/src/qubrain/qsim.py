"""Exact statevector simulation for small qubit registers.

Basis ordering is little-endian: qubit 0 is the least significant bit of the
basis index, so amplitude ``k`` of a 2-qubit state is ``|q1 q0>`` with
``q0 = k & 1``.

Internally states are batched complex arrays of shape ``(batch, 2**n)``.  The
public single-state helpers (:func:`amplitude_embed`, :func:`apply_gate`, ...)
wrap :class:`StateVector`; :func:`execute`, :func:`circuit_vjp` and
:func:`quantum_layer` work on whole batches.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .autodiff import DimensionError, Tensor, make_node

ROTATIONS = ("RX", "RY", "RZ")
ENTANGLERS = ("CZ", "CNOT")
NORM_FLOOR = 1e-12


class NormalizationError(ValueError):
    pass


class CapacityError(ValueError):
    pass


class UnsupportedGateError(ValueError):
    pass


@dataclass
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128).reshape(-1)
        n = self.amplitudes.size.bit_length() - 1
        if self.amplitudes.size != 1 << n:
            raise DimensionError(f"state length {self.amplitudes.size} is not a power of two")

    @property
    def n_qubits(self) -> int:
        return self.amplitudes.size.bit_length() - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    @classmethod
    def zeros(cls, n_qubits: int) -> "StateVector":
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps)


@dataclass(frozen=True)
class GateOp:
    kind: str
    wires: tuple
    theta: float = 0.0
    param_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        if self.kind in ROTATIONS:
            if len(self.wires) != 1:
                raise ValueError(f"{self.kind} acts on exactly one wire, got {self.wires}")
        elif self.kind in ENTANGLERS:
            if len(self.wires) != 2 or self.wires[0] == self.wires[1]:
                raise ValueError(f"{self.kind} needs two distinct wires, got {self.wires}")
            if self.param_index is not None:
                raise UnsupportedGateError(f"{self.kind} has no parameter")
        else:
            raise UnsupportedGateError(f"unknown gate kind {self.kind!r}")


@dataclass
class CircuitSpec:
    n_qubits: int
    embedding: str  # "amplitude" | "angle"
    gates: list = field(default_factory=list)
    output: str = "expval_z"  # "expval_z" | "probabilities"

    def __post_init__(self):
        if self.embedding not in ("amplitude", "angle"):
            raise ValueError(f"unknown embedding {self.embedding!r}")
        if self.output not in ("expval_z", "probabilities"):
            raise ValueError(f"unknown output {self.output!r}")
        for g in self.gates:
            if any(w < 0 or w >= self.n_qubits for w in g.wires):
                raise IndexError(f"gate {g.kind} wires {g.wires} out of range for {self.n_qubits} qubits")
        used = sorted({g.param_index for g in self.gates if g.param_index is not None})
        if used != list(range(len(used))):
            raise ValueError("parameter indices must cover 0..P-1 without gaps")

    @property
    def n_params(self) -> int:
        idx = [g.param_index for g in self.gates if g.param_index is not None]
        return max(idx) + 1 if idx else 0

    @property
    def output_dim(self) -> int:
        return self.n_qubits if self.output == "expval_z" else 1 << self.n_qubits


# ------------------------------------------------------------- gate kernels


def rotation_matrix(kind: str, theta: float | np.ndarray) -> np.ndarray:
    """2x2 (or batch x 2 x 2 for array theta) matrix of exp(-i theta P / 2)."""
    theta = np.asarray(theta, dtype=np.float64)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    m = np.zeros(theta.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        m[..., 0, 0] = c
        m[..., 1, 1] = c
        m[..., 0, 1] = -1j * s
        m[..., 1, 0] = -1j * s
    elif kind == "RY":
        m[..., 0, 0] = c
        m[..., 1, 1] = c
        m[..., 0, 1] = -s
        m[..., 1, 0] = s
    elif kind == "RZ":
        m[..., 0, 0] = c - 1j * s
        m[..., 1, 1] = c + 1j * s
    else:
        raise UnsupportedGateError(kind)
    return m


def rotation_derivative(kind: str, theta: float | np.ndarray) -> np.ndarray:
    # d/dθ exp(-iθP/2) = -(i/2) P exp(-iθP/2); written via shifted angle
    return 0.5 * rotation_matrix(kind, np.asarray(theta) + np.pi)


def _apply_1q(amps: np.ndarray, matrix: np.ndarray, wire: int, n: int) -> np.ndarray:
    batch = amps.shape[0]
    view = amps.reshape(batch, 1 << (n - 1 - wire), 2, 1 << wire)
    if matrix.ndim == 3:
        out = matrix[:, None] @ view
    else:
        out = matrix @ view
    return out.reshape(batch, -1)


@lru_cache(maxsize=None)
def _cz_signs(n: int, a: int, b: int) -> np.ndarray:
    idx = np.arange(1 << n)
    both = ((idx >> a) & 1) & ((idx >> b) & 1)
    return np.where(both == 1, -1.0, 1.0)


@lru_cache(maxsize=None)
def _cnot_perm(n: int, control: int, target: int) -> np.ndarray:
    idx = np.arange(1 << n)
    return np.where((idx >> control) & 1, idx ^ (1 << target), idx)


@lru_cache(maxsize=None)
def _z_signs(n: int) -> np.ndarray:
    idx = np.arange(1 << n)
    bits = (idx[:, None] >> np.arange(n)[None, :]) & 1
    return 1.0 - 2.0 * bits


def _apply_fixed(amps: np.ndarray, g: GateOp, n: int) -> np.ndarray:
    if g.kind == "CZ":
        return amps * _cz_signs(n, *g.wires)
    return amps[:, _cnot_perm(n, *g.wires)]


def _apply_op(amps: np.ndarray, g: GateOp, theta, n: int, inverse: bool = False) -> np.ndarray:
    if g.kind in ENTANGLERS:
        return _apply_fixed(amps, g, n)
    theta = -np.asarray(theta) if inverse else theta
    return _apply_1q(amps, rotation_matrix(g.kind, theta), g.wires[0], n)


def _gate_angle(g: GateOp, params: np.ndarray):
    return params[g.param_index] if g.param_index is not None else g.theta


# ------------------------------------------------------- single-state API


def amplitude_embed(features, n_qubits: int) -> StateVector:
    amps = _amplitude_batch(np.asarray(features, dtype=np.float64)[None, :], n_qubits)[0]
    return StateVector(amps)


def _pad(features: np.ndarray, n_qubits: int) -> np.ndarray:
    dim = 1 << n_qubits
    if features.shape[1] > dim:
        raise CapacityError(f"{features.shape[1]} features do not fit in {n_qubits} qubits ({dim} amplitudes)")
    padded = np.zeros((features.shape[0], dim))
    padded[:, : features.shape[1]] = features
    return padded


def _amplitude_batch(features: np.ndarray, n_qubits: int) -> np.ndarray:
    padded = _pad(features, n_qubits)
    norms = np.linalg.norm(padded, axis=1)
    bad = np.flatnonzero(norms <= NORM_FLOOR)
    if bad.size:
        raise NormalizationError(f"cannot amplitude-embed a zero vector (row {int(bad[0])})")
    return (padded / norms[:, None]).astype(np.complex128)


def angle_embed(angles, state: StateVector | None = None) -> StateVector:
    angles = np.asarray(angles, dtype=np.float64).reshape(-1)
    if state is None:
        state = StateVector.zeros(angles.size)
    if angles.size != state.n_qubits:
        raise DimensionError(f"angle_embed: {angles.size} angles for {state.n_qubits} qubits")
    amps = state.amplitudes[None, :]
    for q, a in enumerate(angles):
        amps = _apply_1q(amps, rotation_matrix("RX", a), q, state.n_qubits)
    return StateVector(amps[0])


def apply_gate(state: StateVector, g: GateOp, params=None) -> StateVector:
    n = state.n_qubits
    if any(w >= n or w < 0 for w in g.wires):
        raise IndexError(f"gate {g.kind} wires {g.wires} out of range for {n} qubits")
    theta = _gate_angle(g, np.asarray(params)) if g.param_index is not None else g.theta
    return StateVector(_apply_op(state.amplitudes[None, :], g, theta, n)[0])


def _ring(n: int) -> list[tuple[int, int]]:
    if n < 2:
        return []
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def rot_cz_layers(n_qubits: int, n_layers: int, offset: int = 0) -> list[GateOp]:
    """RX, RY, RZ on every qubit then a CZ ring; params[l][q][r] -> l*3n + 3q + r."""
    gates = []
    for layer in range(n_layers):
        for q in range(n_qubits):
            for r, kind in enumerate(ROTATIONS):
                gates.append(GateOp(kind, (q,), param_index=offset + layer * 3 * n_qubits + 3 * q + r))
        gates.extend(GateOp("CZ", pair) for pair in _ring(n_qubits))
    return gates


def basic_entangler_layers(n_qubits: int, n_layers: int, offset: int = 0) -> list[GateOp]:
    """RX on every qubit then a CNOT ring; params[l][q] -> l*n + q."""
    gates = []
    for layer in range(n_layers):
        gates.extend(GateOp("RX", (q,), param_index=offset + layer * n_qubits + q) for q in range(n_qubits))
        gates.extend(GateOp("CNOT", pair) for pair in _ring(n_qubits))
    return gates


def _run_gates(state: StateVector, gates: list[GateOp], params: np.ndarray) -> StateVector:
    amps = state.amplitudes[None, :]
    for g in gates:
        amps = _apply_op(amps, g, _gate_angle(g, params), state.n_qubits)
    return StateVector(amps[0])


def rot_cz_ansatz(state: StateVector, params) -> StateVector:
    params = np.asarray(params, dtype=np.float64)
    n = state.n_qubits
    if params.ndim != 3 or params.shape[1:] != (n, 3):
        raise DimensionError(f"rot_cz_ansatz expects params of shape (L, {n}, 3), got {params.shape}")
    return _run_gates(state, rot_cz_layers(n, params.shape[0]), params.reshape(-1))


def basic_entangler_ansatz(state: StateVector, params) -> StateVector:
    params = np.asarray(params, dtype=np.float64)
    n = state.n_qubits
    if params.ndim != 2 or params.shape[1] != n:
        raise DimensionError(f"basic_entangler_ansatz expects params of shape (L, {n}), got {params.shape}")
    return _run_gates(state, basic_entangler_layers(n, params.shape[0]), params.reshape(-1))


def probabilities(state: StateVector) -> np.ndarray:
    return np.abs(state.amplitudes) ** 2


def expval_z_all(state: StateVector) -> np.ndarray:
    return probabilities(state) @ _z_signs(state.n_qubits)


# ----------------------------------------------------------- batched circuits


def _embed(spec: CircuitSpec, inputs: np.ndarray) -> np.ndarray:
    n = spec.n_qubits
    if spec.embedding == "amplitude":
        return _amplitude_batch(inputs, n)
    if inputs.shape[1] != n:
        raise DimensionError(f"angle embedding needs {n} angles per row, got {inputs.shape[1]}")
    amps = np.zeros((inputs.shape[0], 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for q in range(n):
        amps = _apply_1q(amps, rotation_matrix("RX", inputs[:, q]), q, n)
    return amps


def _measure(spec: CircuitSpec, amps: np.ndarray) -> np.ndarray:
    probs = amps.real**2 + amps.imag**2
    if spec.output == "probabilities":
        return probs
    return probs @ _z_signs(spec.n_qubits)


def _as_batch(inputs) -> tuple[np.ndarray, bool]:
    arr = np.asarray(inputs, dtype=np.float64)
    return (arr[None, :], True) if arr.ndim == 1 else (arr, False)


def execute(spec: CircuitSpec, params, inputs, shift: tuple[int, float] | None = None) -> np.ndarray:
    """Embed ``inputs`` (one row per sample), run the gates, measure.

    ``shift=(position, delta)`` offsets the angle of a single gate occurrence;
    it exists for the parameter-shift oracle.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    x, single = _as_batch(inputs)
    amps = _embed(spec, x)
    n = spec.n_qubits
    for pos, g in enumerate(spec.gates):
        theta = _gate_angle(g, params)
        if shift is not None and shift[0] == pos:
            theta = theta + shift[1]
        amps = _apply_op(amps, g, theta, n)
    out = _measure(spec, amps)
    return out[0] if single else out


def circuit_vjp(spec: CircuitSpec, params, inputs, upstream) -> tuple[np.ndarray, np.ndarray]:
    """Adjoint-method vector-Jacobian product.

    Both supported outputs are expectations of diagonal observables, so the
    loss ``sum(upstream * output)`` equals ``<psi|H|psi>`` with
    ``H = diag(h)``.  One reverse sweep un-computes the state and carries
    ``H|psi>`` backwards.

    Returns ``(param_grads, input_grads)``: parameter gradients summed over the
    batch and per-row input gradients (through the embedding).
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    x, single = _as_batch(inputs)
    up = np.asarray(upstream, dtype=np.float64)
    up = up[None, :] if up.ndim == 1 else up
    if up.shape != (x.shape[0], spec.output_dim):
        raise DimensionError(f"upstream gradient shape {up.shape} != {(x.shape[0], spec.output_dim)}")
    n = spec.n_qubits
    psi0 = _embed(spec, x)
    psi = psi0
    for g in spec.gates:
        psi = _apply_op(psi, g, _gate_angle(g, params), n)

    h = up if spec.output == "probabilities" else up @ _z_signs(n).T
    lam = h * psi
    grads = np.zeros(params.size)
    for g in reversed(spec.gates):
        theta = _gate_angle(g, params)
        psi = _apply_op(psi, g, theta, n, inverse=True)
        if g.param_index is not None:
            dpsi = _apply_1q(psi, rotation_derivative(g.kind, theta), g.wires[0], n)
            grads[g.param_index] += 2.0 * np.sum(lam.conj() * dpsi).real
        lam = _apply_op(lam, g, theta, n, inverse=True)

    if spec.embedding == "amplitude":
        # psi0 is real: dL/dpsi0 = 2 Re(lam); then through x -> x / |x|
        g_state = 2.0 * lam.real
        padded = _pad(x, n)
        norms = np.linalg.norm(padded, axis=1, keepdims=True)
        unit = psi0.real
        g_x = (g_state - unit * np.sum(unit * g_state, axis=1, keepdims=True)) / norms
        g_in = g_x[:, : x.shape[1]]
    else:
        g_in = np.zeros_like(x)
        for q in reversed(range(n)):
            a = x[:, q]
            psi = _apply_1q(psi, rotation_matrix("RX", -a), q, n)
            dpsi = _apply_1q(psi, rotation_derivative("RX", a), q, n)
            g_in[:, q] = 2.0 * np.sum(lam.conj() * dpsi, axis=1).real
            lam = _apply_1q(lam, rotation_matrix("RX", -a), q, n)
    return grads, (g_in[0] if single else g_in)


def parameter_shift_grad(spec: CircuitSpec, params, inputs) -> np.ndarray:
    """Jacobian d(output)/d(params) by the two-point shift rule.

    Shape ``(n_params, output_dim)`` for one input row, or
    ``(batch, n_params, output_dim)`` for a batch.
    """
    params = np.asarray(params, dtype=np.float64).reshape(-1)
    x, single = _as_batch(inputs)
    jac = np.zeros((x.shape[0], params.size, spec.output_dim))
    for pos, g in enumerate(spec.gates):
        if g.param_index is None:
            continue
        if g.kind not in ROTATIONS:
            raise UnsupportedGateError(f"parameter shift needs a rotation gate, got {g.kind}")
        plus = execute(spec, params, x, shift=(pos, np.pi / 2))
        minus = execute(spec, params, x, shift=(pos, -np.pi / 2))
        jac[:, g.param_index, :] += (plus - minus) / 2.0
    return jac[0] if single else jac


# ------------------------------------------------------ autodiff bridge


def quantum_layer(spec: CircuitSpec, inputs: Tensor, weights: Tensor) -> Tensor:
    """Differentiable circuit evaluation: rows of ``inputs`` -> measured outputs."""
    if inputs.data.ndim != 2:
        raise DimensionError(f"quantum_layer expects batch x features input, got {inputs.shape}")
    if weights.size != spec.n_params:
        raise DimensionError(f"circuit has {spec.n_params} parameters, got a tensor of size {weights.size}")
    x = inputs.data
    w_shape = weights.shape
    w = weights.data.reshape(-1)
    out = execute(spec, w, x)

    def backward(g):
        pg, ig = circuit_vjp(spec, w, x, g)
        return ig, pg.reshape(w_shape)

    return make_node(out, (inputs, weights), backward, "quantum_layer")


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator, trainable: bool = True) -> tuple[CircuitSpec, np.ndarray]:
    """Random rotation/entangler sequence, used by invariance tests and gradcheck."""
    gates: list[GateOp] = []
    p = 0
    for _ in range(n_gates):
        if n_qubits >= 2 and rng.random() < 0.3:
            a, b = rng.choice(n_qubits, size=2, replace=False)
            gates.append(GateOp(str(rng.choice(ENTANGLERS)), (int(a), int(b))))
        else:
            kind = str(rng.choice(ROTATIONS))
            q = int(rng.integers(n_qubits))
            if trainable:
                gates.append(GateOp(kind, (q,), param_index=p))
                p += 1
            else:
                gates.append(GateOp(kind, (q,), theta=float(rng.uniform(0, 2 * np.pi))))
    spec = CircuitSpec(n_qubits, "amplitude", gates)
    return spec, rng.uniform(0, 2 * np.pi, size=p)


def gates_param_count(gates: Sequence[GateOp]) -> int:
    idx = [g.param_index for g in gates if g.param_index is not None]
    return max(idx) + 1 if idx else 0
