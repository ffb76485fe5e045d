"""Finite-difference and parameter-shift checks over every differentiable piece.

Each ``*_checks`` function returns a list of :class:`Check`.  The CLI prints
them; the test suite asserts on them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from .. import nn, qsim
from ..autodiff import Tensor, grad_check

TOL = 1e-5
HYBRID_TOL = 1e-4
VJP_TOL = 1e-9


@dataclass
class Check:
    name: str
    error: float
    tol: float
    n: int = 0

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tol)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<38} err={self.error:.2e}  tol={self.tol:.0e}  n={self.n}"


def _t(rng, *shape, lo=-1.0, hi=1.0) -> Tensor:
    return Tensor(rng.uniform(lo, hi, size=shape), requires_grad=True)


def _fd(name, f, inputs, tol=TOL, **kw) -> Check:
    rep = grad_check(f, inputs, tol=tol, **kw)
    return Check(name, rep.max_rel_error, tol, rep.n_checked)


def _weighted(out: Tensor, w: np.ndarray) -> Tensor:
    # random projection so every output coordinate reaches the scalar
    return ad.reduce("sum", out * Tensor(w))


def autodiff_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    a, b = _t(rng, 3, 4), _t(rng, 3, 4)
    row = _t(rng, 1, 4)
    m1, m2 = _t(rng, 3, 5), _t(rng, 5, 2)
    x, W, bias = _t(rng, 4, 3), _t(rng, 2, 3), _t(rng, 2)
    pos = _t(rng, 3, 4, lo=0.2, hi=2.0)
    # relu probed away from its kink
    rl = Tensor(rng.choice([-1, 1], size=(3, 4)) * rng.uniform(0.1, 1.0, size=(3, 4)), requires_grad=True)
    seq = _t(rng, 5, 3, 4)
    tw, tb = _t(rng, 2, 4), _t(rng, 2)
    probs = _t(rng, 6, lo=0.05, hi=0.95)
    labels = rng.integers(0, 2, size=6).astype(float)
    logits = _t(rng, 6, 3)
    classes = rng.integers(0, 3, size=6)
    w34 = rng.normal(size=(3, 4))

    def wsum(out):
        return _weighted(out, rng_fixed(out.shape))

    cache: dict = {}

    def rng_fixed(shape):
        if shape not in cache:
            cache[shape] = np.random.default_rng(hash(shape) % 2**32).normal(size=shape)
        return cache[shape]

    return [
        _fd("add (broadcast)", lambda: wsum(a + row), [a, row]),
        _fd("sub (broadcast)", lambda: wsum(a - row), [a, row]),
        _fd("mul (broadcast)", lambda: wsum(a * row), [a, row]),
        _fd("mul (same operand)", lambda: wsum(a * a), [a]),
        _fd("matmul", lambda: wsum(m1 @ m2), [m1, m2]),
        _fd("transpose", lambda: wsum(ad.transpose(m1) @ Tensor(np.ones((3, 1)))), [m1]),
        _fd("linear", lambda: wsum(ad.linear(x, W, bias)), [x, W, bias]),
        _fd("reshape", lambda: wsum(ad.reshape(a, (4, 3))), [a]),
        _fd("sigmoid", lambda: wsum(ad.sigmoid(a)), [a]),
        _fd("tanh", lambda: wsum(ad.tanh(a)), [a]),
        _fd("relu", lambda: wsum(ad.relu(rl)), [rl]),
        _fd("exp", lambda: wsum(ad.exp(a)), [a]),
        _fd("log", lambda: wsum(ad.log(pos)), [pos]),
        _fd("concat", lambda: wsum(ad.concat([a, b], axis=1)), [a, b]),
        _fd("slice", lambda: wsum(ad.slice(a, 1, 3, axis=1)), [a]),
        _fd("take", lambda: wsum(ad.take(a, np.array([0, 2, 2]), axis=1)), [a]),
        _fd("stack", lambda: wsum(ad.stack([a, b], axis=0)), [a, b]),
        _fd("expand", lambda: wsum(ad.expand(a, 3)), [a]),
        _fd("time_linear", lambda: wsum(ad.time_linear(seq, tw, tb)), [seq, tw, tb]),
        _fd("reduce sum (axis)", lambda: wsum(ad.reduce("sum", a, axis=0)), [a]),
        _fd("reduce mean", lambda: ad.reduce("mean", a * Tensor(w34)), [a]),
        _fd("bce_loss", lambda: ad.bce_loss(probs, labels), [probs]),
        _fd("cross_entropy", lambda: ad.cross_entropy(logits, classes), [logits]),
    ]


def vjp_vs_parameter_shift(n_circuits: int = 100, seed: int = 0) -> Check:
    """Adjoint VJP against the parameter-shift rule on random 2-5 qubit circuits."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_circuits):
        n = int(rng.integers(2, 6))
        spec, params = qsim.random_circuit(n, int(rng.integers(4, 16)), rng)
        if spec.n_params == 0:
            continue
        x = rng.normal(size=(2, 1 << n))
        out_dim = spec.output_dim
        up = rng.normal(size=(2, out_dim))
        vjp, _ = qsim.circuit_vjp(spec, params, x, up)
        ps = qsim.parameter_shift_grad(spec, params, x)  # B x P x out
        ref = np.einsum("bpo,bo->p", ps, up)
        worst = max(worst, float(np.max(np.abs(vjp - ref))))
    return Check("adjoint VJP vs parameter shift", worst, VJP_TOL, n_circuits)


def qsim_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = []
    for embedding, width in (("amplitude", 12), ("angle", 4)):
        for output in ("expval_z", "probabilities"):
            spec = qsim.CircuitSpec(4, embedding, qsim.rot_cz_layers(4, 2), output)
            x = _t(rng, 3, width, lo=0.1, hi=1.0)
            w = Tensor(rng.uniform(0, 2 * np.pi, size=spec.n_params), requires_grad=True)
            proj = rng.normal(size=(3, spec.output_dim))
            checks.append(_fd(f"quantum_layer {embedding}/{output}",
                              lambda s=spec, x=x, w=w, p=proj: _weighted(qsim.quantum_layer(s, x, w), p), [x, w]))
    spec = qsim.CircuitSpec(5, "angle", qsim.basic_entangler_layers(5, 3), "expval_z")
    x, w = _t(rng, 2, 5), Tensor(rng.uniform(0, 2 * np.pi, size=15), requires_grad=True)
    proj = rng.normal(size=(2, 5))
    checks.append(_fd("quantum_layer basic entangler", lambda: _weighted(qsim.quantum_layer(spec, x, w), proj), [x, w]))
    checks.append(vjp_vs_parameter_shift(seed=seed))
    return checks


def nn_checks(seed: int = 0) -> list[Check]:
    rng = np.random.default_rng(seed)
    smooth = nn.LIFConfig(spike_mode="smooth")
    cur = _t(rng, 6, 3, 4, lo=-0.5, hi=2.0)
    u0 = _t(rng, 3, 4)
    proj = rng.normal(size=(6, 3, 4))

    def unrolled():
        state = nn.LIFState(u0, Tensor(np.zeros((3, 4))))
        outs = []
        for t in range(6):
            state, s = nn.lif_step(state, ad.take(cur, t, axis=0), smooth)
            outs.append(s)
        return _weighted(ad.stack(outs, axis=0), proj)

    cell = nn.LSTMCell(3, 4, rng)
    xt, h, c = _t(rng, 2, 3), _t(rng, 2, 4), _t(rng, 2, 4)
    lstm_proj = rng.normal(size=(2, 4))

    def lstm():
        h2, c2 = nn.lstm_cell_step(xt, h, c, cell)
        return _weighted(h2, lstm_proj) + _weighted(c2, lstm_proj)

    lin = nn.Linear(4, 3, rng)
    lx = _t(rng, 5, 4)
    rec = _t(rng, 7, 4, 2, lo=0.0, hi=1.0)
    ys = rng.integers(0, 2, size=4)
    sp = _t(rng, 3, 4, lo=-1.0, hi=1.0)
    return [
        _fd("surrogate_spike (smooth)", lambda: _weighted(nn.surrogate_spike(sp, 2.0, "smooth"), proj[0]), [sp]),
        _fd("lif_step unrolled (smooth)", unrolled, [cur, u0]),
        _fd("lif_sequence (smooth)", lambda: _weighted(nn.lif_sequence(cur, smooth, u0), proj), [cur, u0]),
        _fd("lstm_cell_step", lstm, [xt, h, c] + cell.parameters()),
        _fd("Linear module", lambda: _weighted(lin(lx), np.ones((5, 3))), [lx] + lin.parameters()),
        _fd("spike_count_ce", lambda: nn.spike_count_ce(rec, ys), [rec]),
    ]


def model_checks(seed: int = 0, max_coords: int = 40, hybrid: bool = True, only=None) -> list[Check]:
    """Loss gradients of every model w.r.t. all of its parameter tensors.

    Spiking models run in smooth spike mode so the forward pass is the
    function whose derivative the surrogate describes.  Large tensors are
    probed on ``max_coords`` random coordinates.
    """
    from ..models import MODEL_IDS, build_model

    rng = np.random.default_rng(seed)
    checks = []
    for mid in MODEL_IDS:
        if (mid == "qsnn-qlstm" and not hybrid) or (only is not None and mid not in only):
            continue
        model = build_model(mid, seed)
        model.set_spike_mode("smooth")
        batch = 2 if mid == "qsnn-qlstm" else 4
        x = rng.normal(size=(batch, 30))
        if model.regime == "quantum" and mid != "qlstm":
            x /= np.linalg.norm(x, axis=1, keepdims=True)
        y = np.array([0, 1] * (batch // 2))
        tol = HYBRID_TOL if mid == "qsnn-qlstm" else TOL
        xt = Tensor(x)
        checks.append(_fd(f"model {mid}", lambda m=model, xt=xt, y=y: m.loss(m(xt), y), model.parameters(),
                          tol=tol, max_coords=max_coords, rng=np.random.default_rng(seed)))
    return checks


SUITES = {
    "autodiff": autodiff_checks,
    "qsim": qsim_checks,
    "nn": nn_checks,
    "models": model_checks,
}


def run_suites(names=None, seed: int = 0) -> list[Check]:
    out = []
    for name in names or SUITES:
        out.extend(SUITES[name](seed=seed))
    return out
