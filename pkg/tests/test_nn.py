import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qubrain import autodiff as ad
from qubrain import nn
from qubrain.autodiff import ContractError, DimensionError, Tensor, grad_check
from qubrain.nn import LIFConfig, LIFState


def state(u, s=0.0):
    return LIFState(Tensor(np.atleast_1d(np.asarray(u, float))), Tensor(np.atleast_1d(np.asarray(s, float))))


# ------------------------------------------------------------------ beta


def test_beta_from_tau():
    assert abs(nn.beta_from_tau(1, 1e9) - 1) < 1e-9
    assert abs(nn.beta_from_tau(1, 1) - math.exp(-1)) < 1e-15
    assert abs(nn.beta_from_tau(2, 3.7) - nn.beta_from_tau(1, 3.7) ** 2) < 1e-12
    for bad in [(0, 1), (1, 0), (-1, 2)]:
        with pytest.raises(ValueError):
            nn.beta_from_tau(*bad)


def test_lif_config_validation():
    for kw in [dict(beta=1.0), dict(beta=0.0), dict(threshold=0.0), dict(surrogate_alpha=-1), dict(spike_mode="soft")]:
        with pytest.raises(ValueError):
            LIFConfig(**kw)


# ------------------------------------------------------------------ LIF


def test_lif_step_subthreshold():
    cfg = LIFConfig(beta=0.9, threshold=1.0)
    new, s = nn.lif_step(state(0.5), Tensor([0.3]), cfg)
    assert abs(new.U.item() - 0.75) < 1e-15 and s.item() == 0


def test_lif_step_fires_then_subtracts():
    cfg = LIFConfig(beta=0.9, threshold=1.0)
    new, s = nn.lif_step(state(0.9), Tensor([0.5]), cfg)
    assert abs(new.U.item() - 1.31) < 1e-12 and s.item() == 1
    nxt, _ = nn.lif_step(new, Tensor([0.0]), cfg)
    assert abs(nxt.U.item() - (0.9 * 1.31 - 1.0)) < 1e-12


def test_lif_step_dimension_error():
    with pytest.raises(DimensionError):
        nn.lif_step(state([0.0, 0.0]), Tensor([1.0]), LIFConfig())


def test_zero_input_decay():
    cfg = LIFConfig(beta=0.95)
    s = state(0.8)
    for t in range(1, 101):
        s, _ = nn.lif_step(s, Tensor([0.0]), cfg)
        assert abs(s.U.item() - 0.95**t * 0.8) < 1e-12


def test_constant_subthreshold_input_converges():
    cfg = LIFConfig(beta=0.95, threshold=1.0)
    c = 0.04  # c / (1 - beta) = 0.8 stays below threshold
    s = state(0.0)
    for _ in range(1000):
        s, spk = nn.lif_step(s, Tensor([c]), cfg)
        assert spk.item() == 0
    assert abs(s.U.item() - c / (1 - 0.95)) < 1e-9


def test_surrogate_examples():
    np.testing.assert_array_equal(nn.surrogate_spike(Tensor([0.2, -0.2])).data, [1, 0])
    assert nn.surrogate_grad(0.0, 2.0) == 1.0
    assert nn.surrogate_grad(0.0, 3.0) == 1.5
    u = Tensor([0.3], requires_grad=True)
    nn.surrogate_spike(u, 2.0).backward(np.ones(1))
    assert abs(u.grad[0] - 1 / (1 + (math.pi * 0.3) ** 2)) < 1e-15


@given(st.floats(-1e6, 1e6, allow_nan=False), st.floats(0.1, 10))
def test_surrogate_even_positive_peaked(u, alpha):
    g = nn.surrogate_grad(u, alpha)
    assert abs(g - nn.surrogate_grad(-u, alpha)) <= 1e-15
    assert 0 < g <= alpha / 2
    assert np.isfinite(g)


def test_lif_sequence_matches_unrolled_steps():
    rng = np.random.default_rng(0)
    cfg = LIFConfig()
    I = rng.uniform(-0.5, 1.5, size=(25, 3, 4))
    u0 = rng.uniform(-1, 1, size=(3, 4))
    g_out = rng.normal(size=I.shape)

    cur_a, u0_a = Tensor(I.copy(), requires_grad=True), Tensor(u0.copy(), requires_grad=True)
    rec = nn.lif_sequence(cur_a, cfg, u0_a)
    ad.reduce("sum", rec * Tensor(g_out)).backward()

    cur_b, u0_b = Tensor(I.copy(), requires_grad=True), Tensor(u0.copy(), requires_grad=True)
    st_ = LIFState(u0_b, Tensor(np.zeros((3, 4))))
    outs = []
    for t in range(25):
        st_, s = nn.lif_step(st_, ad.take(cur_b, t, axis=0), cfg)
        outs.append(s)
    rec_b = ad.stack(outs, axis=0)
    ad.reduce("sum", rec_b * Tensor(g_out)).backward()

    np.testing.assert_array_equal(rec.data, rec_b.data)
    np.testing.assert_allclose(cur_a.grad, cur_b.grad, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(u0_a.grad, u0_b.grad, rtol=1e-12, atol=1e-14)
    assert rec.data.sum() > 0  # the comparison exercised resets


def test_lif_sequence_smooth_mode_fd():
    rng = np.random.default_rng(1)
    cfg = LIFConfig(spike_mode="smooth")
    cur = Tensor(rng.uniform(-0.5, 2, size=(10, 2, 3)), requires_grad=True)
    w = Tensor(rng.normal(size=(10, 2, 3)))
    assert grad_check(lambda: ad.reduce("sum", nn.lif_sequence(cur, cfg) * w), cur).passed


def test_dead_neuron_condition_cannot_occur():
    cur = Tensor(np.full((25, 1, 3), -100.0), requires_grad=True)  # never fires
    ad.reduce("sum", nn.lif_sequence(cur, LIFConfig())).backward()
    assert np.all(cur.grad > 0) and np.all(np.isfinite(cur.grad))


# ------------------------------------------------------------------ LSTM


def zero_cell(n_in, n_h):
    cell = nn.LSTMCell(n_in, n_h, np.random.default_rng(0))
    for p in cell.parameters():
        p.data[...] = 0.0
    return cell


def test_lstm_zero_weights_closed_form():
    cell = zero_cell(2, 1)
    h, c = nn.lstm_cell_step(Tensor([[0.3, -0.7]]), Tensor([[0.1]]), Tensor([[2.0]]), cell)
    assert abs(c.item() - 1.0) < 1e-15
    assert abs(h.item() - 0.5 * math.tanh(1.0)) < 1e-15
    assert abs(h.item() - 0.380797) < 1e-6


def test_lstm_gates_in_range():
    rng = np.random.default_rng(2)
    cell = nn.LSTMCell(4, 3, rng)
    v = np.concatenate([rng.normal(size=(5, 4)) * 3, rng.normal(size=(5, 3))], axis=1)
    for name in "fio":
        W, b = cell.gate(name)
        a = 1 / (1 + np.exp(-(v @ W.T + b)))
        assert np.all((a > 0) & (a < 1))
    W, b = cell.gate("c")
    assert np.all(np.abs(np.tanh(v @ W.T + b)) < 1)


def test_lstm_perfect_memory_limit():
    cell = zero_cell(3, 2)
    h = 2
    cell.b_ih.data[:h] = 50.0  # forget gate -> 1
    cell.b_ih.data[h:2 * h] = -50.0  # input gate -> 0
    rng = np.random.default_rng(3)
    c_prev = rng.normal(size=(4, 2))
    _, c = nn.lstm_cell_step(Tensor(rng.normal(size=(4, 3))), Tensor(rng.normal(size=(4, 2))), Tensor(c_prev), cell)
    np.testing.assert_allclose(c.data, c_prev, atol=1e-12)


def test_lstm_gradients_fd():
    rng = np.random.default_rng(4)
    cell = nn.LSTMCell(3, 4, rng)
    x, h, c = (Tensor(rng.normal(size=s), requires_grad=True) for s in [(2, 3), (2, 4), (2, 4)])
    w = Tensor(rng.normal(size=(2, 4)))

    def f():
        h2, c2 = nn.lstm_cell_step(x, h, c, cell)
        return ad.reduce("sum", (h2 + c2) * w)

    assert grad_check(f, [x, h, c] + cell.parameters()).passed


def test_lstm_dimension_error():
    cell = nn.LSTMCell(3, 2, np.random.default_rng(0))
    with pytest.raises(DimensionError):
        nn.lstm_cell_step(Tensor(np.zeros((1, 4))), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))), cell)


# ------------------------------------------------------------- optimizers


def test_sgd_step():
    w = Tensor([1.0], requires_grad=True)
    w.grad = np.array([2.0])
    nn.SGD([w], lr=0.1).step()
    assert abs(w.item() - 0.8) < 1e-15


@given(st.floats(-1e3, 1e3).filter(lambda g: abs(g) > 1e-3), st.floats(1e-4, 1e-1))
def test_adam_first_step_is_lr(g, lr):
    w = Tensor([0.5], requires_grad=True)
    w.grad = np.array([g])
    nn.Adam([w], lr=lr).step()
    assert abs(abs(w.item() - 0.5) - lr) < 1e-6


def test_rmsprop_first_step():
    w = Tensor([0.0], requires_grad=True)
    w.grad = np.array([3.0])
    nn.RMSprop([w], lr=0.01).step()
    assert abs(w.item() - (-0.01 * 3 / (math.sqrt(0.01 * 9) + 1e-8))) < 1e-15
    assert abs(w.item() + 0.1) < 1e-4


def test_optimizer_missing_gradient():
    a, b = Tensor([1.0], requires_grad=True), Tensor([1.0], requires_grad=True)
    a.grad = np.ones(1)
    for kind in nn.OPTIMIZERS:
        with pytest.raises(ContractError):
            nn.make_optimizer(kind, [a, b], 0.1).step()
    with pytest.raises(ValueError):
        nn.make_optimizer("lbfgs", [a], 0.1)


def test_optimizer_trajectories_deterministic():
    def run(kind):
        rng = np.random.default_rng(5)
        w = Tensor(rng.normal(size=6), requires_grad=True)
        opt = nn.make_optimizer(kind, [w], 1e-2)
        for _ in range(20):
            opt.zero_grad()
            ad.reduce("sum", ad.tanh(w) * ad.tanh(w)).backward()
            opt.step()
        return w.data.copy()

    for kind in nn.OPTIMIZERS:
        assert np.array_equal(run(kind), run(kind))


# -------------------------------------------------------------- scheduler


def sched(patience, lr=1e-3):
    return nn.PlateauScheduler(nn.SGD([], lr), patience)


def test_plateau_decreasing_never_decays():
    s = sched(1)
    for k in range(50):
        assert nn.plateau_step(s, 1.0 / (k + 1)) == 1e-3


def test_plateau_constant_loss():
    s = sched(2)
    lrs = [nn.plateau_step(s, 0.5) for _ in range(4)]
    assert lrs[:3] == [1e-3] * 3
    assert abs(lrs[3] - 1e-4) < 1e-18
    assert s.wait <= s.patience


def test_plateau_alternating_improvement_resets():
    s = sched(1)
    losses = [1.0, 1.0, 0.9, 0.9, 0.8, 0.8, 0.7, 0.7]
    assert all(nn.plateau_step(s, v) == 1e-3 for v in losses)


def test_plateau_factor_validated():
    with pytest.raises(ValueError):
        nn.PlateauScheduler(nn.SGD([], 1.0), 3, factor=1.5)


# ------------------------------------------------------------ spike heads


def record_from_counts(counts):
    counts = np.asarray(counts)
    rec = np.zeros((25, counts.shape[0], 2))
    for b, (k0, k1) in enumerate(counts):
        rec[:k0, b, 0] = 1
        rec[:k1, b, 1] = 1
    return Tensor(rec, requires_grad=True)


def test_spike_count_ce_examples():
    assert nn.spike_count_ce(record_from_counts([[25, 0]]), [0]).item() <= 1e-10
    for k in (0, 7, 25):
        for y in (0, 1):
            assert abs(nn.spike_count_ce(record_from_counts([[k, k]]), [y]).item() - math.log(2)) < 1e-12


def test_spike_count_ce_gradient_and_scores():
    rec = record_from_counts([[3, 9], [12, 1]])
    y = np.array([1, 0])
    nn.spike_count_ce(rec, y).backward()
    counts = np.array([[3.0, 9.0], [12.0, 1.0]])
    expect = (ad.softmax(counts) - np.eye(2)[y]) / 2
    for t in range(25):
        np.testing.assert_allclose(rec.grad[t], expect, atol=1e-12)
    pred, score = nn.spike_scores(rec)
    np.testing.assert_array_equal(pred, [1, 0])
    np.testing.assert_allclose(score, ad.softmax(counts)[:, 1])


def test_spike_count_ce_wrong_classes():
    with pytest.raises(DimensionError):
        nn.spike_count_ce(Tensor(np.zeros((25, 2, 3))), [0, 1])


# ------------------------------------------------------------------ Module


def test_linear_registration_and_init_bounds():
    lin = nn.LinearLayer(9, 4, np.random.default_rng(0))
    names = [n for n, _ in lin.named_parameters()]
    assert names == ["W", "b"]
    assert lin.W.shape == (4, 9) and lin.b.shape == (4,)
    assert np.all(np.abs(lin.W.data) <= 1 / 3) and all(p.requires_grad for p in lin.parameters())
    assert lin.num_parameters() == 40


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 1000))
def test_uniform_angles_range(seed):
    a = nn.uniform_angles(np.random.default_rng(seed), (50,)).data
    assert np.all((a >= 0) & (a < 2 * math.pi))
