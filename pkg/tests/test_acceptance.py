"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test reports a PASS / FAIL / BLOCKED line that is printed in the
terminal summary under "acceptance criteria".

Environment knobs:
  QUBRAIN_DATA            path to the real credit-card CSV (criterion 6 runs only with it)
  QUBRAIN_ACCEPT_EPOCHS   epochs per seed for the protocol run of criterion 5 (default 2;
                          "full" uses the configured epoch counts)
"""

import json
import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

from qubrain import nn, qsim
from qubrain.bench.cli import main
from qubrain.bench.gradcheck import HYBRID_TOL, TOL, VJP_TOL, run_suites
from qubrain.bench.metrics import pairwise_auc, roc_auc
from qubrain.bench.records import RunRecord
from qubrain.data import FEATURE_NAMES, SplitSpec, make_fixture, make_splits, write_csv
from qubrain.models import (
    MODEL_IDS,
    REFERENCE_CONFIGS,
    HybridModel,
    build_model,
    phase_one,
    phase_three,
    phase_two,
)

# expected values, restated here so the check does not read them back from the package
PARAM_COUNTS = {"ann": 731, "snn": 3302, "lstm": 43457, "qnn": 108, "qsnn": 362, "qlstm": 6521, "qsnn-qlstm": 774}
TABLES = {
    # model: (optimizer, lr, batch, epochs, preprocessing)
    "ann": ("sgd", 1e-2, 128, 700, "standard"),
    "lstm": ("adam", 1e-3, 128, 350, "standard"),
    "snn": ("adam", 1e-3, 64, 350, "standard"),
    "qnn": ("rmsprop", 1e-2, 256, 70, "standard+l2"),
    "qlstm": ("adam", 1e-2, 256, 100, "minmax"),
    "qsnn": ("sgd", 1e-3, 64, 80, "standard+l2"),
    "qsnn-qlstm": ("adam", 1e-2, 128, 40, "standard+l2"),
}
CLASSICAL = ("ann", "snn", "lstm")
QUANTUM = ("qnn", "qsnn", "qlstm", "qsnn-qlstm")


# ------------------------------------------------------------ criterion 1


def test_criterion_1_parameter_counts(criterion):
    t0 = time.perf_counter()
    counts = {m: build_model(m).num_parameters() for m in MODEL_IDS}
    elapsed = time.perf_counter() - t0
    ok = counts == PARAM_COUNTS and elapsed < 1.0
    criterion(1, ok, f"counts {counts} in {elapsed:.2f}s")
    assert counts == PARAM_COUNTS
    assert elapsed < 1.0


# ------------------------------------------------------------ criterion 2


def test_criterion_2_gradient_suite(criterion):
    t0 = time.perf_counter()
    checks = run_suites()
    elapsed = time.perf_counter() - t0
    failed = [c.line() for c in checks if not c.passed]
    hybrid = [c for c in checks if c.name == "model qsnn-qlstm"]
    vjp = [c for c in checks if c.name.startswith("adjoint VJP")]
    assert hybrid and hybrid[0].tol == HYBRID_TOL and vjp and vjp[0].tol == VJP_TOL and vjp[0].n == 100
    assert all(c.tol == TOL for c in checks if c not in hybrid + vjp)
    ok = not failed and elapsed < 120
    worst = max(c.error / c.tol for c in checks)
    criterion(2, ok, f"{len(checks)} checks, worst err/tol {worst:.1e}, {elapsed:.0f}s" + (f"; failed {failed}" if failed else ""))
    assert not failed, failed
    assert elapsed < 120


# ------------------------------------------------------------ criterion 3


def test_criterion_3_quantum_invariants(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    n = 5
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    state = qsim.StateVector(v / np.linalg.norm(v))
    drift = 0.0
    prob_err = 0.0
    for k in range(10_000):
        if rng.random() < 0.3:
            a, b = rng.choice(n, 2, replace=False)
            g = qsim.GateOp(str(rng.choice(["CZ", "CNOT"])), (int(a), int(b)))
        else:
            g = qsim.GateOp(str(rng.choice(["RX", "RY", "RZ"])), (int(rng.integers(n)),), theta=float(rng.uniform(0, 2 * np.pi)))
        state = qsim.apply_gate(state, g)
        drift = max(drift, abs(state.norm() - 1.0))
        if k % 100 == 0:
            prob_err = max(prob_err, abs(qsim.probabilities(state).sum() - 1.0))
    for _ in range(50):
        spec, params = qsim.random_circuit(int(rng.integers(1, 6)), 25, rng)
        spec.output = "probabilities"
        p = qsim.execute(spec, params, rng.normal(size=(4, 1 << spec.n_qubits)))
        prob_err = max(prob_err, float(np.max(np.abs(p.sum(axis=1) - 1.0))))
    z_err = 0.0
    for theta in np.linspace(0, 2 * np.pi, 100):
        s = qsim.apply_gate(qsim.StateVector.zeros(1), qsim.GateOp("RX", (0,), float(theta)))
        z_err = max(z_err, abs(qsim.expval_z_all(s)[0] - math.cos(theta)))
    elapsed = time.perf_counter() - t0
    ok = drift < 1e-12 and prob_err < 1e-12 and z_err < 1e-12 and elapsed < 10
    criterion(3, ok, f"norm drift {drift:.1e}, prob sum err {prob_err:.1e}, <Z> err {z_err:.1e}, {elapsed:.1f}s")
    assert drift < 1e-12 and prob_err < 1e-12 and z_err < 1e-12
    assert elapsed < 10


# ------------------------------------------------------------ criterion 4


def test_criterion_4_lif_analytic(criterion):
    from qubrain.autodiff import Tensor

    t0 = time.perf_counter()
    cfg = nn.LIFConfig()
    beta = cfg.beta
    u0 = 0.9
    st = nn.LIFState(Tensor([u0]), Tensor([0.0]))
    decay_err = 0.0
    for t in range(1, 101):
        st, _ = nn.lif_step(st, Tensor([0.0]), cfg)
        decay_err = max(decay_err, abs(st.U.item() - beta**t * u0))
    c = 0.03
    st = nn.lif_init((1,))
    spikes = 0.0
    for _ in range(1000):
        st, s = nn.lif_step(st, Tensor([c]), cfg)
        spikes += s.item()
    steady_err = abs(st.U.item() - c / (1 - beta))
    us = np.linspace(-5, 5, 2001)
    surr_ok = True
    for alpha in (0.5, 2.0, 7.0):
        g = nn.surrogate_grad(us, alpha)
        surr_ok &= bool(np.all(g > 0) and np.array_equal(g, nn.surrogate_grad(-us, alpha)))
        surr_ok &= bool(nn.surrogate_grad(0.0, alpha) == alpha / 2 and g.max() == alpha / 2)
    elapsed = time.perf_counter() - t0
    ok = decay_err < 1e-12 and steady_err < 1e-9 and spikes == 0 and surr_ok and elapsed < 5
    criterion(4, ok, f"decay err {decay_err:.1e}, steady-state err {steady_err:.1e}, surrogate even/positive/peak {surr_ok}, {elapsed:.2f}s")
    assert decay_err < 1e-12 and steady_err < 1e-9 and spikes == 0 and surr_ok
    assert elapsed < 5


# ------------------------------------------------------------ criterion 5


def _protocol_epochs():
    raw = os.environ.get("QUBRAIN_ACCEPT_EPOCHS", "2")
    return None if raw == "full" else int(raw)


@pytest.fixture(scope="module")
def protocol_data(tmp_path_factory):
    # synthetic rows with the full schema and the real class count (492 frauds)
    path = tmp_path_factory.mktemp("protocol") / "synthetic_creditcard.csv"
    write_csv(make_fixture(8000, 492, seed=11), path)
    return path


def test_criterion_5_protocol(criterion, protocol_data, tmp_path):
    epochs = _protocol_epochs()
    problems = []
    t0 = time.perf_counter()
    for model in MODEL_IDS:
        opt, lr, batch, n_epochs, prep = TABLES[model]
        cfg = REFERENCE_CONFIGS[model]
        if (cfg.optimizer, cfg.lr, cfg.batch_size, cfg.epochs, cfg.preprocessing) != (opt, lr, batch, n_epochs, prep):
            problems.append(f"{model}: config differs from tables")
        out = tmp_path / model
        args = ["run", "--model", model, "--data", str(protocol_data), "--seeds", "0..9", "--out", str(out), "--no-plots"]
        if epochs is not None:
            args += ["--epochs", str(epochs)]
        if main(args) != 0:
            problems.append(f"{model}: run failed")
            continue
        regime = "classical" if model in CLASSICAL else "quantum"
        expected_epochs = n_epochs if epochs is None else epochs
        for seed in range(10):
            rec = RunRecord.load(out / f"run_{model}_{seed}.json")
            m = json.loads((out / f"split_{model}_{seed}.json").read_text())
            sizes = {k: len(m[k]) for k in ("train", "val", "test")}
            nonfraud = 5000 if regime == "classical" else 1000
            want = {"train": 390 + nonfraud - round(0.2 * 390) - round(0.2 * nonfraud),
                    "val": round(0.2 * 390) + round(0.2 * nonfraud), "test": 1100}
            if sizes != want or m["regime"] != regime:
                problems.append(f"{model}/{seed}: split sizes {sizes}")
            n_loss = expected_epochs + (1 if model == "qsnn-qlstm" else 0)  # + the single-pass phase
            if len(rec.train_loss) != n_loss or rec.epochs != n_loss:
                problems.append(f"{model}/{seed}: {len(rec.train_loss)} loss entries")
            c = rec.config
            if (c["optimizer"], c["lr"], c["batch_size"], c["preprocessing"], c["seed"]) != (opt, lr, batch, prep, seed):
                problems.append(f"{model}/{seed}: recorded config {c}")
        summary = json.loads((out / f"summary_{model}.json").read_text())
        if summary["metrics"] is None or summary["seeds"] != list(range(10)):
            problems.append(f"{model}: no boxplot summary")
        # determinism: rerun one seed into a fresh directory
        again = tmp_path / f"{model}_again"
        main(args[:5] + ["--seeds", "7", "--out", str(again), "--no-plots"] + args[10:])
        a = RunRecord.load(out / f"run_{model}_7.json").to_dict(include_timing=False)
        b = RunRecord.load(again / f"run_{model}_7.json").to_dict(include_timing=False)
        same_ckpt = (out / f"ckpt_{model}_7.qbc").read_bytes() == (again / f"ckpt_{model}_7.qbc").read_bytes()
        if a != b or not same_ckpt:
            problems.append(f"{model}: seed 7 rerun differs")
    elapsed = time.perf_counter() - t0
    mode = "configured epochs" if epochs is None else f"epochs overridden to {epochs}"
    criterion(5, not problems, f"7 models x 10 seeds on synthetic full-schema data ({mode}), {elapsed:.0f}s"
              + (f"; problems: {problems[:5]}" if problems else ""))
    assert not problems, problems


# ------------------------------------------------------------ criterion 6


def test_criterion_6_real_data_performance(criterion, tmp_path):
    path = os.environ.get("QUBRAIN_DATA")
    if not path or not Path(path).is_file():
        criterion(6, None, "needs the real credit-card CSV via QUBRAIN_DATA; not available here")
        pytest.skip("QUBRAIN_DATA not set: the real credit-card data is required for this criterion")
    from qubrain.data import load_csv

    ds = load_csv(path)
    medians, timing = {}, {"classical": 0.0, "quantum": 0.0}
    for model in MODEL_IDS:
        out = Path(os.environ.get("QUBRAIN_ACCEPT_OUT", tmp_path)) / model
        t0 = time.perf_counter()
        from qubrain.bench.runner import run_experiment

        recs = run_experiment(model, ds, range(10), out, plots=True)
        timing["classical" if model in CLASSICAL else "quantum"] += time.perf_counter() - t0
        medians[model] = {k: float(np.median([getattr(r.metrics, k) for r in recs])) for k in ("auc", "f1")}
    checks = {
        "ann auc >= 0.90": medians["ann"]["auc"] >= 0.90,
        "all auc >= 0.85": all(m["auc"] >= 0.85 for m in medians.values()),
        "hybrid f1 >= max(qnn, qlstm) - 0.02": medians["qsnn-qlstm"]["f1"] >= max(medians["qnn"]["f1"], medians["qlstm"]["f1"]) - 0.02,
        "quantum suite < 8h": timing["quantum"] < 8 * 3600,
        "classical suite < 30min": timing["classical"] < 30 * 60,
    }
    failed = [k for k, v in checks.items() if not v]
    criterion(6, not failed, f"medians {medians}, timing {timing}" + (f"; failed {failed}" if failed else ""))
    assert not failed, failed


# ------------------------------------------------------------ criterion 7


def test_criterion_7_three_phase_contract(criterion):
    cfg = REFERENCE_CONFIGS["qsnn-qlstm"]
    ds = make_fixture()
    data = make_splits(ds, SplitSpec(0, 20, 60, 10, 40), "quantum").scaled(cfg.preprocessing)
    m = HybridModel(np.random.default_rng(0))
    rec = RunRecord(m.model_id, 0)
    phase_one(m, cfg, data, rec)
    frozen = [p.data.copy() for p in m.qsnn_parameters()]
    opt = phase_two(m, cfg, data, rec)
    freeze_ok = all(np.array_equal(a, p.data) for a, p in zip(frozen, m.qsnn_parameters()))
    single_pass = rec.extra["phase2_samples"] == len(data.train) and rec.phases.count("II") == 1
    head = [p.data.copy() for p in m.qsnn_head.parameters()]
    phase_three(m, cfg, data, rec, opt)
    budget = rec.phases.count("I") + rec.phases.count("III")
    # the joint loss reaches the QSNN front only through the QLSTM output; the head is untouched
    head_ok = all(np.array_equal(a, p.data) for a, p in zip(head, m.qsnn_head.parameters()))
    from qubrain.autodiff import Tensor

    m.zero_grad()
    m.loss(m(Tensor(data.train.X[:8])), data.train.y[:8]).backward()
    head_ok &= all(p.grad is None for p in m.qsnn_head.parameters())
    ok = freeze_ok and single_pass and budget == 40 and head_ok
    criterion(7, ok, f"freeze bit-exact {freeze_ok}, single pass {single_pass}, I+III epochs {budget}, loss from QLSTM head only {head_ok}")
    assert freeze_ok and single_pass and budget == 40 and head_ok


# ------------------------------------------------------------ criterion 8


def test_criterion_8_auc_oracle(criterion):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    mismatches = 0
    done = 0
    while done < 1000:
        n = int(rng.integers(2, 51))
        y = rng.integers(0, 2, n)
        if y.min() == y.max():
            continue
        # coarse grid so ties are common
        s = rng.integers(0, 8, n) / 7 if rng.random() < 0.5 else rng.random(n)
        mismatches += roc_auc(s, y) != pairwise_auc(s, y)
        done += 1
    elapsed = time.perf_counter() - t0
    criterion(8, mismatches == 0 and elapsed < 5, f"{done} instances, {mismatches} mismatches, {elapsed:.2f}s")
    assert mismatches == 0
    assert elapsed < 5
