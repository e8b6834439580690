import math

import numpy as np
import pytest

from qmemlab import nn
from qmemlab.layout import build_layout, build_memory_circuit
from qmemlab.noise import NoiseParams, SoftReadoutParams, attach_noise
from qmemlab.sim import reference_frame, sample
from qmemlab.syndrome import compute_defects, soft_defect_probs


def _random_data(n=64, T=4, n_in=8, n_final=4, seed=0):
    rng = np.random.default_rng(seed)
    seq = (rng.random((n, T, n_in)) < 0.3).astype(np.float64)
    fin = (rng.random((n, n_final)) < 0.3).astype(np.float64)
    return seq, fin, rng.integers(0, 2, n).astype(np.uint8)


def test_zero_model_predicts_half():
    m = nn.Model.zeros(8, 4, 16)
    seq, fin, _ = _random_data()
    p_main, p_aux = nn.forward(m, seq, fin)
    assert np.all(p_main == 0.5) and np.all(p_aux == 0.5)
    assert not nn.evaluate(m, seq, fin).any()


@pytest.mark.parametrize("T", [0, 1, 300])
def test_output_shape_for_any_length(T):
    m = nn.Model.init(8, 4, 16, np.random.default_rng(1))
    seq, fin, _ = _random_data(n=3, T=T)
    p_main, p_aux = nn.forward(m, seq, fin)
    assert p_main.shape == p_aux.shape == (3,)
    assert np.all((p_main > 0) & (p_main < 1) & (p_aux > 0) & (p_aux < 1))
    single = nn.forward(m, seq[0], fin[0])
    assert math.isclose(float(single[0]), float(p_main[0]), rel_tol=1e-5)


def test_width_mismatch_rejected():
    m = nn.Model.init(8, 4, 16, np.random.default_rng(1))
    seq, fin, _ = _random_data(n_in=7)
    with pytest.raises(ValueError):
        nn.forward(m, seq, fin)


def test_loss_examples():
    assert math.isclose(nn.loss([0.5], [0.5], [1], 0.5), 1.5 * math.log(2), rel_tol=1e-12)
    assert math.isclose(nn.loss([0.9], [0.8], [1], 0.5), -math.log(0.9) - 0.5 * math.log(0.8), rel_tol=1e-12)
    assert math.isclose(nn.loss([0.9], [0.8], [1], 0.5), 0.21693, abs_tol=5e-6)
    assert nn.loss([1.0, 0.0], [1.0, 0.0], [1, 0]) < 1e-6
    assert math.isfinite(nn.loss([0.0], [0.0], [1]))


@pytest.mark.parametrize("seed", range(3))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    m = nn.Model.init(8, 4, 4, rng, dtype=np.float64)
    seq, fin, y = _random_data(n=6, T=3, seed=seed)
    assert nn.gradient_check(m, seq, fin, y) < 1e-6
    # every block gets a non-zero gradient
    _, grads = nn.loss_and_grad(m, seq, fin, y)
    assert set(grads) == set(nn.PARAM_NAMES)
    assert all(np.abs(grads[k]).max() > 0 for k in nn.PARAM_NAMES)


def test_gradient_with_empty_sequence():
    m = nn.Model.init(8, 4, 4, np.random.default_rng(3), dtype=np.float64)
    seq, fin, y = _random_data(n=5, T=0)
    assert nn.gradient_check(m, seq, fin, y) < 1e-6


def test_permutation_invariance():
    rng = np.random.default_rng(4)
    m = nn.Model.init(8, 4, 16, rng, dtype=np.float64)
    seq, fin, _ = _random_data(n=10)
    perm = rng.permutation(8)
    m2 = m.copy()
    m2.params["l1_wx"] = m.params["l1_wx"][perm]
    a = nn.forward(m, seq, fin)
    b = nn.forward(m2, seq[:, :, perm], fin)
    assert np.allclose(a[0], b[0], atol=1e-12) and np.allclose(a[1], b[1], atol=1e-12)


def test_model_file_round_trip(tmp_path):
    m = nn.Model.init(8, 4, 16, np.random.default_rng(5))
    m.meta["distance"] = 3
    m.write(tmp_path / "m.qnnm")
    raw = (tmp_path / "m.qnnm").read_bytes()
    assert raw[:4] == b"QNNM"
    back = nn.Model.read(tmp_path / "m.qnnm")
    assert back.digest() == m.digest() and back.meta["distance"] == "3"
    for k in nn.PARAM_NAMES:
        assert np.array_equal(back.params[k], m.params[k])


def test_overfit_small_dataset():
    seq, fin, y = _random_data(n=512, T=5, seed=6)
    ds = nn.Dataset([(seq.astype(np.float32), fin.astype(np.float32), y)])
    cfg = nn.TrainConfig(learning_rate=1e-2, batch_size=64, dropout=0.0, patience=500, max_epochs=120, seed=1)
    _, hist = nn.train(ds, ds, cfg, 32)
    assert min(r["train_loss"] for r in hist.rows) < 1e-2


def _tiny_sets(seed=7):
    seq, fin, y = _random_data(n=300, T=3, seed=seed)
    seq, fin = seq.astype(np.float32), fin.astype(np.float32)
    tr = nn.Dataset([(seq[:200], fin[:200], y[:200])])
    va = nn.Dataset([(seq[200:], fin[200:], y[200:])])
    return tr, va


def test_early_stopping_after_patience():
    tr, va = _tiny_sets()  # random labels: validation loss stops improving quickly
    cfg = nn.TrainConfig(learning_rate=5e-2, batch_size=32, dropout=0.0, patience=20, max_epochs=400, seed=2)
    _, hist = nn.train(tr, va, cfg, 16)
    vals = [r["val_loss"] for r in hist.rows]
    best_epoch = int(np.argmin(vals))
    assert len(vals) == best_epoch + 1 + 20
    assert all(v >= vals[best_epoch] for v in vals[best_epoch + 1 :])


def test_second_stage_resumes_at_lower_rate():
    tr, va = _tiny_sets()
    cfg = nn.TrainConfig(
        learning_rate=5e-2, batch_size=32, dropout=0.0, patience=3, max_epochs=50, seed=2,
        second_stage_lr=1e-3, second_stage_epochs=4,
    )  # fmt: skip
    _, hist = nn.train(tr, va, cfg, 16)
    stages = [r["stage"] for r in hist.rows]
    assert 2 in stages and stages == sorted(stages)
    assert {r["lr"] for r in hist.rows if r["stage"] == 2} == {1e-3}
    first = [r for r in hist.rows if r["stage"] == 1]
    assert hist.rows[len(first)]["best_val"] <= min(r["val_loss"] for r in first) + 1e-12


def test_training_is_deterministic():
    tr, va = _tiny_sets()
    cfg = nn.TrainConfig(learning_rate=1e-2, batch_size=32, dropout=0.2, max_epochs=5, seed=3)
    runs = [nn.train(tr, va, cfg, 16) for _ in range(2)]
    strip = lambda h: [{k: v for k, v in r.items() if k != "seconds"} for r in h.rows]  # noqa: E731
    assert strip(runs[0][1]) == strip(runs[1][1])
    assert runs[0][0].digest() == runs[1][0].digest()


def test_empty_dataset_rejected():
    tr, va = _tiny_sets()
    with pytest.raises(ValueError):
        nn.train(nn.Dataset([]), va, nn.TrainConfig(), 8)
    with pytest.raises(ValueError):
        nn.TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        nn.TrainConfig(dropout=1.0)


def test_learns_surface_code_data():
    lay = build_layout(3)
    groups = []
    for r in (1, 3, 5):
        c = build_memory_circuit(lay, r)
        noisy = attach_noise(c, NoiseParams(0.02))
        groups.append(compute_defects(sample(noisy, 4000, seed=r), reference_frame(c), lay, "Z"))
    data = nn.Dataset.from_defects(groups, lay, "Z")
    tr, va = data.split(0.2, np.random.default_rng(0))
    assert [g[0].shape[1] for g in tr.groups] == [1, 3, 5]
    cfg = nn.TrainConfig(learning_rate=3e-3, batch_size=128, dropout=0.0, max_epochs=12, seed=4)
    model, hist = nn.train(tr, va, cfg, 24)
    assert hist.best_val < 1.5 * math.log(2)
    # accuracy beats the majority-class baseline on held-out shots
    correct = total = 0
    majority = 0
    for seq, fin, y in va.groups:
        correct += (nn.evaluate(model, seq, fin) == y).sum()
        majority += max(y.mean(), 1 - y.mean()) * len(y)
        total += len(y)
    assert correct > majority


def test_soft_inputs_have_hard_shapes():
    lay = build_layout(3)
    sp = SoftReadoutParams.from_error_rates(0.01, 0.001)
    c = build_memory_circuit(lay, 4)
    batch = sample(attach_noise(c, NoiseParams(1e-3, soft=sp)), 50, seed=1)
    frame = reference_frame(c)
    hard = compute_defects(batch, frame, lay, "Z")
    soft = soft_defect_probs(batch, sp, frame, lay, "Z")
    m = nn.Model.init(8, 4, 8, np.random.default_rng(0))
    a = nn.forward(m, hard.sequence(), hard.final(lay, "Z"))
    b = nn.forward(m, soft.sequence(), soft.final(lay, "Z"))
    assert a[0].shape == b[0].shape
