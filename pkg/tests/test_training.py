"""Losses, optimizer, schedule, data, checkpoints and the training loop."""
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nes2net import core
from nes2net.core import Parameter, Tensor
from nes2net.models import BONAFIDE, SPOOF, ModelConfig, build_model
from nes2net.training import (Checkpoint, CheckpointError, CosineCycleSchedule, FocalLossConfig,
                              OptimizerState, SyntheticDataConfig, TrainConfig,
                              average_checkpoints, crop_or_pad, focal_loss, lr_at,
                              optimizer_step, synth_generate, to_checkpoint, train, weighted_ce)
from nes2net.training.checkpoint import MAGIC
from nes2net.training.trainer import DivergenceError


def t64(a):
    return Tensor(a, dtype="f64")


# -- losses ------------------------------------------------------------------

def test_focal_closed_form():
    loss = focal_loss(t64([0.0, 0.0]), [BONAFIDE], FocalLossConfig(2.0, 0.25)).item()
    assert loss == pytest.approx(0.25 * 0.25 * math.log(2), abs=1e-15)
    assert abs(loss - 0.043321) < 1e-6


def test_focal_confident_limit():
    assert focal_loss(t64([-30.0, 30.0]), [BONAFIDE]).item() < 1e-25


def ce(logits, labels):
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(labels)), labels]


def test_focal_gamma_zero_is_cross_entropy(rng):
    logits = rng.standard_normal((1000, 2)) * 4
    labels = rng.integers(0, 2, 1000)
    got = focal_loss(t64(logits), labels, FocalLossConfig(0.0, None)).item()
    assert abs(got - ce(logits, labels).mean()) < 1e-12


@given(st.floats(-8, 8), st.floats(-8, 8), st.sampled_from([SPOOF, BONAFIDE]),
       st.floats(0, 5), st.floats(0.05, 1))
def test_focal_non_negative_and_bounded_by_ce(a, b, label, gamma, alpha):
    logits = np.array([[a, b]])
    loss = focal_loss(t64(logits), [label], FocalLossConfig(gamma, alpha)).item()
    assert 0 <= loss <= ce(logits, [label])[0] + 1e-12


def test_focal_decreases_in_pt():
    losses = [focal_loss(t64([0.0, m]), [BONAFIDE]).item() for m in np.linspace(-5, 5, 41)]
    assert all(x > y for x, y in zip(losses, losses[1:]))


def test_focal_gradient(rng):
    labels = np.array([0, 1, 1, 0])
    f = lambda z: focal_loss(z, labels, FocalLossConfig(2.0, 0.25))
    assert core.grad_check(f, [t64(rng.standard_normal((4, 2)))]) < 1e-8


def test_weighted_ce(rng):
    assert weighted_ce(t64([0.0, 0.0]), [SPOOF]).item() == pytest.approx(math.log(2), abs=1e-15)
    logits = rng.standard_normal((50, 2))
    labels = rng.integers(0, 2, 50)
    w = np.array([0.3, 2.0])
    ref = (w[labels] * ce(logits, labels)).mean()
    assert weighted_ce(t64(logits), labels, w).item() == pytest.approx(ref, abs=1e-14)
    assert weighted_ce(t64(logits), labels).item() == pytest.approx(ce(logits, labels).mean(), abs=1e-14)
    with pytest.raises(ValueError):
        weighted_ce(t64(logits), labels, (0.0, 1.0))


def test_loss_config_validation():
    with pytest.raises(ValueError):
        FocalLossConfig(gamma=-1)
    with pytest.raises(ValueError):
        FocalLossConfig(alpha=0.0)


# -- optimizer ---------------------------------------------------------------

def adam_reference(w, grads, lr, b1=0.9, b2=0.999, eps=1e-8, wd=0.0, decoupled=True):
    m = np.zeros_like(w)
    v = np.zeros_like(w)
    for t, g in enumerate(grads, 1):
        if wd and not decoupled:
            g = g + wd * w
        if wd and decoupled:
            w = w * (1 - lr * wd)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        w = w - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
    return w


@pytest.mark.parametrize("mode", ["adam", "adamw"])
def test_optimizer_straight_line(rng, mode):
    w0 = rng.standard_normal((3, 4))
    grads = [rng.standard_normal((3, 4)) for _ in range(10)]
    p = Parameter(w0, dtype="f64")
    state = OptimizerState(lr=1e-2, weight_decay=0.05, mode=mode)
    for g in grads:
        optimizer_step(state, {"w": p}, {"w": g})
    ref = adam_reference(w0, grads, 1e-2, wd=0.05, decoupled=mode == "adamw")
    np.testing.assert_allclose(p.numpy(), ref, rtol=0, atol=1e-12)
    assert state.step == 10 and state.m["w"].shape == w0.shape


def test_optimizer_trivial_cases():
    p = Parameter(np.array([1.5, -2.0]), dtype="f64")
    optimizer_step(OptimizerState(lr=0.1), {"p": p}, {"p": np.zeros(2)})
    assert p.numpy().tolist() == [1.5, -2.0]
    optimizer_step(OptimizerState(lr=0.0, weight_decay=0.1), {"p": p}, {"p": np.ones(2)})
    assert p.numpy().tolist() == [1.5, -2.0]
    q = Parameter(np.array([0.0]), dtype="f64")
    optimizer_step(OptimizerState(lr=0.01), {"q": q}, {"q": np.array([3.7])})
    assert q.item() == pytest.approx(-0.01, rel=1e-6)


# -- schedule ----------------------------------------------------------------

def test_schedule_values():
    s = CosineCycleSchedule()
    assert s.lr_at(0) == 1e-6
    assert s.lr_at(10) == 1e-6
    assert s.lr_at(5) == pytest.approx((1e-6 + 1e-9) / 2, rel=1e-12)
    assert s.lr_at(10 - 1e-9) == pytest.approx(1e-9, rel=1e-6)
    assert lr_at(s, 3) == s.lr_at(3)
    with pytest.raises(ValueError):
        CosineCycleSchedule(1e-9, 1e-6)


@given(st.floats(0, 500), st.floats(0.5, 30))
def test_schedule_bounded_and_periodic(epoch, cycle):
    s = CosineCycleSchedule(1e-3, 1e-6, cycle)
    lr = s.lr_at(epoch)
    assert 1e-6 - 1e-18 <= lr <= 1e-3 + 1e-18
    assert s.lr_at(epoch + cycle) == pytest.approx(lr, rel=1e-6, abs=1e-12)


def test_min_lr_epochs():
    assert CosineCycleSchedule(1, 0, 4).min_lr_epochs(12) == [3, 7, 11]


# -- data --------------------------------------------------------------------

def test_crop_or_pad():
    x = np.arange(10.0).reshape(2, 5)
    assert crop_or_pad(x, 3).tolist() == [[0, 1, 2], [5, 6, 7]]
    assert crop_or_pad(x, 7)[0].tolist() == [0, 1, 2, 3, 4, 0, 1]
    r = crop_or_pad(x, 2, np.random.default_rng(0))
    assert r.shape == (2, 2) and r[1, 0] - r[0, 0] == 5


def test_synth_deterministic_and_balanced():
    cfg = SyntheticDataConfig(dim=8, frames=10, n_train=40, n_dev=20, n_eval=20, seed=3)
    a, b = synth_generate(cfg, "train"), synth_generate(cfg, "train")
    assert np.array_equal(a.features, b.features) and np.array_equal(a.labels, b.labels)
    assert a.features.shape == (40, 8, 10)
    assert (a.labels == BONAFIDE).sum() == 20
    assert len(set(a.utt_ids)) == 40
    spoof_tags = {t for t, y in zip(a.attacks, a.labels) if y == SPOOF}
    assert spoof_tags == {"A01", "A02", "A03"}
    assert not np.array_equal(synth_generate(cfg, "dev").features[:5], a.features[:5])
    with pytest.raises(ValueError):
        synth_generate(cfg, "test")


def test_synth_class_means():
    cfg = SyntheticDataConfig(dim=4, frames=50, delta=3.0, n_eval=400, seed=1)
    d = synth_generate(cfg, "eval", np.float64)
    means = d.features.mean(axis=2)
    gap = means[d.labels == BONAFIDE].mean(axis=0) - means[d.labels == SPOOF].mean(axis=0)
    assert np.linalg.norm(gap) == pytest.approx(3.0, rel=0.1)


def test_synth_layers():
    cfg = SyntheticDataConfig(dim=4, frames=6, n_train=8, layers=3)
    assert synth_generate(cfg, "train").features.shape == (8, 3, 4, 6)


# -- checkpoints -------------------------------------------------------------

def make_ckpt(rng, scale=1.0, dtype=np.float32):
    return Checkpoint({"a.w": (scale * rng.standard_normal((3, 2))).astype(dtype),
                       "b": rng.standard_normal(4).astype(dtype),
                       "s": np.array(2.5, dtype=dtype)}, {"epoch": "1"})


def test_checkpoint_bytes_round_trip(rng, tmp_path):
    c = make_ckpt(rng)
    c.metadata["note"] = "x y"
    path = tmp_path / "c.ckpt"
    c.save(path)
    blob = path.read_bytes()
    assert blob.startswith(MAGIC)
    back = Checkpoint.load(path)
    assert back.to_bytes() == blob
    assert back.metadata == c.metadata
    for k, v in c.entries.items():
        assert back.entries[k].dtype == v.dtype and np.array_equal(back.entries[k], v)


def test_checkpoint_rejects_garbage(rng):
    blob = make_ckpt(rng).to_bytes()
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(b"XXXXXXXX" + blob[8:])
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(blob[:-3])
    with pytest.raises(CheckpointError):
        Checkpoint.from_bytes(blob + b"\0")
    with pytest.raises(CheckpointError):
        Checkpoint({"i": np.arange(3)}).to_bytes()


def test_average_examples(rng):
    c = make_ckpt(rng)
    same = average_checkpoints([c, c, c])
    for k in c.entries:
        np.testing.assert_array_equal(same.entries[k], c.entries[k])
    d = make_ckpt(rng)
    mid = average_checkpoints([c, d])
    for k in c.entries:
        np.testing.assert_allclose(mid.entries[k], (c.entries[k].astype(np.float64)
                                                    + d.entries[k]) / 2, rtol=1e-7)
    assert mid.metadata["n_averaged"] == "2"


def test_average_elementwise_loop(rng):
    ckpts = [make_ckpt(rng, dtype=np.float64) for _ in range(5)]
    avg = average_checkpoints(ckpts)
    w = avg.entries["a.w"]
    for i in range(3):
        for j in range(2):
            vals = sorted(c.entries["a.w"][i, j] for c in ckpts)
            total = 0.0
            for v in vals:
                total += v
            assert w[i, j] == total / 5


def test_average_permutation_invariant(rng):
    ckpts = [make_ckpt(rng) for _ in range(4)]
    a = average_checkpoints(ckpts)
    b = average_checkpoints(ckpts[::-1])
    for k in a.entries:
        assert np.array_equal(a.entries[k], b.entries[k])


def test_average_schema_errors(rng):
    with pytest.raises(CheckpointError):
        average_checkpoints([])
    with pytest.raises(CheckpointError):
        average_checkpoints([make_ckpt(rng), make_ckpt(rng, dtype=np.float64)])


# -- training loop -----------------------------------------------------------

TINY = ModelConfig(variant="nes2net", input_dim=16, s1=2, s2=2, se_ratio=4, pool_bottleneck=4)
TINY_DATA = SyntheticDataConfig(dim=16, frames=12, delta=3.0, n_train=64, n_dev=32, n_eval=32, seed=5)


def run_tiny(seed=0, **kw):
    cfg = TrainConfig(**{"epochs": 3, "batch_size": 16, "lr": 1e-2, "cycle_length": 3, **kw})
    model = build_model(TINY, seed)
    return train(model, synth_generate(TINY_DATA, "train"), synth_generate(TINY_DATA, "dev"), cfg, seed)


def test_zero_epochs_leave_model_unchanged():
    before = build_model(TINY, 0).state()
    result = run_tiny(epochs=0)
    for k, v in result.model.state().items():
        assert np.array_equal(v, before[k])
    assert result.log == [] and result.best is None


def test_same_seed_same_log():
    a, b = run_tiny(seed=2), run_tiny(seed=2)
    assert a.log_text() == b.log_text()
    assert a.best.to_bytes() == b.best.to_bytes()
    assert run_tiny(seed=3).log_text() != a.log_text()


def test_top_k_and_selection():
    res = run_tiny(epochs=4, top_k=2)
    assert len(res.top) == 2
    eers = [float(c.metadata["dev_eer"]) for c in res.top]
    assert eers == sorted(eers) and eers[0] == min(e.dev_eer for e in res.log)
    lr_res = run_tiny(epochs=4, selection="min_lr", cycle_length=2)
    assert int(lr_res.best.metadata["epoch"]) in {0, 1, 2, 3}


def test_early_stopping():
    res = run_tiny(epochs=30, patience=1, lr=1e-9)
    assert res.stopped_early and len(res.log) < 30


def test_divergence_raises():
    with pytest.raises(DivergenceError):
        run_tiny(lr=1e30, optimizer="adam", weight_decay=0.0, loss="wce")


def test_checkpoint_restores_model():
    res = run_tiny()
    fresh = build_model(TINY, 99)
    fresh.load_state(Checkpoint.from_bytes(res.best.to_bytes()).entries)
    x = synth_generate(TINY_DATA, "eval").features
    ref = build_model(TINY, 0)
    ref.load_state(res.best.entries)
    assert np.array_equal(fresh.eval().score(x), ref.eval().score(x))
    assert to_checkpoint(fresh).metadata["variant"] == "nes2net"
