from types import SimpleNamespace

import numpy as np
import pytest

from wavepad import nn
from wavepad.data import DataError, synth_dataset
from wavepad.model import ModelConfig, build
from wavepad.nn import LayerKind
from wavepad.train import (NumericalError, TrainConfig, _batches, featurize, predict, sgd_step,
                           train, train_arrays)

TOY = ModelConfig(input_shape=(4, 8, 8), block_convs=(1, 1), channels=(4, 6),
                  maxpool_after=(1,), reference_arch=False)


def toy_data(seed=0, n=12):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 4, 8, 8))
    y = np.arange(n) % 2
    x[y == 1, :, ::2, :] += 1.5  # learnable signal
    return x, y


def quick_cfg(**kw):
    base = dict(epochs=4, batch_size=4, learning_rate=0.01, dtype="float64", seed=0)
    base.update(kw)
    return TrainConfig(**base)


class TestSGD:
    def test_two_momentum_steps_by_hand(self):
        w0 = np.array([[1.0, -2.0]])
        fc = nn.fully_connected(w0.copy(), np.array([0.5]))
        model = SimpleNamespace(layers=[fc])
        g = nn.LayerGrads(weight=np.array([[0.3, 0.1]]), bias=np.array([-0.2]))
        cfg = TrainConfig(learning_rate=0.1, momentum=0.9, weight_decay=0.01)
        vel = {}
        sgd_step(model, {0: g}, vel, cfg)
        v1 = g.weight + 0.01 * w0
        w1 = w0 - 0.1 * v1
        np.testing.assert_allclose(fc.weight, w1, rtol=0, atol=1e-15)
        sgd_step(model, {0: g}, vel, cfg)
        v2 = 0.9 * v1 + g.weight + 0.01 * w1
        np.testing.assert_allclose(fc.weight, w1 - 0.1 * v2, rtol=0, atol=1e-15)
        b1 = 0.5 - 0.1 * (-0.2 + 0.005)
        b2 = b1 - 0.1 * (0.9 * (-0.2 + 0.005) + -0.2 + 0.01 * b1)
        assert fc.bias[0] == pytest.approx(b2, abs=1e-15)

    def test_plain_sgd(self):
        fc = nn.fully_connected(np.array([[2.0]]))
        sgd_step(SimpleNamespace(layers=[fc]), {0: nn.LayerGrads(np.array([[4.0]]), np.array([1.0]))},
                 {}, TrainConfig(learning_rate=0.5, momentum=0.0, weight_decay=0.0))
        assert fc.weight[0, 0] == 0.0 and fc.bias[0] == -0.5

    def test_zero_learning_rate_freezes_parameters(self):
        x, y = toy_data()
        model = build(TOY, seed=1, dtype=np.float64)
        before = [a.copy() for _, a in model.parameters()]
        trained, _ = train_arrays(model, x, y, x[:4], y[:4], quick_cfg(learning_rate=0.0, epochs=2))
        for b, (_, a) in zip(before, trained.parameters()):
            np.testing.assert_array_equal(a, b)


class TestTraining:
    def test_loss_decreases(self):
        x, y = toy_data()
        _, tlog = train_arrays(build(TOY, seed=1, dtype=np.float64), x, y, x, y,
                               quick_cfg(epochs=12))
        assert tlog.losses[-1] < tlog.losses[0]

    def test_deterministic(self):
        x, y = toy_data()
        runs = [train_arrays(build(TOY, seed=2, dtype=np.float32), x, y, x[:4], y[:4],
                             quick_cfg(dtype="float32"))[1].losses for _ in range(2)]
        assert runs[0] == runs[1]

    def test_best_epoch_snapshot(self):
        x, y = toy_data()
        best, tlog = train_arrays(build(TOY, seed=1, dtype=np.float64), x, y, x, y, quick_cfg(epochs=6))
        accs = [r.val_acc for r in tlog.records]
        assert tlog.best_val_acc == max(accs)
        # ties go to the later epoch
        assert tlog.best_epoch == max(i + 1 for i, a in enumerate(accs) if a == max(accs))
        _, pred = predict(best, x)
        assert np.mean(pred == y) == tlog.best_val_acc

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_input_aborts(self):
        x, y = toy_data()
        x[0, 0, 0, 0] = np.inf
        with pytest.raises(NumericalError):
            train_arrays(build(TOY, dtype=np.float64), x, y, x, y, quick_cfg())

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_exploding_lr_aborts(self):
        x, y = toy_data()
        with pytest.raises(NumericalError):
            train_arrays(build(TOY, dtype=np.float64), x * 1e6, y, x, y,
                         quick_cfg(learning_rate=1e12, epochs=20))

    def test_early_stop(self):
        x, y = toy_data()
        _, tlog = train_arrays(build(TOY, seed=1, dtype=np.float64), x, y, x, y,
                               quick_cfg(epochs=50, early_stop_accuracy=0.0))
        assert len(tlog.records) == 1

    def test_too_few_samples(self):
        x, y = toy_data()
        with pytest.raises(DataError):
            train_arrays(build(TOY), x[:1], y[:1], x, y, quick_cfg())

    def test_train_on_dataset_splits(self, tmp_path):
        ds = synth_dataset(6, (16, 16), seed=1)
        cfg = quick_cfg(epochs=2, image_size=(16, 16))
        model = build(ModelConfig(input_shape=(4, 8, 8), block_convs=(1, 1), channels=(4, 4),
                                  maxpool_after=(), reference_arch=False), dtype=np.float64)
        _, tlog = train(model, ds, cfg)
        assert ds.splits and len(tlog.records) == 2
        tlog.to_csv(tmp_path / "log.csv")
        lines = (tmp_path / "log.csv").read_text().splitlines()
        assert lines[0] == "epoch,train_loss,train_acc,val_acc,wall_time_s" and len(lines) == 3


class TestPredict:
    def test_tie_goes_to_class_zero(self):
        model = build(TOY, dtype=np.float64)
        fc = [p for p in model.layers if p.kind is LayerKind.FC][0]
        fc.weight[:] = 0
        probs, pred = predict(model, np.ones((3, 4, 8, 8)))
        np.testing.assert_array_equal(pred, 0)
        np.testing.assert_allclose(probs, 0.5)

    def test_batched_equals_whole(self, rng):
        model = build(TOY, dtype=np.float64)
        x = rng.standard_normal((10, 4, 8, 8))
        a, _ = predict(model, x, batch_size=3)
        b, _ = predict(model, x, batch_size=64)
        np.testing.assert_allclose(a, b, atol=1e-14)


class TestBatches:
    def test_cover_every_index_once(self):
        chunks = _batches(21, 8, np.random.default_rng(0))
        assert sorted(np.concatenate(chunks).tolist()) == list(range(21))
        assert [len(c) for c in chunks] == [8, 8, 5]

    def test_singleton_tail_merged(self):
        chunks = _batches(17, 8, np.random.default_rng(0))
        assert [len(c) for c in chunks] == [8, 9]


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(batch_size=1), dict(epochs=0), dict(learning_rate=-1),
                                    dict(dtype="float16"), dict(split=(0.5, 0.5))])
    def test_rejected(self, kw):
        with pytest.raises(ValueError):
            TrainConfig(**kw)

    def test_featurize_shape_and_dtype(self, rng):
        feats = featurize(rng.random((3, 16, 16)), TrainConfig())
        assert feats.shape == (3, 4, 8, 8) and feats.dtype == np.float32
