import numpy as np
import pytest

from steerguard.core.errors import ValidationError
from steerguard.models import (ARCHITECTURES, TrainConfig, baseline_rmse, build_model, describe_model,
                               eval_rmse, linear_model, predict, rmse, train_model)
from steerguard.models.training import regression_loss
from steerguard.autodiff import Tensor


class TestZoo:
    def test_complexity_ordering(self):
        counts = {arch: build_model(arch, 64).num_parameters for arch in ARCHITECTURES}
        assert counts['DeepS'] > counts['EpochS'] > counts['DaveS']

    def test_deterministic_init(self):
        a = build_model('DaveS', 64, seed=4)
        b = build_model('DaveS', 64, seed=4)
        c = build_model('DaveS', 64, seed=5)
        params = zip(a.named_parameters(), b.named_parameters(), c.named_parameters())
        for (_, pa), (_, pb), (_, pc) in params:
            np.testing.assert_array_equal(pa.data, pb.data)
        assert any(not np.array_equal(pa.data, pc.data)
                   for pa, pc in zip(a.parameters(), c.parameters()) if pa.data.any())

    def test_predictions_in_tanh_range(self, tiny_model, tiny_data):
        preds = tiny_model.predict_batch(tiny_data.images)
        assert preds.shape == (len(tiny_data),)
        assert np.all(np.abs(preds) <= 1.0)

    def test_unknown_arch(self):
        with pytest.raises(ValidationError):
            build_model('ResNet', 64)

    def test_strict_sizes(self):
        with pytest.raises(ValidationError):
            build_model('EpochS', 32)
        with pytest.raises(ValidationError):
            build_model('EpochS', 12, strict_size=False)
        assert build_model('EpochS', 16, strict_size=False).input_size == 16

    def test_wrong_image_shape(self, tiny_model):
        with pytest.raises(ValidationError):
            predict(tiny_model, np.zeros((16, 16, 3)))

    def test_features_come_from_last_hidden_layer(self, tiny_model, tiny_data):
        features = tiny_model.features_batch(tiny_data.images[:3])
        assert features.shape == (3, ARCHITECTURES['EpochS'].hidden[-1])
        assert np.all(features >= 0)

    def test_copy_is_independent(self, tiny_model):
        tiny_model.provenance = {'defense': 'distill'}
        clone = tiny_model.copy()
        clone.parameters()[0].data += 1.0
        assert not np.array_equal(clone.parameters()[0].data, tiny_model.parameters()[0].data)
        assert clone.provenance == {'defense': 'distill'}

    def test_linear_model(self):
        w = np.full((8, 8, 3), 0.01)
        model = linear_model(w, bias=0.1)
        assert predict(model, np.ones((8, 8, 3))) == pytest.approx(0.1 + 0.01 * 192)

    def test_describe_model(self, tiny_model):
        info = describe_model(tiny_model)
        assert info['arch_id'] == 'EpochS'
        assert info['parameters'] == tiny_model.num_parameters
        assert info['size_mb'] == pytest.approx(info['parameters'] * 8 / 2 ** 20)


class TestTraining:
    def test_training_reduces_loss(self, tiny_model, tiny_data):
        _, history = train_model(tiny_model, tiny_data, TrainConfig(epochs=4, batch_size=4))
        assert len(history) == 4
        assert history[-1] < history[0]

    def test_same_seed_same_weights(self, tiny_data):
        cfg = TrainConfig(epochs=2, batch_size=5, seed=9)
        a, ha = train_model(build_model('DaveS', 8, seed=0, strict_size=False), tiny_data, cfg)
        b, hb = train_model(build_model('DaveS', 8, seed=0, strict_size=False), tiny_data, cfg)
        assert ha == hb
        for pa, pb in zip(a.parameters(), b.parameters()):
            np.testing.assert_array_equal(pa.data, pb.data)

    def test_parameter_gradients_are_cleared(self, tiny_model, tiny_data):
        train_model(tiny_model, tiny_data, TrainConfig(epochs=1, batch_size=6))
        assert all(p.grad is None for p in tiny_model.parameters())

    def test_abs_loss(self):
        pred = Tensor(np.array([[0.5], [-0.5]]))
        assert regression_loss(pred, np.array([0.0, 0.5]), 'abs').item() == pytest.approx(0.75)
        assert regression_loss(pred, np.array([0.0, 0.5]), 'mse').item() == pytest.approx(0.625)

    def test_rmse_helpers(self, tiny_data):
        assert rmse([1.0, -1.0], [0.0, 0.0]) == pytest.approx(1.0)
        assert rmse([0.0, 0.0], [0.3, -0.4]) == pytest.approx(0.35355, abs=1e-5)
        assert baseline_rmse(tiny_data) == pytest.approx(float(np.sqrt(np.mean(tiny_data.labels ** 2))))

    def test_eval_rmse_trained(self, trained_tiny_model, tiny_data):
        assert eval_rmse(trained_tiny_model, tiny_data) >= 0.0

    def test_train_config_from_settings(self):
        cfg = TrainConfig.from_settings({'train_epochs': '3', 'train_lr': 0.01, 'seed': 2})
        assert (cfg.epochs, cfg.lr, cfg.seed) == (3, 0.01, 2)
