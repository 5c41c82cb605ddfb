import numpy as np
import pytest

from steerguard.attacks import AttackConfig, OptUniRunner, UniversalPerturbation
from steerguard.core.errors import AttackError, ValidationError
from steerguard.defenses import (DistillConfig, adversarial_images, adversarial_train, distill_train,
                                 distillation_loss, distillation_sweep)
from steerguard.models import TrainConfig, build_model, linear_model, train_model

from conftest import TINY

TRAIN = TrainConfig(epochs=2, batch_size=4, seed=7)


def assert_same_weights(a, b):
    for (name, x), (_, y) in zip(a.named_parameters(), b.named_parameters()):
        np.testing.assert_array_equal(x.data, y.data, err_msg=name)


class TestAdversarialTraining:
    def test_alpha_one_is_plain_training(self, trained_tiny_model, tiny_data):
        hardened = adversarial_train(trained_tiny_model, tiny_data, 'it_fgsm', alpha=1.0, cfg=TRAIN)
        plain, history = train_model(build_model('EpochS', TINY, seed=TRAIN.seed, strict_size=False),
                                     tiny_data, TRAIN)
        assert hardened.history == history
        assert_same_weights(hardened.model, plain)
        assert hardened.alpha == 1.0 and hardened.attack_id == 'it_fgsm'

    def test_mixed_loss_differs_from_plain(self, trained_tiny_model, tiny_data):
        cfg = AttackConfig(fgsm_epsilon=0.05)
        mixed = adversarial_train(trained_tiny_model, tiny_data, 'it_fgsm', alpha=0.5, cfg=TRAIN,
                                  attack_cfg=cfg)
        plain = adversarial_train(trained_tiny_model, tiny_data, 'it_fgsm', alpha=1.0, cfg=TRAIN)
        assert mixed.history != plain.history
        assert np.isfinite(mixed.clean_rmse)

    def test_source_model_untouched(self, trained_tiny_model, tiny_data):
        before = trained_tiny_model.predict_batch(tiny_data.images)
        adversarial_train(trained_tiny_model, tiny_data, 'it_fgsm', alpha=0.0, cfg=TRAIN, jobs=2)
        np.testing.assert_array_equal(trained_tiny_model.predict_batch(tiny_data.images), before)

    @pytest.mark.parametrize('alpha', [-0.1, 1.5])
    def test_alpha_range(self, trained_tiny_model, tiny_data, alpha):
        with pytest.raises(ValidationError):
            adversarial_train(trained_tiny_model, tiny_data, 'opt', alpha=alpha, cfg=TRAIN)

    def test_no_op_attack_is_an_error(self, trained_tiny_model, tiny_data):
        zero = UniversalPerturbation(np.zeros((TINY, TINY, 3)), 0.0, 'EpochS', 0.3)
        with pytest.raises(AttackError):
            adversarial_images(trained_tiny_model, tiny_data, OptUniRunner(universal=zero))

    def test_universal_runner_is_prepared_on_the_training_set(self, trained_tiny_model, tiny_data,
                                                              fast_attack_cfg):
        runner = OptUniRunner(fast_attack_cfg)
        images = adversarial_images(trained_tiny_model, tiny_data.subset(range(4)), runner)
        assert not runner.needs_preparation
        assert images.shape == (4, TINY, TINY, 3)
        assert images.min() >= 0.0 and images.max() <= 1.0


class TestDistillation:
    def test_lambda_zero_is_abs_training_on_teacher_outputs(self, trained_tiny_model, tiny_data):
        cfg = DistillConfig(lam=0.0, epochs=2, batch_size=4, seed=3)
        distilled = distill_train(trained_tiny_model, tiny_data, cfg)

        relabeled = tiny_data.relabel(trained_tiny_model.predict_batch(tiny_data.images))
        plain, history = train_model(build_model('EpochS', TINY, seed=3, strict_size=False), relabeled,
                                     TrainConfig(epochs=2, batch_size=4, seed=3, loss='abs'))
        assert distilled.history == history
        assert_same_weights(distilled.model, plain)

    def test_loss_of_a_copy_is_zero(self, trained_tiny_model, tiny_data):
        images = tiny_data.images[:4]
        loss = distillation_loss(trained_tiny_model.copy(), images,
                                 trained_tiny_model.predict_batch(images),
                                 trained_tiny_model.features_batch(images), lam=1.0)
        assert loss.item() == pytest.approx(0.0, abs=1e-12)

    def test_feature_term_is_weighted(self, tiny_model, trained_tiny_model, tiny_data):
        images = tiny_data.images[:4]
        out = trained_tiny_model.predict_batch(images)
        features = trained_tiny_model.features_batch(images)
        base = distillation_loss(tiny_model, images, out, features, lam=0.0).item()
        weighted = distillation_loss(tiny_model, images, out, features, lam=2.0).item()
        once = distillation_loss(tiny_model, images, out, features, lam=1.0).item()
        assert weighted - base == pytest.approx(2 * (once - base))

    def test_requires_a_feature_tap(self, tiny_data):
        with pytest.raises(ValidationError):
            distill_train(linear_model(np.zeros((TINY, TINY, 3))), tiny_data)

    def test_student_must_match(self, trained_tiny_model, tiny_data):
        other = build_model('DaveS', TINY, strict_size=False)
        with pytest.raises(ValidationError):
            distill_train(trained_tiny_model, tiny_data, student=other)

    def test_negative_lambda(self):
        with pytest.raises(ValidationError):
            DistillConfig(lam=-1.0)

    def test_sweep(self, trained_tiny_model, tiny_data):
        cfg = DistillConfig(epochs=1, batch_size=6)
        results = distillation_sweep(trained_tiny_model, tiny_data, lambdas=(0, 0.5), cfg=cfg)
        assert [lam for lam, _ in results] == [0.0, 0.5]
        assert results[0][1] is trained_tiny_model
        assert results[1][1] is not trained_tiny_model
        assert results[1][1].arch_id == 'EpochS'
