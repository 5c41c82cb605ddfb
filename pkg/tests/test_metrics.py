import numpy as np
import pytest

from steerguard.attacks import AttackId, OptUniRunner, make_example
from steerguard.core.errors import ValidationError
from steerguard.evaluation.metrics import (ORIGINAL, detection_curve, false_positive_rows, name_models,
                                           rate_of, rescore_sweep, run_attack, success_rate,
                                           threshold_sweep, transfer_matrix)
from steerguard.models import build_model, train_model, TrainConfig

from conftest import TINY


@pytest.fixture(scope='module')
def second_model(tiny_data):
    model = build_model('DaveS', TINY, seed=2, strict_size=False)
    train_model(model, tiny_data, TrainConfig(epochs=2, batch_size=4, seed=2))
    return model


def unperturbed(model, dataset, attack_id=AttackId.OPT):
    return [make_example(model, s.image, np.zeros_like(s.image), attack_id, 0.3, 0) for s in dataset]


class TestSuccessRates:
    def test_rate_of(self, trained_tiny_model, tiny_data):
        examples = unperturbed(trained_tiny_model, tiny_data.subset(range(3)))
        assert rate_of(examples) == 0.0
        with pytest.raises(ValidationError):
            rate_of([])

    def test_success_rate_matches_examples(self, trained_tiny_model, tiny_data, fast_attack_cfg):
        examples = run_attack(trained_tiny_model, 'it_fgsm', tiny_data, fast_attack_cfg)
        assert success_rate(trained_tiny_model, 'it_fgsm', tiny_data, fast_attack_cfg) == rate_of(examples)

    def test_sweep_is_non_increasing(self, trained_tiny_model, tiny_data, fast_attack_cfg):
        deltas = [0.01, 0.02, 0.05, 0.1, 0.5]
        rates = [rate for _, rate in threshold_sweep(trained_tiny_model, 'opt', tiny_data, deltas,
                                                     fast_attack_cfg)]
        assert rates == sorted(rates, reverse=True)

    @pytest.mark.parametrize('deltas', [[], [0.2, 0.1], [0.0, 0.1]])
    def test_sweep_rejects_deltas(self, trained_tiny_model, tiny_data, deltas):
        with pytest.raises(ValidationError):
            rescore_sweep(unperturbed(trained_tiny_model, tiny_data.subset([0])), deltas)


class TestTransfer:
    def test_matrix_shape_and_diagonal(self, trained_tiny_model, second_model, tiny_data, fast_attack_cfg):
        cells = transfer_matrix([trained_tiny_model, second_model], ['opt_uni'], tiny_data,
                                delta=0.05, cfg=fast_attack_cfg)
        assert len(cells) == 4
        for cell in cells:
            if cell.source == cell.target:
                assert cell.success_rate is None and not cell.applicable
            else:
                assert 0.0 <= cell.success_rate <= 1.0

    def test_prepared_runners_are_reused(self, trained_tiny_model, second_model, tiny_data, fast_attack_cfg):
        runner = OptUniRunner(fast_attack_cfg).prepare(trained_tiny_model, tiny_data)
        runners = {('EpochS', 'opt_uni'): runner}
        cells = transfer_matrix({'EpochS': trained_tiny_model, 'DaveS': second_model}, ['opt_uni'],
                                tiny_data, 0.05, fast_attack_cfg, runners=runners)
        expected = rate_of(runner.attack_dataset(second_model, tiny_data))
        cell = next(c for c in cells if c.source == 'EpochS' and c.target == 'DaveS')
        assert cell.success_rate == expected

    def test_needs_two_models(self, trained_tiny_model, tiny_data):
        with pytest.raises(ValidationError):
            transfer_matrix([trained_tiny_model], ['opt_uni'], tiny_data)

    def test_rejects_per_image_attacks(self, trained_tiny_model, second_model, tiny_data):
        with pytest.raises(ValidationError):
            transfer_matrix([trained_tiny_model, second_model], ['it_fgsm'], tiny_data)

    def test_name_models_suffixes_repeats(self, trained_tiny_model):
        assert list(name_models([trained_tiny_model] * 3)) == ['EpochS', 'EpochS-2', 'EpochS-3']


class TestDetection:
    def test_clean_as_adversarial_gives_recall_equal_to_fpr(self, trained_tiny_model, tiny_data):
        examples = unperturbed(trained_tiny_model, tiny_data)
        rows = detection_curve(trained_tiny_model, tiny_data, examples, [0.0001, 0.001, 0.01],
                               successful_only=False)
        for row in rows:
            assert row.recall == row.false_positive_rate
            assert row.attack_id == 'opt'

    def test_huge_threshold_flags_nothing(self, trained_tiny_model, tiny_data):
        examples = unperturbed(trained_tiny_model, tiny_data)
        rows = detection_curve(trained_tiny_model, tiny_data, examples, [10.0], successful_only=False)
        assert rows[0].recall == 0.0 and rows[0].false_positive_rate == 0.0

    def test_only_successful_examples_count(self, trained_tiny_model, tiny_data):
        with pytest.raises(ValidationError):
            detection_curve(trained_tiny_model, tiny_data, unperturbed(trained_tiny_model, tiny_data), [0.1])

    def test_false_positive_rows(self, trained_tiny_model, tiny_data):
        rows = false_positive_rows(trained_tiny_model, tiny_data, [0.001, 0.01], model_id='m')
        assert [r.attack_id for r in rows] == [ORIGINAL, ORIGINAL]
        assert all(r.recall == r.false_positive_rate and r.model_id == 'm' for r in rows)
        assert rows[0].false_positive_rate >= rows[1].false_positive_rate
