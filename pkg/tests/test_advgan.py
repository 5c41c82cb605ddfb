import numpy as np
import pytest

from steerguard.attacks import (AdvGanRunner, AdvGanUniRunner, AttackId, Discriminator, Generator,
                                advgan_generate, get_attack_runner, load_generator, save_generator,
                                train_advgan)
from steerguard.attacks.advgan import PER_IMAGE, UNIVERSAL
from steerguard.core.errors import ArtifactError, ValidationError
from steerguard.storage import LocalArtifactStore

from conftest import TINY


@pytest.fixture
def store(tmp_path):
    return LocalArtifactStore({'ARTIFACT_ROOT': str(tmp_path)})


class TestGenerator:
    @pytest.mark.parametrize('mode', [PER_IMAGE, UNIVERSAL])
    def test_output_bounded(self, mode, rng):
        generator = Generator(TINY, perturb_clip=0.2, mode=mode, seed=4)
        for _ in range(3):
            perturbation = generator.generate(rng.uniform(size=(TINY, TINY, 3)))
            assert perturbation.shape == (TINY, TINY, 3)
            assert np.abs(perturbation).max() <= 0.2

    def test_universal_ignores_the_image(self, rng):
        generator = Generator(TINY, mode=UNIVERSAL, seed=2)
        a = generator.generate(rng.uniform(size=(TINY, TINY, 3)))
        b = generator.generate(np.zeros((TINY, TINY, 3)))
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, generator.universal_perturbation)

    def test_per_image_has_no_single_perturbation(self):
        with pytest.raises(ValidationError):
            Generator(TINY).universal_perturbation

    @pytest.mark.parametrize('kwargs', [{'mode': 'noise'}, {'input_size': 12}])
    def test_rejects_bad_construction(self, kwargs):
        args = {'input_size': TINY, **kwargs}
        with pytest.raises(ValidationError):
            Generator(**args)

    def test_rejects_wrong_image_shape(self):
        with pytest.raises(ValidationError):
            Generator(TINY).generate(np.zeros((16, 16, 3)))

    def test_discriminator_outputs_probabilities(self, rng):
        from steerguard.autodiff.tensor import Tensor

        probs = Discriminator(TINY).forward(Tensor(rng.uniform(size=(4, 3, TINY, TINY)))).data
        assert probs.shape == (4, 1)
        assert ((probs > 0) & (probs < 1)).all()


class TestTraining:
    def test_deterministic_and_leaves_target_frozen(self, trained_tiny_model, tiny_data, fast_attack_cfg):
        before = trained_tiny_model.predict_batch(tiny_data.images)
        first = train_advgan(trained_tiny_model, tiny_data, fast_attack_cfg)
        second = train_advgan(trained_tiny_model, tiny_data, fast_attack_cfg)
        for (name, a), (_, b) in zip(first.named_parameters(), second.named_parameters()):
            np.testing.assert_array_equal(a.data, b.data, err_msg=name)
        np.testing.assert_array_equal(trained_tiny_model.predict_batch(tiny_data.images), before)

    def test_training_changes_the_generator(self, trained_tiny_model, tiny_data, fast_attack_cfg):
        untrained = Generator(TINY, mode=UNIVERSAL, seed=fast_attack_cfg.seed)
        trained = train_advgan(trained_tiny_model, tiny_data, fast_attack_cfg, mode=UNIVERSAL)
        assert not np.array_equal(untrained.universal_perturbation, trained.universal_perturbation)
        assert np.abs(trained.universal_perturbation).max() <= fast_attack_cfg.perturb_clip

    def test_generate_example(self, trained_tiny_model, tiny_data, fast_attack_cfg):
        generator = train_advgan(trained_tiny_model, tiny_data, fast_attack_cfg)
        example = advgan_generate(generator, tiny_data[0].image, trained_tiny_model, 0.05, 'a')
        assert example.attack_id is AttackId.ADVGAN
        assert example.iterations_used == 1
        assert example.sample_id == 'a'


class TestRunners:
    def test_mode_mismatch(self):
        with pytest.raises(ValidationError):
            AdvGanRunner(generator=Generator(TINY, mode=UNIVERSAL))
        with pytest.raises(ValidationError):
            AdvGanUniRunner(generator=Generator(TINY, mode=PER_IMAGE))

    def test_unprepared_runner(self, trained_tiny_model, tiny_data):
        runner = get_attack_runner('advgan')
        assert runner.needs_preparation
        with pytest.raises(ValidationError):
            runner.attack(trained_tiny_model, tiny_data[0].image)

    def test_universal_craft_matches_attack(self, trained_tiny_model, tiny_data):
        runner = AdvGanUniRunner(generator=Generator(TINY, mode=UNIVERSAL, seed=9))
        for sample in tiny_data.samples[:3]:
            example = runner.attack(trained_tiny_model, sample.image)
            np.testing.assert_allclose(runner.craft(trained_tiny_model, sample.image), example.adversarial)


class TestPersistence:
    @pytest.mark.parametrize('mode', [PER_IMAGE, UNIVERSAL])
    def test_round_trip(self, mode, store, rng):
        generator = Generator(TINY, perturb_clip=0.25, mode=mode, seed=6, noise_seed=11)
        path = save_generator(generator, 'gen.bin', store)
        loaded = load_generator(path, store)
        assert (loaded.mode, loaded.input_size, loaded.perturb_clip) == (mode, TINY, 0.25)
        image = rng.uniform(size=(TINY, TINY, 3))
        np.testing.assert_array_equal(loaded.generate(image), generator.generate(image))

    def test_perturbation_is_not_a_generator(self, store):
        from steerguard.attacks import UniversalPerturbation, save_perturbation

        path = save_perturbation(UniversalPerturbation(np.zeros((TINY, TINY, 3)), 0.0, 'EpochS', 0.3),
                                 'p.bin', store)
        with pytest.raises(ArtifactError):
            load_generator(path, store)
