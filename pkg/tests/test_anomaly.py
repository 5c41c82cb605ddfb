import threading

import numpy as np
import pytest

from steerguard.attacks import AttackConfig, ItFgsmRunner, OptUniRunner
from steerguard.autodiff import Tensor, backward, ops
from steerguard.core.errors import ValidationError
from steerguard.defenses import ResourceProfile, anomaly_flag, profile_inference


def profile(seconds, scratch):
    return ResourceProfile(mean_time_per_image=seconds, peak_scratch_bytes=scratch, backward_pass_count=0)


class TestProfiles:
    def test_clean_profile(self, trained_tiny_model, tiny_data):
        result = profile_inference(trained_tiny_model, tiny_data.images[:3])
        assert result.attack_id == 'clean'
        assert result.images == 3
        assert result.backward_pass_count == 0
        assert result.mean_time_per_image > 0

    def test_gradient_attack_counts_backward_passes(self, trained_tiny_model, tiny_data):
        runner = ItFgsmRunner(AttackConfig(fgsm_iters=4))
        result = profile_inference(trained_tiny_model, tiny_data.images[:2], runner)
        assert result.attack_id == 'it_fgsm'
        assert result.backward_pass_count == 4

    def test_backward_calls_on_other_threads_are_not_counted(self, trained_tiny_model, tiny_data):
        stop = threading.Event()

        def busy():
            while not stop.is_set():
                x = Tensor(np.ones(4), requires_grad=True)
                backward(ops.mean(x))

        worker = threading.Thread(target=busy)
        worker.start()
        try:
            clean = profile_inference(trained_tiny_model, tiny_data.images[:3])
            attacked = profile_inference(trained_tiny_model, tiny_data.images[:2],
                                         ItFgsmRunner(AttackConfig(fgsm_iters=3)))
        finally:
            stop.set()
            worker.join()
        assert clean.backward_pass_count == 0
        assert attacked.backward_pass_count == 3

    def test_runner_must_be_prepared(self, trained_tiny_model, tiny_data):
        with pytest.raises(ValidationError):
            profile_inference(trained_tiny_model, tiny_data.images[:2], OptUniRunner())

    def test_to_dict(self):
        assert profile(0.5, 10).to_dict()['peak_scratch_bytes'] == 10


class TestAnomalyFlag:
    @pytest.mark.parametrize('observed, time_ratio, compute_ratio, expected', [
        (profile(2.0, 100), 1.5, None, True),
        (profile(1.4, 100), 1.5, None, False),
        (profile(1.5, 100), 1.5, None, False),
        (profile(1.0, 300), None, 2.0, True),
        (profile(1.0, 150), None, 2.0, False),
        (profile(1.0, 300), 1.5, 4.0, False),
        (profile(3.0, 100), 1.5, 4.0, True),
    ])
    def test_ratios(self, observed, time_ratio, compute_ratio, expected):
        assert anomaly_flag(profile(1.0, 100), observed, time_ratio, compute_ratio) is expected

    def test_needs_a_threshold(self):
        with pytest.raises(ValidationError):
            anomaly_flag(profile(1.0, 1), profile(1.0, 1))

    def test_zero_baseline(self):
        with pytest.raises(ValidationError):
            anomaly_flag(profile(0.0, 1), profile(1.0, 1), time_ratio_threshold=1.5)
