"""
Compute-overhead anomaly detection.

Attacks that run at inference time (iterative gradient attacks, generators)
cost extra wall-clock time, allocations and backward passes per image. A
ResourceProfile records those proxies; anomaly_flag compares an observed
profile against a clean baseline.

The timed loop must run without concurrent load.
"""
import logging
import time
import tracemalloc
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from steerguard.attacks.base import AttackRunner
from steerguard.autodiff.tensor import backward_call_count
from steerguard.core.errors import ValidationError
from steerguard.models.zoo import RegressionModel, predict

logger = logging.getLogger(__name__)

CLEAN = 'clean'


@dataclass(frozen=True)
class ResourceProfile:
    mean_time_per_image: float
    peak_scratch_bytes: int
    backward_pass_count: float
    images: int = 0
    attack_id: str = CLEAN

    def to_dict(self) -> dict:
        return asdict(self)


def profile_inference(model: RegressionModel, images: np.ndarray,
                      runner: Optional[AttackRunner] = None) -> ResourceProfile:
    """
    Predict every image, with the runner's per-image work in front when given.

    Universal and generator runners must already hold their artifact; crafting
    it is not part of the profiled inference.
    """
    arr = model.check_images(images)
    if len(arr) == 0:
        raise ValidationError('profile_inference needs at least one image')
    if runner is not None and runner.needs_preparation:
        raise ValidationError(f'{runner.attack_id.value} must be prepared before profiling')

    started_tracing = not tracemalloc.is_tracing()
    if started_tracing:
        tracemalloc.start()
    tracemalloc.reset_peak()
    calls_before = backward_call_count()
    start = time.perf_counter()
    try:
        for image in arr:
            if runner is not None:
                image = runner.craft(model, image)
            predict(model, image)
        elapsed = time.perf_counter() - start
        _, peak = tracemalloc.get_traced_memory()
    finally:
        if started_tracing:
            tracemalloc.stop()
    backward_calls = backward_call_count() - calls_before

    profile = ResourceProfile(
        mean_time_per_image=elapsed / len(arr),
        peak_scratch_bytes=int(peak),
        backward_pass_count=backward_calls / len(arr),
        images=len(arr),
        attack_id=runner.attack_id.value if runner is not None else CLEAN,
    )
    logger.info(f'profile {profile.attack_id} on {model.arch_id}: '
                f'{profile.mean_time_per_image * 1000:.3f} ms/image, '
                f'peak {profile.peak_scratch_bytes} B, {profile.backward_pass_count:g} backward/image')
    return profile


def anomaly_flag(baseline: ResourceProfile, observed: ResourceProfile,
                 time_ratio_threshold: Optional[float] = None,
                 compute_ratio_threshold: Optional[float] = None) -> bool:
    """True iff observed/baseline time or scratch-memory ratio exceeds its threshold"""
    if time_ratio_threshold is None and compute_ratio_threshold is None:
        raise ValidationError('anomaly_flag needs a time or compute ratio threshold')
    flagged = False
    if time_ratio_threshold is not None:
        if baseline.mean_time_per_image <= 0:
            raise ValidationError('baseline time per image is zero; cannot form a time ratio')
        flagged |= observed.mean_time_per_image / baseline.mean_time_per_image > time_ratio_threshold
    if compute_ratio_threshold is not None:
        if baseline.peak_scratch_bytes <= 0:
            raise ValidationError('baseline scratch bytes are zero; cannot form a compute ratio')
        flagged |= observed.peak_scratch_bytes / baseline.peak_scratch_bytes > compute_ratio_threshold
    return bool(flagged)
