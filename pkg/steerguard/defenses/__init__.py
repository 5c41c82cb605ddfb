"""
Defenses: adversarial training, distillation, feature squeezing, overhead anomaly detection
"""
from steerguard.defenses.adversarial_training import (HardenedModel, adversarial_images,
                                                      adversarial_train)
from steerguard.defenses.anomaly import ResourceProfile, anomaly_flag, profile_inference
from steerguard.defenses.distillation import (DEFAULT_LAMBDAS, DistillConfig, DistilledModel,
                                              distill_train, distillation_loss,
                                              distillation_sweep)
from steerguard.defenses.squeezing import (DetectionResult, median_smooth, reduce_bit_depth,
                                           squeeze_detect, squeeze_scores)

__all__ = [
    'DEFAULT_LAMBDAS',
    'DetectionResult',
    'DistillConfig',
    'DistilledModel',
    'HardenedModel',
    'ResourceProfile',
    'adversarial_images',
    'adversarial_train',
    'anomaly_flag',
    'distill_train',
    'distillation_loss',
    'distillation_sweep',
    'median_smooth',
    'profile_inference',
    'reduce_bit_depth',
    'squeeze_detect',
    'squeeze_scores',
]
