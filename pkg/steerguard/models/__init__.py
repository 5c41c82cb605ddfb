"""
Steering model zoo, training and persistence
"""
from steerguard.models.persistence import load_model, save_model
from steerguard.models.training import (TrainConfig, baseline_rmse, eval_rmse, fit,
                                        rmse, train_model)
from steerguard.models.zoo import (ARCHITECTURES, RegressionModel, build_model,
                                   describe_model, linear_model, predict)

__all__ = [
    'ARCHITECTURES',
    'RegressionModel',
    'TrainConfig',
    'baseline_rmse',
    'build_model',
    'describe_model',
    'eval_rmse',
    'fit',
    'linear_model',
    'load_model',
    'predict',
    'rmse',
    'save_model',
    'train_model',
]
