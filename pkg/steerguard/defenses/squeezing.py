"""
Feature squeezing detection.

An input is flagged when the prediction moves by more than a threshold after
either squeezer: bit-depth reduction or median smoothing.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from steerguard.core.errors import ValidationError
from steerguard.models.zoo import RegressionModel

DEFAULT_BITS = 4
DEFAULT_MEDIAN_K = 2


def reduce_bit_depth(image: np.ndarray, bits: int = DEFAULT_BITS) -> np.ndarray:
    """x -> round(x * (2^bits - 1)) / (2^bits - 1), ties rounded away from zero"""
    if not isinstance(bits, (int, np.integer)) or not 1 <= bits <= 8:
        raise ValidationError(f'bits must be an integer in [1, 8], got {bits!r}')
    levels = float(2 ** bits - 1)
    scaled = np.asarray(image, dtype=np.float64) * levels
    return np.sign(scaled) * np.floor(np.abs(scaled) + 0.5) / levels


def median_smooth(image: np.ndarray, k: int = DEFAULT_MEDIAN_K) -> np.ndarray:
    """
    k x k median filter per channel, window anchored at the top-left pixel.

    The right and bottom edges are reflect-padded by k - 1 so the output keeps
    the input size. Even windows take the mean of the two middle values.
    """
    if not isinstance(k, (int, np.integer)) or k < 2:
        raise ValidationError(f'median window must be an integer >= 2, got {k!r}')
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3:
        raise ValidationError(f'median_smooth expects an H x W x C image, got shape {arr.shape}')
    if arr.shape[0] < k or arr.shape[1] < k:
        raise ValidationError(f'image {arr.shape[:2]} is smaller than the {k}x{k} window')
    padded = np.pad(arr, ((0, k - 1), (0, k - 1), (0, 0)), mode='reflect')
    windows = sliding_window_view(padded, (k, k), axis=(0, 1))
    return np.median(windows.reshape(*arr.shape, k * k), axis=-1)


@dataclass(frozen=True)
class DetectionResult:
    score_bitdepth: float
    score_median: float
    threshold: float

    @property
    def score(self) -> float:
        return max(self.score_bitdepth, self.score_median)

    @property
    def flagged(self) -> bool:
        return self.score > self.threshold


def squeeze_scores(model: RegressionModel, images: np.ndarray, bits: int = DEFAULT_BITS,
                   k: int = DEFAULT_MEDIAN_K) -> np.ndarray:
    """(N, 2) array of |f(x) - f(bitdepth(x))| and |f(x) - f(median(x))|"""
    arr = model.check_images(images)
    base = model.predict_batch(arr)
    reduced = model.predict_batch(reduce_bit_depth(arr, bits))
    smoothed = model.predict_batch(np.stack([median_smooth(img, k) for img in arr]))
    return np.stack([np.abs(base - reduced), np.abs(base - smoothed)], axis=1)


def squeeze_detect(model: RegressionModel, image: np.ndarray, threshold: float,
                   bits: int = DEFAULT_BITS, k: int = DEFAULT_MEDIAN_K) -> DetectionResult:
    if not threshold > 0:
        raise ValidationError(f'threshold must be > 0, got {threshold}')
    scores = squeeze_scores(model, image, bits, k)[0]
    return DetectionResult(float(scores[0]), float(scores[1]), float(threshold))
