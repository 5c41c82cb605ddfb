"""
Synthetic road scenes with derivable steering labels.

A scene shows a lane whose centre line follows x(y) = c0 + c1*y + c2*y^2
(x, y normalized; y = 0 at the bottom row, 1 at the horizon) drawn over a
noisy grass texture, with a yellow left boundary and a white right boundary.

    angle = clamp(K_CURVATURE * c2 + K_OFFSET * (c0 - 0.5), -1, 1)

Positive angles steer right: the lane bends right ahead (c2 > 0) or the lane
centre sits right of the camera (c0 > 0.5).
"""
import logging
from dataclasses import dataclass

import numpy as np

from steerguard.core.errors import ValidationError
from steerguard.data.dataset import TRAIN, Dataset, Sample

logger = logging.getLogger(__name__)

K_CURVATURE = 1.2
K_OFFSET = 2.0

HORIZON = 0.75          # share of the image height covered by road
LANE_WIDTH_NEAR = 0.70  # lane width at the bottom row (fraction of image width)
LANE_WIDTH_FAR = 0.15   # lane width at the horizon
LINE_WIDTH = 0.03

C0_RANGE = 0.15
C1_RANGE = 0.3
C2_RANGE = 0.6

GRASS = np.array([0.30, 0.45, 0.22])
ROAD = np.array([0.42, 0.42, 0.44])
SKY = np.array([0.60, 0.75, 0.92])
YELLOW = np.array([0.92, 0.80, 0.15])
WHITE = np.array([0.95, 0.95, 0.95])
NOISE = 0.05

SUPPORTED_SIZES = (64, 128)


@dataclass(frozen=True)
class RoadParams:
    c0: float
    c1: float
    c2: float

    @property
    def offset(self) -> float:
        return self.c0 - 0.5


def steering_label(c2: float, offset: float) -> float:
    return float(np.clip(K_CURVATURE * c2 + K_OFFSET * offset, -1.0, 1.0))


def sample_road_params(rng: np.random.Generator) -> RoadParams:
    return RoadParams(
        c0=0.5 + rng.uniform(-C0_RANGE, C0_RANGE),
        c1=rng.uniform(-C1_RANGE, C1_RANGE),
        c2=rng.uniform(-C2_RANGE, C2_RANGE),
    )


def draw_scene(params: RoadParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """Render one H x W x 3 scene in [0, 1]"""
    rows = np.arange(size, dtype=np.float64)
    t = (size - 1 - rows) / max(size - 1, 1)
    y = (t / HORIZON)[:, None]
    x = ((np.arange(size, dtype=np.float64) + 0.5) / size)[None, :]

    centre = params.c0 + params.c1 * y + params.c2 * y ** 2
    half = 0.5 * (LANE_WIDTH_NEAR + (LANE_WIDTH_FAR - LANE_WIDTH_NEAR) * np.minimum(y, 1.0))
    line = LINE_WIDTH * (1.0 - 0.6 * np.minimum(y, 1.0))
    d = x - centre
    below_horizon = np.broadcast_to(y <= 1.0, d.shape)

    image = np.empty((size, size, 3))
    image[:] = GRASS
    image[np.broadcast_to(y > 1.0, d.shape)] = SKY
    image[below_horizon & (np.abs(d) < half)] = ROAD
    image[below_horizon & (np.abs(d + half) < line)] = YELLOW
    image[below_horizon & (np.abs(d - half) < line)] = WHITE

    image += rng.normal(0.0, NOISE, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def generate_sample(seed: int, index: int, size: int) -> Sample:
    """Regenerate sample `index` of the dataset generated with `seed`"""
    rng = np.random.default_rng([seed, index])
    params = sample_road_params(rng)
    image = draw_scene(params, size, rng)
    return Sample(image, steering_label(params.c2, params.offset), f'syn-{seed}-{index:06d}')


def generate_synthetic(n: int, size: int = 64, seed: int = 0, split_tag: str = TRAIN,
                       strict_size: bool = True) -> Dataset:
    """n deterministic scenes; the same (n, size, seed) always yields identical data"""
    if n < 1:
        raise ValidationError(f'n must be >= 1, got {n}')
    if strict_size and size not in SUPPORTED_SIZES:
        raise ValidationError(f'size must be one of {SUPPORTED_SIZES}, got {size}')
    if size < 8:
        raise ValidationError(f'size must be >= 8, got {size}')
    samples = tuple(generate_sample(seed, i, size) for i in range(n))
    logger.info(f'Generated {n} synthetic scenes ({size}x{size}, seed={seed})')
    return Dataset(samples, split_tag, seed)
