"""
Finite-difference gradient checking.
"""
import logging
from typing import Callable, Optional, Sequence

import numpy as np

from steerguard.autodiff.ops import record_relu_inputs
from steerguard.autodiff.tensor import Tensor, backward
from steerguard.core.errors import GradientError

logger = logging.getLogger(__name__)

STEP = 1e-5


def _evaluate(builder):
    with record_relu_inputs() as masks:
        loss = builder()
    return float(np.asarray(loss.data).reshape(-1)[0]), masks


def _same_pattern(a, b):
    return len(a) == len(b) and all(np.array_equal(x, y) for x, y in zip(a, b))


def grad_check(builder: Callable[[], Tensor], params: Sequence[Tensor], step: float = STEP,
               max_coords: Optional[int] = None, seed: int = 0) -> float:
    """
    Compare backward() gradients against central differences.

    Returns the max over checked coordinates of
    |analytic - numeric| / max(1e-8, |analytic| + |numeric|).

    Coordinates whose +/- step evaluations see a different relu sign pattern
    (the coordinate sits within the step of a kink, including exactly at 0)
    are skipped: the subgradient there is 0 by convention and no finite
    difference agrees with it. `max_coords` checks a seeded random subset of
    coordinates per parameter.
    """
    first, _ = _evaluate(builder)
    second, _ = _evaluate(builder)
    if first != second:
        raise GradientError(f'builder is not deterministic: {first!r} != {second!r}')

    for p in params:
        p.zero_grad()
    backward(builder(), inputs=params)
    analytic = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    rng = np.random.default_rng(seed)
    worst = 0.0
    skipped = 0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        for k in coords:
            original = flat[k]
            flat[k] = original + step
            plus, plus_masks = _evaluate(builder)
            flat[k] = original - step
            minus, minus_masks = _evaluate(builder)
            flat[k] = original
            if not _same_pattern(plus_masks, minus_masks):
                skipped += 1
                continue
            numeric = (plus - minus) / (2.0 * step)
            a = float(grad.reshape(-1)[k])
            err = abs(a - numeric) / max(1e-8, abs(a) + abs(numeric))
            worst = max(worst, err)
    if skipped:
        logger.debug(f'grad_check skipped {skipped} coordinates at relu kinks')
    return worst
