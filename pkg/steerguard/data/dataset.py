"""
Sample / Dataset containers and deterministic splitting
"""
from dataclasses import dataclass, field
from typing import Iterator, Sequence, Tuple

import numpy as np

from steerguard.core.errors import ValidationError

TRAIN = 'train'
TEST = 'test'


@dataclass(frozen=True, eq=False)
class Sample:
    image: np.ndarray
    angle: float
    id: str

    def __post_init__(self):
        image = np.asarray(self.image, dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != 3:
            raise ValidationError(f'sample {self.id}: image must be H x W x 3, got {image.shape}')
        if not np.all(np.isfinite(image)) or image.min() < 0.0 or image.max() > 1.0:
            raise ValidationError(f'sample {self.id}: pixels must lie in [0, 1]')
        if not -1.0 <= float(self.angle) <= 1.0:
            raise ValidationError(f'sample {self.id}: angle {self.angle} outside [-1, 1]')
        image.setflags(write=False)
        object.__setattr__(self, 'image', image)
        object.__setattr__(self, 'angle', float(self.angle))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered, immutable collection of samples; order drives universal crafting"""
    samples: Tuple[Sample, ...]
    split_tag: str = TRAIN
    seed: int = 0
    _images: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        samples = tuple(self.samples)
        object.__setattr__(self, 'samples', samples)
        if self.split_tag not in (TRAIN, TEST):
            raise ValidationError(f'split_tag must be train or test, got {self.split_tag!r}')
        ids = [s.id for s in samples]
        if len(set(ids)) != len(ids):
            raise ValidationError('sample ids must be unique')
        shapes = {s.image.shape for s in samples}
        if len(shapes) > 1:
            raise ValidationError(f'all images must share one shape, got {sorted(shapes)}')

    def __len__(self):
        return len(self.samples)

    def __iter__(self) -> Iterator[Sample]:
        return iter(self.samples)

    def __getitem__(self, index) -> Sample:
        return self.samples[index]

    @property
    def ids(self):
        return [s.id for s in self.samples]

    @property
    def images(self) -> np.ndarray:
        """Stacked (N,H,W,3) read-only view, built once"""
        if self._images is None:
            stacked = np.stack([s.image for s in self.samples]) if self.samples else np.zeros((0, 0, 0, 3))
            stacked.setflags(write=False)
            object.__setattr__(self, '_images', stacked)
        return self._images

    @property
    def labels(self) -> np.ndarray:
        return np.array([s.angle for s in self.samples], dtype=np.float64)

    @property
    def image_size(self) -> int:
        if not self.samples:
            raise ValidationError('empty dataset has no image size')
        return self.samples[0].image.shape[0]

    def subset(self, indices: Sequence[int], split_tag: str = None) -> 'Dataset':
        return Dataset(tuple(self.samples[i] for i in indices), split_tag or self.split_tag, self.seed)

    def relabel(self, angles: Sequence[float]) -> 'Dataset':
        """Same images with new angles (e.g. teacher predictions)"""
        if len(angles) != len(self.samples):
            raise ValidationError(f'need {len(self.samples)} angles, got {len(angles)}')
        return Dataset(
            tuple(Sample(s.image, float(a), s.id) for s, a in zip(self.samples, angles)),
            self.split_tag, self.seed,
        )


def require_nonempty(dataset: Dataset, what: str = 'dataset'):
    if dataset is None or len(dataset) == 0:
        raise ValidationError(f'{what} is empty')


def split(dataset: Dataset, test_fraction: float, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """
    Disjoint train/test partition; both parts keep the original sample order.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValidationError(f'test_fraction must be in (0, 1), got {test_fraction}')
    n = len(dataset)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n_test >= n:
        raise ValidationError(f'cannot split {n} samples with test_fraction={test_fraction}')
    order = np.random.default_rng(seed).permutation(n)
    test_idx = sorted(int(i) for i in order[:n_test])
    test_set = set(test_idx)
    train_idx = [i for i in range(n) if i not in test_set]
    return dataset.subset(train_idx, TRAIN), dataset.subset(test_idx, TEST)
