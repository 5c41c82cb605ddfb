"""
Scaled-down CNN steering regressors.

EpochS, DaveS and DeepS keep the relative complexity of the full-size Epoch,
Nvidia DAVE-2 and VGG16 driving models (DeepS > EpochS > DaveS in parameter
count) at desk scale. Every model ends in tanh, so predictions lie in [-1, 1].
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from steerguard.autodiff import ops
from steerguard.autodiff.tensor import Tensor, no_grad
from steerguard.core.errors import ValidationError

logger = logging.getLogger(__name__)

SUPPORTED_INPUT_SIZES = (64, 128)
PREDICT_BATCH = 64


@dataclass(frozen=True)
class ArchSpec:
    convs: Tuple[Tuple[int, int, int], ...]  # (out_channels, kernel, stride)
    hidden: Tuple[int, ...]                   # hidden dense widths; the last one is the feature tap


# one dense layer over the flattened image, see linear_model()
LINEAR_ARCH = 'Linear'

ARCHITECTURES = {
    'EpochS': ArchSpec(
        convs=((8, 3, 2), (16, 3, 2), (32, 3, 2)),
        hidden=(64,),
    ),
    'DaveS': ArchSpec(
        convs=((4, 3, 2), (6, 3, 2), (8, 3, 2), (8, 3, 1), (8, 3, 1)),
        hidden=(32, 16),
    ),
    'DeepS': ArchSpec(
        convs=((8, 3, 1), (8, 3, 2), (16, 3, 1), (16, 3, 2),
               (32, 3, 1), (32, 3, 2), (32, 3, 1), (32, 3, 2)),
        hidden=(256, 64),
    ),
}


class Layer:
    kind = 'layer'

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        return []

    def __call__(self, x: Tensor) -> Tensor:
        raise NotImplementedError


class ConvLayer(Layer):
    kind = 'conv'

    def __init__(self, weight: np.ndarray, bias: np.ndarray, stride: int):
        self.weight = Tensor(weight, requires_grad=True)
        self.bias = Tensor(bias, requires_grad=True)
        self.stride = stride

    def named_parameters(self):
        return [('weight', self.weight), ('bias', self.bias)]

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride)


class DenseLayer(Layer):
    kind = 'dense'

    def __init__(self, weight: np.ndarray, bias: np.ndarray):
        self.weight = Tensor(weight, requires_grad=True)
        self.bias = Tensor(bias, requires_grad=True)

    def named_parameters(self):
        return [('weight', self.weight), ('bias', self.bias)]

    def __call__(self, x):
        return ops.dense(x, self.weight, self.bias)


class Activation(Layer):
    def __init__(self, kind: str):
        if kind not in ('relu', 'tanh', 'flatten'):
            raise ValidationError(f'unknown activation {kind!r}')
        self.kind = kind

    def __call__(self, x):
        return getattr(ops, self.kind)(x)


def to_nchw(images: np.ndarray) -> np.ndarray:
    """(N,H,W,3) or (H,W,3) images -> (N,3,H,W)"""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 3:
        arr = arr[None]
    return np.ascontiguousarray(arr.transpose(0, 3, 1, 2))


def from_nchw(array: np.ndarray) -> np.ndarray:
    """(N,3,H,W) -> (N,H,W,3)"""
    return np.ascontiguousarray(np.asarray(array).transpose(0, 2, 3, 1))


class RegressionModel:
    """CNN mapping an H x W x 3 image in [0, 1] to a steering angle"""

    def __init__(self, arch_id: str, input_size: int, layers: Sequence[Layer],
                 feature_tap: Optional[int], provenance: Optional[dict] = None):
        self.arch_id = arch_id
        self.input_size = input_size
        self.layers = list(layers)
        self.feature_tap = feature_tap
        # how the weights were produced, e.g. {"defense": "distill", "parameter": 0.1}
        self.provenance = dict(provenance or {})

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        named = []
        for index, layer in enumerate(self.layers):
            for name, tensor in layer.named_parameters():
                named.append((f'layer{index}.{name}', tensor))
        return named

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    @property
    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def set_trainable(self, flag: bool) -> 'RegressionModel':
        for p in self.parameters():
            p.requires_grad = flag
            if not flag:
                p.zero_grad()
        return self

    def forward(self, x: Tensor, return_features: bool = False):
        """Run the network on an (N,3,H,W) tensor; output shape (N,1)"""
        features = None
        out = x
        for index, layer in enumerate(self.layers):
            out = layer(out)
            if index == self.feature_tap:
                features = out
        if return_features:
            if features is None:
                raise ValidationError(f'{self.arch_id} has no feature tap')
            return out, features
        return out

    __call__ = forward

    def check_images(self, images: np.ndarray) -> np.ndarray:
        arr = np.asarray(images, dtype=np.float64)
        if arr.ndim == 3:
            arr = arr[None]
        expected = (self.input_size, self.input_size, 3)
        if arr.ndim != 4 or arr.shape[1:] != expected:
            raise ValidationError(f'{self.arch_id} expects images of shape {expected}, got {arr.shape[1:]}')
        return arr

    def predict_batch(self, images: np.ndarray) -> np.ndarray:
        """Predictions for (N,H,W,3) images, shape (N,)"""
        arr = self.check_images(images)
        outputs = []
        with no_grad():
            for start in range(0, arr.shape[0], PREDICT_BATCH):
                batch = Tensor(to_nchw(arr[start:start + PREDICT_BATCH]))
                outputs.append(self.forward(batch).data.reshape(-1))
        return np.concatenate(outputs) if outputs else np.zeros(0)

    def features_batch(self, images: np.ndarray) -> np.ndarray:
        """Feature-tap activations for (N,H,W,3) images, shape (N,D)"""
        arr = self.check_images(images)
        outputs = []
        with no_grad():
            for start in range(0, arr.shape[0], PREDICT_BATCH):
                batch = Tensor(to_nchw(arr[start:start + PREDICT_BATCH]))
                _, feats = self.forward(batch, return_features=True)
                outputs.append(feats.data)
        return np.concatenate(outputs)

    def copy(self) -> 'RegressionModel':
        clone = build_model(self.arch_id, self.input_size, seed=0, strict_size=False) \
            if self.arch_id in ARCHITECTURES else _clone_layers(self)
        for (_, dst), (_, src) in zip(clone.named_parameters(), self.named_parameters()):
            dst.data = src.data.copy()
        clone.provenance = dict(self.provenance)
        return clone

    def __repr__(self):
        return f'RegressionModel({self.arch_id}, input_size={self.input_size}, params={self.num_parameters})'


def _clone_layers(model):
    layers = []
    for layer in model.layers:
        if isinstance(layer, ConvLayer):
            layers.append(ConvLayer(layer.weight.data, layer.bias.data, layer.stride))
        elif isinstance(layer, DenseLayer):
            layers.append(DenseLayer(layer.weight.data, layer.bias.data))
        else:
            layers.append(Activation(layer.kind))
    return RegressionModel(model.arch_id, model.input_size, layers, model.feature_tap)


def _uniform(rng, shape, fan_in):
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape)


def _check_size(input_size, strict_size):
    if strict_size:
        if input_size not in SUPPORTED_INPUT_SIZES:
            raise ValidationError(f'input_size must be one of {SUPPORTED_INPUT_SIZES}, got {input_size}')
    elif input_size < 8 or input_size % 8:
        raise ValidationError(f'input_size must be a multiple of 8 and >= 8, got {input_size}')


def build_model(arch_id: str, input_size: int = 64, seed: int = 0,
                strict_size: bool = True) -> RegressionModel:
    """
    Deterministically initialize one of the zoo architectures.

    Weights are uniform in +/- sqrt(6 / fan_in), biases zero. `strict_size=False`
    admits any multiple of 8 (used for fast tests).
    """
    if arch_id not in ARCHITECTURES:
        raise ValidationError(f'unknown arch {arch_id!r}; known: {", ".join(sorted(ARCHITECTURES))}')
    _check_size(input_size, strict_size)
    spec = ARCHITECTURES[arch_id]
    rng = np.random.default_rng(seed)

    layers: List[Layer] = []
    channels, spatial = 3, input_size
    for out_channels, kernel, stride in spec.convs:
        fan_in = channels * kernel * kernel
        layers.append(ConvLayer(
            _uniform(rng, (out_channels, channels, kernel, kernel), fan_in),
            np.zeros(out_channels),
            stride,
        ))
        layers.append(Activation('relu'))
        channels = out_channels
        spatial = -(-spatial // stride)

    layers.append(Activation('flatten'))
    features = channels * spatial * spatial
    feature_tap = None
    for width in spec.hidden:
        layers.append(DenseLayer(_uniform(rng, (features, width), features), np.zeros(width)))
        layers.append(Activation('relu'))
        feature_tap = len(layers) - 1
        features = width
    layers.append(DenseLayer(_uniform(rng, (features, 1), features), np.zeros(1)))
    layers.append(Activation('tanh'))

    model = RegressionModel(arch_id, input_size, layers, feature_tap)
    logger.debug(f'Built {model!r} (seed={seed})')
    return model


def linear_model(weights: np.ndarray, bias: float = 0.0) -> RegressionModel:
    """
    f(x) = w . x + bias over an H x W x 3 image, without a tanh head.

    Used as a closed-form reference target for the optimization attack.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 3 or w.shape[2] != 3 or w.shape[0] != w.shape[1]:
        raise ValidationError(f'linear weights must have shape (S,S,3), got {w.shape}')
    flat = to_nchw(w).reshape(-1, 1)
    layers = [Activation('flatten'), DenseLayer(flat, np.array([float(bias)]))]
    return RegressionModel(LINEAR_ARCH, w.shape[0], layers, feature_tap=None)


def predict(model: RegressionModel, image: np.ndarray) -> float:
    """Steering angle for a single H x W x 3 image"""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3:
        raise ValidationError(f'predict expects one H x W x 3 image, got shape {arr.shape}')
    return float(model.predict_batch(arr[None])[0])


def describe_model(model: RegressionModel) -> dict:
    """Descriptor used in reports: parameter count and float64 size in MB"""
    count = model.num_parameters
    return {
        'arch_id': model.arch_id,
        'input_size': model.input_size,
        'parameters': count,
        'size_mb': count * 8 / float(2 ** 20),
    }
