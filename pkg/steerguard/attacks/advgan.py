"""
Generator-based attacks.

The generator maps an image (per_image mode) or one fixed Gaussian noise image
(universal mode) to a perturbation tanh(.) * perturb_clip. It is trained
against a frozen target model with

    L = L_y + alpha * L_GAN

where L_y pushes f(x + G(.)) past f(x) + s*(delta + margin) (one-sided squared
error) and L_GAN is the non-saturating cross-entropy against a small
discriminator. Discriminator and generator are updated alternately, 1:1.
"""
import logging
from typing import List, Optional, Tuple

import numpy as np

from steerguard.attacks.base import (AdversarialExample, AttackConfig, AttackId,
                                     AttackRunner, make_example)
from steerguard.autodiff import ops
from steerguard.autodiff.optim import ADAM, Optimizer
from steerguard.autodiff.tensor import Tensor, backward, no_grad
from steerguard.core.errors import ArtifactError, ValidationError
from steerguard.data.dataset import Dataset, require_nonempty
from steerguard.models.zoo import (Activation, ConvLayer, DenseLayer, Layer,
                                   RegressionModel, from_nchw, predict, to_nchw)
from steerguard.storage import get_artifact_store

logger = logging.getLogger(__name__)

PER_IMAGE = 'per_image'
UNIVERSAL = 'universal'
GENERATOR_KIND = 'generator'

ENCODER = (8, 16, 32)


class UpsampleLayer(Layer):
    kind = 'upsample'

    def __call__(self, x):
        return ops.upsample(x, 2)


class SigmoidLayer(Layer):
    kind = 'sigmoid'

    def __call__(self, x):
        return ops.sigmoid(x)


def _conv(rng, in_ch, out_ch, stride):
    fan_in = in_ch * 9
    limit = np.sqrt(6.0 / fan_in)
    return ConvLayer(rng.uniform(-limit, limit, size=(out_ch, in_ch, 3, 3)), np.zeros(out_ch), stride)


class _Network:
    layers: List[Layer]

    def named_parameters(self) -> List[Tuple[str, Tensor]]:
        named = []
        for index, layer in enumerate(self.layers):
            for name, tensor in layer.named_parameters():
                named.append((f'layer{index}.{name}', tensor))
        return named

    def parameters(self) -> List[Tensor]:
        return [t for _, t in self.named_parameters()]

    def run(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


class Generator(_Network):
    """Encoder (3 strided convs) / decoder (3 upsample + conv) perturbation network"""

    def __init__(self, input_size: int, perturb_clip: float = 0.3, mode: str = PER_IMAGE,
                 seed: int = 0, noise_seed: Optional[int] = None):
        if mode not in (PER_IMAGE, UNIVERSAL):
            raise ValidationError(f'generator mode must be {PER_IMAGE} or {UNIVERSAL}, got {mode!r}')
        if input_size < 8 or input_size % 8:
            raise ValidationError(f'generator input size must be a multiple of 8, got {input_size}')
        self.input_size = input_size
        self.perturb_clip = float(perturb_clip)
        self.mode = mode
        self.noise_seed = seed if noise_seed is None else noise_seed

        rng = np.random.default_rng(seed)
        channels = 3
        self.layers = []
        for width in ENCODER:
            self.layers += [_conv(rng, channels, width, 2), Activation('relu')]
            channels = width
        for width in reversed(ENCODER[:-1]):
            self.layers += [UpsampleLayer(), _conv(rng, channels, width, 1), Activation('relu')]
            channels = width
        self.layers += [UpsampleLayer(), _conv(rng, channels, 3, 1), Activation('tanh')]

        self.noise = None
        if mode == UNIVERSAL:
            noise_rng = np.random.default_rng(self.noise_seed)
            self.noise = noise_rng.standard_normal((1, 3, input_size, input_size))

    def forward(self, x: Tensor) -> Tensor:
        return ops.scale(self.run(x), self.perturb_clip)

    def perturb(self, images: Tensor) -> Tensor:
        """Perturbation batch matching `images` (N,3,H,W)"""
        if self.mode == UNIVERSAL:
            return ops.repeat_batch(self.forward(Tensor(self.noise)), images.shape[0])
        return self.forward(images)

    def generate(self, image: np.ndarray) -> np.ndarray:
        """H x W x 3 perturbation for one image, values in [-perturb_clip, perturb_clip]"""
        arr = np.asarray(image, dtype=np.float64)
        expected = (self.input_size, self.input_size, 3)
        if arr.shape != expected:
            raise ValidationError(f'generator expects images of shape {expected}, got {arr.shape}')
        with no_grad():
            return from_nchw(self.perturb(Tensor(to_nchw(arr))).data)[0]

    @property
    def universal_perturbation(self) -> np.ndarray:
        if self.mode != UNIVERSAL:
            raise ValidationError('only a universal generator has a single perturbation')
        with no_grad():
            return from_nchw(self.forward(Tensor(self.noise)).data)[0]


class Discriminator(_Network):
    """3 strided convs + dense + sigmoid: probability that an image is clean"""

    def __init__(self, input_size: int, seed: int = 0):
        rng = np.random.default_rng(seed)
        channels = 3
        self.layers = []
        for width in ENCODER:
            self.layers += [_conv(rng, channels, width, 2), Activation('relu')]
            channels = width
        features = channels * (-(-input_size // 8)) ** 2
        limit = np.sqrt(6.0 / features)
        self.layers += [
            Activation('flatten'),
            DenseLayer(rng.uniform(-limit, limit, size=(features, 1)), np.zeros(1)),
            SigmoidLayer(),
        ]

    def forward(self, x: Tensor) -> Tensor:
        return self.run(x)


def _one_sided_target_loss(pred: Tensor, targets: np.ndarray, sign: int) -> Tensor:
    """mean(max(0, s*(target - pred))^2)"""
    shortfall = ops.relu(ops.scale(ops.sub(Tensor(targets.reshape(pred.shape)), pred), float(sign)))
    return ops.mse_loss(shortfall, Tensor(np.zeros(pred.shape)))


def train_advgan(model: RegressionModel, dataset: Dataset, cfg: AttackConfig = None,
                 mode: str = PER_IMAGE) -> Generator:
    cfg = cfg or AttackConfig()
    require_nonempty(dataset)
    images = model.check_images(dataset.images)
    n = len(images)
    preds = model.predict_batch(images)
    targets = preds + cfg.target_sign * (cfg.delta + cfg.gan_target_margin)

    generator = Generator(model.input_size, cfg.perturb_clip, mode, seed=cfg.seed, noise_seed=cfg.seed)
    discriminator = Discriminator(model.input_size, seed=cfg.seed + 1)
    opt_g = Optimizer(generator.parameters(), ADAM, cfg.gan_lr)
    opt_d = Optimizer(discriminator.parameters(), ADAM, cfg.gan_lr)
    rng = np.random.default_rng(cfg.seed)

    for epoch in range(cfg.gan_epochs):
        order = rng.permutation(n)
        d_total = g_total = 0.0
        batches = 0
        for start in range(0, n, cfg.gan_batch_size):
            idx = order[start:start + cfg.gan_batch_size]
            clean = Tensor(to_nchw(images[idx]))
            ones = Tensor(np.ones((len(idx), 1)))
            zeros = Tensor(np.zeros((len(idx), 1)))

            # discriminator step
            with no_grad():
                fake = Tensor(clean.data + generator.perturb(clean).data)
            d_loss = ops.add(ops.bce_loss(discriminator.forward(clean), ones),
                             ops.bce_loss(discriminator.forward(fake), zeros))
            opt_d.zero_grad()
            backward(d_loss, inputs=opt_d.params)
            opt_d.step()

            # generator step; training sees x + G(x) without the [0, 1] clamp
            adversarial = ops.add(clean, generator.perturb(clean))
            gan_loss = ops.bce_loss(discriminator.forward(adversarial), ones)
            target_loss = _one_sided_target_loss(model.forward(adversarial), targets[idx], cfg.target_sign)
            g_loss = ops.add(target_loss, ops.scale(gan_loss, cfg.gan_alpha))
            opt_g.zero_grad()
            backward(g_loss, inputs=opt_g.params)
            opt_g.step()

            d_total += d_loss.item()
            g_total += g_loss.item()
            batches += 1
        logger.debug(f'advgan {mode} epoch {epoch + 1}/{cfg.gan_epochs}: '
                     f'd_loss={d_total / batches:.4f} g_loss={g_total / batches:.4f}')

    opt_g.zero_grad()
    opt_d.zero_grad()
    logger.info(f'Trained {mode} generator against {model.arch_id} ({cfg.gan_epochs} epochs)')
    return generator


def advgan_generate(generator: Generator, image: np.ndarray, model: RegressionModel,
                    delta: float, sample_id: Optional[str] = None) -> AdversarialExample:
    x = model.check_images(image)[0]
    if generator.input_size != model.input_size:
        raise ValidationError(f'generator built for {generator.input_size}px images, '
                              f'model expects {model.input_size}px')
    attack_id = AttackId.ADVGAN_UNI if generator.mode == UNIVERSAL else AttackId.ADVGAN
    perturbation = generator.generate(x)
    return make_example(model, x, perturbation, attack_id, delta, 1, predict(model, x), sample_id)


def save_generator(generator: Generator, path: str, store=None) -> str:
    store = store or get_artifact_store()
    metadata = {
        'input_size': generator.input_size,
        'mode': generator.mode,
        'noise_seed': generator.noise_seed,
        'perturb_clip': generator.perturb_clip,
    }
    arrays = [(name, t.data) for name, t in generator.named_parameters()]
    if generator.noise is not None:
        arrays.append(('noise', generator.noise))
    return store.save(path, GENERATOR_KIND, arrays, metadata)


def load_generator(path: str, store=None) -> Generator:
    store = store or get_artifact_store()
    header, arrays = store.load(path, expected_kind=GENERATOR_KIND)
    metadata = header.get('metadata') or {}
    try:
        generator = Generator(int(metadata['input_size']), float(metadata['perturb_clip']),
                              metadata['mode'], noise_seed=int(metadata['noise_seed']))
    except (KeyError, TypeError) as e:
        raise ArtifactError(f'generator metadata is incomplete: {e}')
    for name, tensor in generator.named_parameters():
        if name not in arrays or arrays[name].shape != tensor.shape:
            raise ArtifactError(f'generator payload lacks a matching {name}')
        tensor.data = arrays[name]
    if generator.mode == UNIVERSAL:
        if 'noise' not in arrays:
            raise ArtifactError('universal generator payload lacks its noise input')
        generator.noise = arrays['noise']
    return generator


class AdvGanRunner(AttackRunner):
    attack_id = AttackId.ADVGAN
    mode = PER_IMAGE

    def __init__(self, config: AttackConfig = None, generator: Generator = None):
        super().__init__(config)
        if generator is not None and generator.mode != self.mode:
            raise ValidationError(f'{self.attack_id.value} needs a {self.mode} generator, '
                                  f'got {generator.mode}')
        self.generator = generator

    @property
    def needs_preparation(self):
        return self.generator is None

    def prepare(self, model, dataset):
        self.generator = train_advgan(model, dataset, self.config, self.mode)
        return self

    def attack(self, model, image, sample_id=None):
        if self.generator is None:
            raise ValidationError(f'{self.attack_id.value} needs a trained or loaded generator')
        return advgan_generate(self.generator, image, model, self.config.delta, sample_id)

    def craft(self, model, image):
        if self.generator is None:
            raise ValidationError(f'{self.attack_id.value} needs a trained or loaded generator')
        x = model.check_images(image)[0]
        return np.clip(x + self.generator.generate(x), 0.0, 1.0)


class AdvGanUniRunner(AdvGanRunner):
    attack_id = AttackId.ADVGAN_UNI
    mode = UNIVERSAL

    def craft(self, model, image):
        # the noise input is fixed, so one generator pass serves every image
        if self.generator is None:
            raise ValidationError(f'{self.attack_id.value} needs a trained or loaded generator')
        if getattr(self, '_perturbation', None) is None:
            self._perturbation = self.generator.universal_perturbation
        return np.clip(model.check_images(image)[0] + self._perturbation, 0.0, 1.0)

    def prepare(self, model, dataset):
        self._perturbation = None
        return super().prepare(model, dataset)
