"""
Differentiable operators.

Only the operators the models, attacks and defenses need are provided; shapes
must match exactly (no general broadcasting). Convolutions use "same" zero
padding and a configurable stride.
"""
import contextlib
import threading
from typing import Dict, Optional, Sequence, Type

import numpy as np

from steerguard.autodiff.tensor import Function, Tensor
from steerguard.core.errors import ValidationError

_probe = threading.local()
BCE_EPS = 1e-12


@contextlib.contextmanager
def record_relu_inputs():
    """Collect the sign pattern of every relu input evaluated inside the block"""
    masks = []
    previous = getattr(_probe, 'masks', None)
    _probe.masks = masks
    try:
        yield masks
    finally:
        _probe.masks = previous


def _same_shape(name, a, b):
    if a.shape != b.shape:
        raise ValidationError(f'{name}: shape mismatch {a.shape} vs {b.shape}')


def _same_padding(size, kernel, stride):
    out = -(-size // stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return out, total // 2, total - total // 2


class Dense(Function):
    def forward(self, x, w, b):
        if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
            raise ValidationError(f'dense expects x (N,F), W (F,O), b (O,); '
                                  f'got {x.shape}, {w.shape}, {b.shape}')
        if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
            raise ValidationError(f'dense: incompatible shapes {x.shape}, {w.shape}, {b.shape}')
        self.x, self.w = x, w
        return x @ w + b

    def backward(self, grad):
        gx = grad @ self.w.T if self.needs_input_grad[0] else None
        gw = self.x.T @ grad if self.needs_input_grad[1] else None
        gb = grad.sum(axis=0) if self.needs_input_grad[2] else None
        return gx, gw, gb


class Conv2d(Function):
    def forward(self, x, w, b, stride=1):
        if not isinstance(stride, (int, np.integer)) or stride < 1:
            raise ValidationError(f'conv2d: stride must be an integer >= 1, got {stride!r}')
        if x.ndim != 4 or w.ndim != 4 or b.ndim != 1:
            raise ValidationError(f'conv2d expects x (N,C,H,W), W (O,C,kh,kw), b (O,); '
                                  f'got {x.shape}, {w.shape}, {b.shape}')
        n, c, h, wd = x.shape
        o, c_w, kh, kw = w.shape
        if c != c_w or b.shape[0] != o:
            raise ValidationError(f'conv2d: channel mismatch x {x.shape}, W {w.shape}, b {b.shape}')

        ho, top, bottom = _same_padding(h, kh, stride)
        wo, left, right = _same_padding(wd, kw, stride)
        xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
        out = np.zeros((n, ho, wo, o))
        for i in range(kh):
            for j in range(kw):
                patch = xp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
                out += np.tensordot(patch, w[:, :, i, j], axes=([1], [1]))
        out += b
        self.xp, self.w, self.stride = xp, w, stride
        self.crop = (top, h, left, wd)
        self.out_hw = (ho, wo)
        return np.ascontiguousarray(out.transpose(0, 3, 1, 2))

    def backward(self, grad):
        xp, w, s = self.xp, self.w, self.stride
        ho, wo = self.out_hw
        _, _, kh, kw = w.shape
        gt = grad.transpose(0, 2, 3, 1)
        need_x, need_w, need_b = self.needs_input_grad
        gw = np.zeros_like(w) if need_w else None
        gxp = np.zeros_like(xp) if need_x else None
        for i in range(kh):
            for j in range(kw):
                rows = slice(i, i + s * (ho - 1) + 1, s)
                cols = slice(j, j + s * (wo - 1) + 1, s)
                if need_w:
                    gw[:, :, i, j] = np.tensordot(gt, xp[:, :, rows, cols], axes=([0, 1, 2], [0, 2, 3]))
                if need_x:
                    back = np.tensordot(gt, w[:, :, i, j], axes=([3], [0]))
                    gxp[:, :, rows, cols] += back.transpose(0, 3, 1, 2)
        gx = None
        if need_x:
            top, h, left, wd = self.crop
            gx = gxp[:, :, top:top + h, left:left + wd]
        gb = grad.sum(axis=(0, 2, 3)) if need_b else None
        return gx, gw, gb


class ReLU(Function):
    def forward(self, x):
        masks = getattr(_probe, 'masks', None)
        if masks is not None:
            masks.append(x > 0)
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        # subgradient 0 at the kink
        return (grad * self.mask,)


class Tanh(Function):
    def forward(self, x):
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad):
        return (grad * (1.0 - self.out ** 2),)


class Sigmoid(Function):
    def forward(self, x):
        self.out = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Flatten(Function):
    def forward(self, x):
        if x.ndim < 2:
            raise ValidationError(f'flatten expects a batch dimension, got shape {x.shape}')
        self.in_shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return (grad.reshape(self.in_shape),)


class Add(Function):
    def forward(self, a, b):
        _same_shape('add', a, b)
        return a + b

    def backward(self, grad):
        return grad, grad


class Sub(Function):
    def forward(self, a, b):
        _same_shape('sub', a, b)
        return a - b

    def backward(self, grad):
        return grad, -grad


class Scale(Function):
    def forward(self, x, factor=1.0):
        self.factor = float(factor)
        return x * self.factor

    def backward(self, grad):
        return (grad * self.factor,)


class Mean(Function):
    def forward(self, x):
        self.in_shape = x.shape
        return np.array(x.mean())

    def backward(self, grad):
        return (np.full(self.in_shape, float(grad) / int(np.prod(self.in_shape))),)


class MseLoss(Function):
    def forward(self, pred, target):
        _same_shape('mse_loss', pred, target)
        self.diff = pred - target
        return np.array(np.mean(self.diff ** 2))

    def backward(self, grad):
        g = float(grad) * 2.0 * self.diff / self.diff.size
        return g, -g


class L2Norm(Function):
    """Euclidean norm of the whole tensor, or of each row when axis=1"""

    def forward(self, x, axis=None):
        if axis not in (None, 1):
            raise ValidationError(f'l2_norm: axis must be None or 1, got {axis!r}')
        if axis == 1 and x.ndim != 2:
            raise ValidationError(f'l2_norm(axis=1) expects a 2-D tensor, got shape {x.shape}')
        self.x, self.axis = x, axis
        if axis is None:
            self.norm = np.array(np.sqrt(np.sum(x ** 2)))
        else:
            self.norm = np.sqrt(np.sum(x ** 2, axis=1))
        return self.norm

    def backward(self, grad):
        if self.axis is None:
            norm = float(self.norm)
            if norm == 0.0:
                return (np.zeros_like(self.x),)
            return (float(grad) * self.x / norm,)
        safe = np.where(self.norm > 0, self.norm, 1.0)
        scale = np.where(self.norm > 0, grad / safe, 0.0)
        return (self.x * scale[:, None],)


class BceLoss(Function):
    """Binary cross-entropy on probabilities, mean over elements"""

    def forward(self, prob, target):
        _same_shape('bce_loss', prob, target)
        self.p = np.clip(prob, BCE_EPS, 1.0 - BCE_EPS)
        self.t = target
        loss = -(target * np.log(self.p) + (1.0 - target) * np.log(1.0 - self.p))
        return np.array(loss.mean())

    def backward(self, grad):
        n = self.p.size
        gp = float(grad) * (-self.t / self.p + (1.0 - self.t) / (1.0 - self.p)) / n
        gt = float(grad) * (np.log(1.0 - self.p) - np.log(self.p)) / n
        return gp, gt


class Upsample(Function):
    """Nearest-neighbour upsampling of the two spatial axes"""

    def forward(self, x, factor=2):
        if x.ndim != 4 or not isinstance(factor, (int, np.integer)) or factor < 1:
            raise ValidationError(f'upsample expects (N,C,H,W) and integer factor >= 1, '
                                  f'got {x.shape}, {factor!r}')
        self.factor = factor
        return x.repeat(factor, axis=2).repeat(factor, axis=3)

    def backward(self, grad):
        n, c, h, w = grad.shape
        f = self.factor
        return (grad.reshape(n, c, h // f, f, w // f, f).sum(axis=(3, 5)),)


class RepeatBatch(Function):
    """Tile a batch-of-one tensor n times along the batch axis"""

    def forward(self, x, n=1):
        if x.shape[0] != 1 or n < 1:
            raise ValidationError(f'repeat_batch expects a leading extent of 1 and n >= 1, '
                                  f'got {x.shape}, n={n}')
        return np.repeat(x, n, axis=0)

    def backward(self, grad):
        return (grad.sum(axis=0, keepdims=True),)


OPS: Dict[str, Type[Function]] = {
    'dense': Dense,
    'conv2d': Conv2d,
    'relu': ReLU,
    'tanh': Tanh,
    'sigmoid': Sigmoid,
    'flatten': Flatten,
    'add': Add,
    'sub': Sub,
    'scale': Scale,
    'mean': Mean,
    'mse_loss': MseLoss,
    'l2_norm': L2Norm,
    'bce_loss': BceLoss,
    'upsample': Upsample,
    'repeat_batch': RepeatBatch,
}

_ARITY = {
    'dense': 3, 'conv2d': 3, 'relu': 1, 'tanh': 1, 'sigmoid': 1, 'flatten': 1,
    'add': 2, 'sub': 2, 'scale': 1, 'mean': 1, 'mse_loss': 2, 'l2_norm': 1,
    'bce_loss': 2, 'upsample': 1, 'repeat_batch': 1,
}


def op_forward(op: str, inputs: Sequence[Tensor], attrs: Optional[dict] = None) -> Tensor:
    """Apply a registered operator by name"""
    if op not in OPS:
        raise ValidationError(f'unknown op {op!r}; known: {", ".join(sorted(OPS))}')
    if len(inputs) != _ARITY[op]:
        raise ValidationError(f'{op} takes {_ARITY[op]} inputs, got {len(inputs)}')
    return OPS[op].apply(*inputs, **(attrs or {}))


def _as_tensor(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def dense(x, w, b):
    return Dense.apply(x, w, b)


def conv2d(x, w, b, stride=1):
    return Conv2d.apply(x, w, b, stride=stride)


def relu(x):
    return ReLU.apply(x)


def tanh(x):
    return Tanh.apply(x)


def sigmoid(x):
    return Sigmoid.apply(x)


def flatten(x):
    return Flatten.apply(x)


def add(a, b):
    return Add.apply(_as_tensor(a), _as_tensor(b))


def sub(a, b):
    return Sub.apply(_as_tensor(a), _as_tensor(b))


def scale(x, factor):
    return Scale.apply(x, factor=factor)


def mean(x):
    return Mean.apply(x)


def mse_loss(pred, target):
    return MseLoss.apply(pred, _as_tensor(target))


def l2_norm(x, axis=None):
    return L2Norm.apply(x, axis=axis)


def bce_loss(prob, target):
    return BceLoss.apply(prob, _as_tensor(target))


def upsample(x, factor=2):
    return Upsample.apply(x, factor=factor)


def repeat_batch(x, n):
    return RepeatBatch.apply(x, n=n)
