"""Dense, ReLU, 3×3 convolution and flatten layers.

Parameters are stored as 32-bit floats; all arithmetic, including the sums in
matrix products, is done in 64 bits.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .base import Layer, SpecError


def init_bound(fan_in, fan_out):
    """Bound of the uniform initialisation for a layer."""
    return np.sqrt(6.0 / (fan_in + fan_out))


def _glorot(rng, shape, fan_in, fan_out):
    bound = init_bound(fan_in, fan_out)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Dense(Layer):
    """Affine map ``x @ weight + bias`` on flat inputs."""
    kind = 'dense'
    parameterized = True

    def __init__(self, units):
        self.units = int(units)
        if self.units < 1:
            raise SpecError(f'dense: units must be positive; got {units}')

    def describe(self):
        return dict(kind=self.kind, units=self.units)

    def output_shape(self, input_shape):
        if len(input_shape) != 1:
            raise SpecError(f'dense: needs flat input; got {input_shape}')
        return (self.units,)

    def init_params(self, input_shape, rng):
        fan_in = input_shape[0]
        return dict(
            weight=_glorot(rng, (fan_in, self.units), fan_in, self.units),
            bias=np.zeros(self.units, dtype=np.float32),
        )

    def forward(self, params, x):
        w = params['weight'].astype(np.float64)
        return x @ w + params['bias'], x

    def backward(self, params, cache, grad):
        w = params['weight'].astype(np.float64)
        return grad @ w.T, dict(weight=cache.T @ grad, bias=grad.sum(axis=0))


class ReLU(Layer):
    kind = 'relu'

    def output_shape(self, input_shape):
        return tuple(input_shape)

    def forward(self, params, x):
        mask = x > 0
        return x * mask, mask

    def backward(self, params, cache, grad):
        return grad * cache, {}


class Flatten(Layer):
    kind = 'flatten'

    def output_shape(self, input_shape):
        return (int(np.prod(input_shape)),)

    def forward(self, params, x):
        return x.reshape(len(x), -1), x.shape

    def backward(self, params, cache, grad):
        return grad.reshape(cache), {}


class Conv2d(Layer):
    """3×3 convolution, stride 1, zero 'same' padding.

    Acts on per-sample shape ``(channels, height, width)``; the weight has
    shape ``(out_channels, in_channels, 3, 3)``.
    """
    kind = 'conv2d'
    parameterized = True

    def __init__(self, channels):
        self.channels = int(channels)
        if self.channels < 1:
            raise SpecError(f'conv2d: channels must be positive; got '
                            f'{channels}')

    def describe(self):
        return dict(kind=self.kind, channels=self.channels)

    def output_shape(self, input_shape):
        if len(input_shape) != 3:
            raise SpecError(f'conv2d: needs (channels, height, width) input; '
                            f'got {input_shape}')
        return (self.channels,) + tuple(input_shape[1:])

    def init_params(self, input_shape, rng):
        c_in = input_shape[0]
        shape = (self.channels, c_in, 3, 3)
        return dict(
            weight=_glorot(rng, shape, 9 * c_in, 9 * self.channels),
            bias=np.zeros(self.channels, dtype=np.float32),
        )

    @staticmethod
    def _windows(x):
        padded = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
        # (batch, channels, height, width, 3, 3)
        return sliding_window_view(padded, (3, 3), axis=(2, 3))

    def forward(self, params, x):
        w = params['weight'].astype(np.float64)
        windows = self._windows(x)
        out = np.tensordot(windows, w, axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + params['bias'][:, None, None]
        return out, windows

    def backward(self, params, cache, grad):
        w = params['weight'].astype(np.float64)

        # Input gradient: correlate the padded output gradient with the
        # spatially flipped kernel
        flipped = w[:, :, ::-1, ::-1]
        grad_in = np.tensordot(self._windows(grad), flipped,
                               axes=([1, 4, 5], [0, 2, 3]))

        grad_w = np.tensordot(grad, cache, axes=([0, 2, 3], [0, 2, 3]))
        return grad_in.transpose(0, 3, 1, 2), \
            dict(weight=grad_w, bias=grad.sum(axis=(0, 2, 3)))
