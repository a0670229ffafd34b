from typing import Dict, Tuple
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ...errors import CacheError, ShapeError
from .specs import Conv1D, Dense, Flatten, MaxPool1D, ReLU


class Layer:
    """Runtime half of a LayerSpec: parameters, last gradients and the forward cache."""

    def __init__(self, spec, input_shape, index=0, params=None):
        self.spec = spec
        self.index = index
        self.input_shape = tuple(input_shape)
        self.output_shape = spec.output_shape(self.input_shape, index)
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.cache = None
        shapes = spec.param_shapes()
        if params is not None:
            for name, shape in shapes.items():
                value = np.asarray(params[name])
                if value.shape != tuple(shape):
                    raise ShapeError(f"parameter '{name}' shape mismatch", index, shape, value.shape)
                self.params[name] = value
        elif shapes:
            self.params = {name: np.zeros(shape, dtype=np.float32) for name, shape in shapes.items()}

    @property
    def kind(self):
        return self.spec.kind

    def forward(self, x):
        if x.ndim < 2 or x.shape[0] < 1 or tuple(x.shape[1:]) != self.input_shape:
            raise ShapeError(f"{self.kind} input shape mismatch", self.index,
                             ("batch",) + self.input_shape, x.shape)
        out = self._forward(x)
        return out

    def backward(self, grad_out):
        if self.cache is None:
            raise CacheError(f"{self.kind} layer {self.index}: backward without a matching forward")
        batch = self.cache[0]
        if tuple(grad_out.shape) != (batch,) + self.output_shape:
            raise ShapeError(f"{self.kind} gradient shape mismatch", self.index,
                             (batch,) + self.output_shape, grad_out.shape)
        grad_in, grads = self._backward(grad_out)
        self.cache = None
        self.grads = grads
        return grad_in, grads

    def _forward(self, x):
        raise NotImplementedError

    def _backward(self, grad_out):
        raise NotImplementedError


class Conv1DLayer(Layer):

    def _forward(self, x):
        spec = self.spec
        batch = x.shape[0]
        out_len = self.output_shape[1]
        pad = spec.padding
        xp = np.pad(x, ((0, 0), (0, 0), (pad, pad))) if pad else x
        windows = sliding_window_view(xp, spec.kernel_size, axis=2)[:, :, ::spec.stride, :][:, :, :out_len, :]
        # [batch, out_len, in_channels * kernel]
        cols = np.ascontiguousarray(windows.transpose(0, 2, 1, 3)).reshape(batch, out_len, -1)
        weight = self.params["weight"].reshape(spec.out_channels, -1)
        out = cols @ weight.T + self.params["bias"]
        self.cache = (batch, cols, xp.shape[2])
        return np.ascontiguousarray(out.transpose(0, 2, 1))

    def _backward(self, grad_out):
        spec = self.spec
        batch, cols, padded_len = self.cache
        out_len = self.output_shape[1]
        g = np.ascontiguousarray(grad_out.transpose(0, 2, 1))
        weight = self.params["weight"].reshape(spec.out_channels, -1)
        grad_w = (g.reshape(-1, spec.out_channels).T @ cols.reshape(-1, cols.shape[2]))
        grad_b = grad_out.sum(axis=(0, 2))
        grad_cols = (g @ weight).reshape(batch, out_len, spec.in_channels, spec.kernel_size)
        grad_xp = np.zeros((batch, spec.in_channels, padded_len), dtype=grad_out.dtype)
        span = spec.stride * (out_len - 1) + 1
        for k in range(spec.kernel_size):
            grad_xp[:, :, k:k + span:spec.stride] += grad_cols[:, :, :, k].transpose(0, 2, 1)
        length = self.input_shape[1]
        grad_in = grad_xp[:, :, spec.padding:spec.padding + length]
        grads = {"weight": grad_w.reshape(self.params["weight"].shape), "bias": grad_b}
        return np.ascontiguousarray(grad_in), grads


class DenseLayer(Layer):

    def _forward(self, x):
        self.cache = (x.shape[0], x)
        return x @ self.params["weight"].T + self.params["bias"]

    def _backward(self, grad_out):
        _, x = self.cache
        grads = {"weight": grad_out.T @ x, "bias": grad_out.sum(axis=0)}
        return grad_out @ self.params["weight"], grads


class ReLULayer(Layer):

    def _forward(self, x):
        mask = x > 0
        self.cache = (x.shape[0], mask)
        return np.where(mask, x, np.zeros((), dtype=x.dtype))

    def _backward(self, grad_out):
        _, mask = self.cache
        return np.where(mask, grad_out, np.zeros((), dtype=grad_out.dtype)), {}


class MaxPool1DLayer(Layer):

    def _forward(self, x):
        window = self.spec.window
        batch, channels, _ = x.shape
        out_len = self.output_shape[1]
        # ragged tail is dropped
        blocks = x[:, :, :out_len * window].reshape(batch, channels, out_len, window)
        argmax = blocks.argmax(axis=3)
        self.cache = (batch, argmax)
        return np.take_along_axis(blocks, argmax[..., None], axis=3)[..., 0]

    def _backward(self, grad_out):
        window = self.spec.window
        batch, argmax = self.cache
        channels, length = self.input_shape
        out_len = self.output_shape[1]
        blocks = np.zeros((batch, channels, out_len, window), dtype=grad_out.dtype)
        np.put_along_axis(blocks, argmax[..., None], grad_out[..., None], axis=3)
        grad_in = np.zeros((batch, channels, length), dtype=grad_out.dtype)
        grad_in[:, :, :out_len * window] = blocks.reshape(batch, channels, out_len * window)
        return grad_in, {}


class FlattenLayer(Layer):

    def _forward(self, x):
        self.cache = (x.shape[0],)
        return x.reshape(x.shape[0], -1)

    def _backward(self, grad_out):
        return grad_out.reshape((grad_out.shape[0],) + self.input_shape), {}


LAYER_TYPES = {
    Conv1D: Conv1DLayer,
    Dense: DenseLayer,
    ReLU: ReLULayer,
    MaxPool1D: MaxPool1DLayer,
    Flatten: FlattenLayer,
}


def make_layer(spec, input_shape: Tuple[int, ...], index=0, params=None) -> Layer:
    return LAYER_TYPES[type(spec)](spec, input_shape, index, params)


def layer_forward(layer: Layer, x):
    return layer.forward(x)


def layer_backward(layer: Layer, grad_out):
    return layer.backward(grad_out)
