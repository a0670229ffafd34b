from typing import Iterator, List, Sequence, Tuple
import numpy as np

from ...errors import ShapeError
from .layers import Layer, make_layer


class Model:
    """An ordered stack of layers. A client or server sub-network is just a Model over a slice."""

    def __init__(self, specs: Sequence, input_shape, params=None, first_index=0):
        self.specs = list(specs)
        self.first_index = first_index
        self.input_shape = tuple(input_shape)
        self.layers: List[Layer] = []
        shape = self.input_shape
        for i, spec in enumerate(self.specs):
            layer_params = params[i] if params is not None else None
            layer = make_layer(spec, shape, first_index + i, layer_params)
            self.layers.append(layer)
            shape = layer.output_shape
        self.output_shape = shape

    @property
    def layer_count(self):
        return len(self.layers)

    def forward_range(self, x, start, stop):
        if not 0 <= start <= stop <= self.layer_count:
            raise ShapeError(f"layer range [{start}, {stop}) out of bounds for {self.layer_count} layers")
        for layer in self.layers[start:stop]:
            x = layer.forward(x)
        return x

    def backward_range(self, grad, top, down_to):
        """Backpropagate from the output of layer top-1 down to the input of layer down_to."""
        if not 0 <= down_to <= top <= self.layer_count:
            raise ShapeError(f"layer range [{down_to}, {top}) out of bounds for {self.layer_count} layers")
        for layer in reversed(self.layers[down_to:top]):
            grad, _ = layer.backward(grad)
        return grad

    def forward(self, x):
        return self.forward_range(x, 0, self.layer_count)

    def backward(self, grad):
        return self.backward_range(grad, self.layer_count, 0)

    def named_parameters(self) -> Iterator[Tuple[Tuple[int, str], np.ndarray]]:
        for layer in self.layers:
            for name in sorted(layer.params):
                yield (layer.index, name), layer.params[name]

    def named_gradients(self):
        for layer in self.layers:
            for name in sorted(layer.params):
                yield (layer.index, name), layer.grads.get(name)

    def param_count(self):
        return sum(value.size for _, value in self.named_parameters())

    def state(self):
        return [{name: value.copy() for name, value in layer.params.items()} for layer in self.layers]

    def clone(self, dtype=None):
        params = []
        for layer in self.layers:
            params.append({name: (value.astype(dtype) if dtype is not None else value.copy())
                           for name, value in layer.params.items()})
        return Model(self.specs, self.input_shape, params, self.first_index)

    def flatten(self) -> np.ndarray:
        """All parameters as one f32 vector, ordered by (layer index, parameter name)."""
        parts = [value.ravel() for _, value in self.named_parameters()]
        if not parts:
            return np.zeros(0, dtype=np.float32)
        return np.concatenate(parts).astype(np.float32, copy=False)

    def load_flat(self, vector):
        vector = np.asarray(vector)
        if vector.ndim != 1 or vector.size != self.param_count():
            raise ShapeError("flat parameter vector length mismatch", None, (self.param_count(),), vector.shape)
        offset = 0
        for layer in self.layers:
            for name in sorted(layer.params):
                current = layer.params[name]
                chunk = vector[offset:offset + current.size]
                layer.params[name] = chunk.reshape(current.shape).astype(current.dtype, copy=True)
                offset += current.size
        return self


def forward_range(model: Model, x, from_layer, to_layer):
    return model.forward_range(x, from_layer, to_layer)


def backward_range(model: Model, grad, top, down_to):
    return model.backward_range(grad, top, down_to)


def max_abs_diff(a: Model, b: Model) -> float:
    worst = 0.0
    for (_, pa), (_, pb) in zip(a.named_parameters(), b.named_parameters()):
        if pa.size:
            worst = max(worst, float(np.max(np.abs(pa.astype(np.float64) - pb.astype(np.float64)))))
    return worst
