"""Conv1D classifiers, parameter counting and cut-layer splitting."""
import math
from typing import List, NamedTuple, Tuple
import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveInt, model_validator

from ..errors import ConfigError, ShapeError
from .nn import Conv1D, Dense, Flatten, LayerSpec, MaxPool1D, Model, ReLU, infer_shapes


class ModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    layers: List[LayerSpec]
    input_shape: Tuple[PositiveInt, PositiveInt]
    classes: PositiveInt

    @model_validator(mode="after")
    def check_chain(self):
        shapes = infer_shapes(self.layers, self.input_shape)
        final = shapes[-1] if shapes else tuple(self.input_shape)
        if final != (self.classes,):
            raise ShapeError("final layer must emit class logits", len(self.layers) - 1, (self.classes,), final)
        return self

    @property
    def layer_count(self):
        return len(self.layers)

    def shapes(self):
        return infer_shapes(self.layers, self.input_shape)


class SplitPoint(NamedTuple):
    """cut_index layers stay on the client; smashed_shape is what crosses the wire per sample."""
    cut_index: int
    smashed_shape: Tuple[int, ...]
    client_params: int


def split_point(spec: ModelSpec, cut_index: int) -> SplitPoint:
    if not 1 <= cut_index < spec.layer_count:
        raise ShapeError(f"cut index {cut_index} outside [1, {spec.layer_count})")
    smashed = tuple(spec.shapes()[cut_index - 1])
    return SplitPoint(cut_index, smashed, count_params(spec.layers[:cut_index]))


class SplitParts(NamedTuple):
    client: Model
    server: Model
    smashed_shape: Tuple[int, ...]


def build_conv1d_classifier(conv_depth, channels, kernel, input_shape, classes,
                            pool=2, pool_every=2, hidden=128) -> ModelSpec:
    """conv_depth x (Conv1D + ReLU [+ MaxPool1D]) then Flatten, Dense, ReLU, Dense.

    Convolutions use "same" zero padding (kernel // 2) and stride 1; a pooling layer of
    window `pool` follows every `pool_every`-th block (pool <= 1 disables pooling).
    """
    if not 4 <= conv_depth <= 8:
        raise ConfigError(f"conv_depth must be within 4..8, got {conv_depth}", key="conv_depth")
    in_channels, _ = input_shape
    layers = []
    for block in range(conv_depth):
        layers.append(Conv1D(in_channels=in_channels, out_channels=channels, kernel_size=kernel,
                             stride=1, padding=kernel // 2))
        layers.append(ReLU())
        if pool > 1 and pool_every and (block + 1) % pool_every == 0:
            layers.append(MaxPool1D(window=pool))
        in_channels = channels

    # raises ShapeError naming the layer whose output collapses
    shapes = infer_shapes(layers, tuple(input_shape))
    flat = int(np.prod(shapes[-1]))
    layers += [Flatten(), Dense(in_features=flat, out_features=hidden), ReLU(),
               Dense(in_features=hidden, out_features=classes)]
    return ModelSpec(layers=layers, input_shape=tuple(input_shape), classes=classes)


def count_params(spec) -> int:
    layers = spec.layers if isinstance(spec, ModelSpec) else spec
    total = 0
    for layer in layers:
        for shape in layer.param_shapes().values():
            total += int(np.prod(shape))
    return total


def cut_after_block(spec: ModelSpec, blocks: int) -> int:
    """Raw cut index that keeps `blocks` Conv1D+ReLU blocks on the client (pooling not counted)."""
    seen = 0
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv1D):
            seen += 1
            if seen == blocks:
                nxt = i + 1
                if nxt < spec.layer_count and isinstance(spec.layers[nxt], ReLU):
                    return nxt + 1
                return nxt
    raise ConfigError(f"model has fewer than {blocks} conv blocks", key="cut_index")


def init_weights(spec: ModelSpec, seed) -> Model:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every parameter tensor, deterministic in seed."""
    rng = np.random.default_rng(seed)
    params = []
    for layer in spec.layers:
        shapes = layer.param_shapes()
        values = {}
        if shapes:
            bound = 1.0 / math.sqrt(layer.fan_in())
            for name in sorted(shapes):
                values[name] = rng.uniform(-bound, bound, size=shapes[name]).astype(np.float32)
        params.append(values)
    return Model(spec.layers, spec.input_shape, params)


def initial_model(spec: ModelSpec, seed, model_index=0) -> Model:
    """Starting weights shared by every party of a run; ensemble members draw independent streams."""
    return init_weights(spec, [int(seed), int(model_index)])


def split_model(spec: ModelSpec, model: Model, cut_index: int) -> SplitParts:
    split_point(spec, cut_index)
    state = model.state()
    client = Model(spec.layers[:cut_index], spec.input_shape, state[:cut_index])
    server = Model(spec.layers[cut_index:], client.output_shape, state[cut_index:], first_index=cut_index)
    return SplitParts(client, server, tuple(client.output_shape))


def join_models(client: Model, server: Model) -> Model:
    if tuple(client.output_shape) != tuple(server.input_shape):
        raise ShapeError("sub-networks do not chain", client.layer_count, server.input_shape, client.output_shape)
    return Model(client.specs + server.specs, client.input_shape, client.state() + server.state())


DEFAULT_PROFILE = {
    "conv_depth": 4,
    "channels": 16,
    "kernel": 7,
    "pool": 2,
    "pool_every": 2,
    "hidden": 128,
}
