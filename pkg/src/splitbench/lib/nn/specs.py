from typing import Annotated, List, Literal, Tuple, Union
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, NonNegativeInt

from ...errors import ShapeError


class _Spec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class Conv1D(_Spec):
    kind: Literal["Conv1D"] = "Conv1D"
    in_channels: PositiveInt
    out_channels: PositiveInt
    kernel_size: PositiveInt
    stride: PositiveInt = 1
    padding: NonNegativeInt = 0

    def output_shape(self, shape, index=None):
        channels, length = _expect_rank(shape, 2, index)
        if channels != self.in_channels:
            raise ShapeError("Conv1D channel mismatch", index, (self.in_channels, length), shape)
        out_len = (length + 2 * self.padding - self.kernel_size) // self.stride + 1
        if out_len < 1:
            raise ShapeError("Conv1D input shorter than kernel", index, None, shape)
        return (self.out_channels, out_len)

    def param_shapes(self):
        return {
            "weight": (self.out_channels, self.in_channels, self.kernel_size),
            "bias": (self.out_channels,),
        }

    def fan_in(self):
        return self.in_channels * self.kernel_size


class Dense(_Spec):
    kind: Literal["Dense"] = "Dense"
    in_features: PositiveInt
    out_features: PositiveInt

    def output_shape(self, shape, index=None):
        (features,) = _expect_rank(shape, 1, index)
        if features != self.in_features:
            raise ShapeError("Dense feature mismatch", index, (self.in_features,), shape)
        return (self.out_features,)

    def param_shapes(self):
        return {
            "weight": (self.out_features, self.in_features),
            "bias": (self.out_features,),
        }

    def fan_in(self):
        return self.in_features


class ReLU(_Spec):
    kind: Literal["ReLU"] = "ReLU"

    def output_shape(self, shape, index=None):
        return tuple(shape)

    def param_shapes(self):
        return {}


class MaxPool1D(_Spec):
    kind: Literal["MaxPool1D"] = "MaxPool1D"
    window: PositiveInt

    def output_shape(self, shape, index=None):
        channels, length = _expect_rank(shape, 2, index)
        out_len = length // self.window
        if out_len < 1:
            raise ShapeError(f"MaxPool1D window {self.window} longer than input", index, None, shape)
        return (channels, out_len)

    def param_shapes(self):
        return {}


class Flatten(_Spec):
    kind: Literal["Flatten"] = "Flatten"

    def output_shape(self, shape, index=None):
        size = 1
        for dim in shape:
            size *= dim
        return (size,)

    def param_shapes(self):
        return {}


LayerSpec = Annotated[Union[Conv1D, Dense, ReLU, MaxPool1D, Flatten], Field(discriminator="kind")]


def _expect_rank(shape, rank, index):
    if len(shape) != rank:
        raise ShapeError(f"expected rank {rank} input", index, None, shape)
    return tuple(shape)


def infer_shapes(layers: List[LayerSpec], input_shape: Tuple[int, ...]) -> List[Tuple[int, ...]]:
    """Per-layer output shapes (batch dimension excluded)."""
    shapes = []
    shape = tuple(input_shape)
    for i, layer in enumerate(layers):
        shape = layer.output_shape(shape, i)
        shapes.append(shape)
    return shapes
