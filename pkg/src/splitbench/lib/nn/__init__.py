"""Minimal numpy training engine: layers, loss, optimizers and gradient verification."""

from .specs import Conv1D, Dense, Flatten, LayerSpec, MaxPool1D, ReLU, infer_shapes
from .layers import Layer, layer_backward, layer_forward, make_layer
from .model import Model, backward_range, forward_range, max_abs_diff
from .loss import softmax, softmax_cross_entropy
from .optim import Optimizer, OptimizerState, adam_step, sgd_step
from .gradcheck import gradient_check
from .trainer import batch_order, batch_rng, train_epoch, train_step

__all__ = [
    'Conv1D', 'Dense', 'Flatten', 'LayerSpec', 'MaxPool1D', 'ReLU', 'infer_shapes',
    'Layer', 'layer_backward', 'layer_forward', 'make_layer',
    'Model', 'backward_range', 'forward_range', 'max_abs_diff',
    'softmax', 'softmax_cross_entropy',
    'Optimizer', 'OptimizerState', 'adam_step', 'sgd_step',
    'gradient_check',
    'batch_order', 'batch_rng', 'train_epoch', 'train_step',
]
