from typing import Dict, Hashable
import numpy as np

from ...errors import ShapeError


class OptimizerState:
    """Adam moments per parameter key plus the completed-step counter."""

    def __init__(self, lr=0.001, beta1=0.9, beta2=0.999, epsilon=1e-8):
        if lr < 0:
            raise ValueError(f"learning rate must be >= 0, got {lr}")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: Dict[Hashable, np.ndarray] = {}
        self.v: Dict[Hashable, np.ndarray] = {}


def adam_step(params: Dict[Hashable, np.ndarray], grads: Dict[Hashable, np.ndarray], state: OptimizerState):
    """Bias-corrected Adam update, applied in place. Returns (params, state)."""
    state.t += 1
    t = state.t
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t
    for key, param in params.items():
        grad = grads[key]
        if grad.shape != param.shape:
            raise ShapeError(f"gradient shape mismatch for {key}", None, param.shape, grad.shape)
        if key not in state.m:
            state.m[key] = np.zeros_like(param)
            state.v[key] = np.zeros_like(param)
        m = state.m[key]
        v = state.v[key]
        if m.shape != param.shape:
            raise ShapeError(f"moment shape mismatch for {key}", None, param.shape, m.shape)
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * (grad * grad)
        m_hat = m / correction1
        v_hat = v / correction2
        param -= (state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(param.dtype, copy=False)
    return params, state


def sgd_step(params, grads, state: OptimizerState):
    state.t += 1
    for key, param in params.items():
        grad = grads[key]
        if grad.shape != param.shape:
            raise ShapeError(f"gradient shape mismatch for {key}", None, param.shape, grad.shape)
        param -= (state.lr * grad).astype(param.dtype, copy=False)
    return params, state


STEP_FUNCTIONS = {"adam": adam_step, "sgd": sgd_step}


class Optimizer:
    """Binds a step rule to a model's parameters and keeps its state."""

    def __init__(self, kind="adam", lr=0.001):
        if kind not in STEP_FUNCTIONS:
            raise ValueError(f"unknown optimizer '{kind}'")
        self.kind = kind
        self.state = OptimizerState(lr=lr)

    def step(self, model):
        params = dict(model.named_parameters())
        grads = dict(model.named_gradients())
        missing = [key for key, grad in grads.items() if grad is None]
        if missing:
            raise ShapeError(f"no gradient for parameters {missing}")
        STEP_FUNCTIONS[self.kind](params, grads, self.state)
