import numpy as np

from ...errors import DatasetError, ShapeError


def softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def softmax_cross_entropy(logits, labels):
    """Mean cross-entropy over the batch and its gradient w.r.t. the logits.

    The gradient already carries the 1/batch factor, layers below propagate it unscaled.
    """
    if logits.ndim != 2:
        raise ShapeError("logits must be [batch, classes]", None, None, logits.shape)
    batch, classes = logits.shape
    labels = np.asarray(labels).astype(np.int64).reshape(-1)
    if labels.shape[0] != batch:
        raise ShapeError("label count does not match batch", None, (batch,), labels.shape)
    if batch and (labels.min() < 0 or labels.max() >= classes):
        bad = labels[(labels < 0) | (labels >= classes)][0]
        raise DatasetError(f"label {int(bad)} out of range for {classes} classes")

    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(batch)
    loss = float(-log_probs[rows, labels].astype(np.float64).mean())

    grad = np.exp(log_probs)
    grad[rows, labels] -= 1
    grad /= batch
    return loss, grad.astype(logits.dtype, copy=False)
