import numpy as np

from ..nn.loss import softmax_cross_entropy


def predict_logits(model, samples, batch_size=256):
    outputs = []
    for start in range(0, samples.shape[0], batch_size):
        outputs.append(model.forward(samples[start:start + batch_size]))
    for layer in model.layers:
        layer.cache = None
    return np.concatenate(outputs, axis=0)


def evaluate_accuracy(model, test_set, batch_size=256):
    """(argmax accuracy, mean cross-entropy) over the whole test set."""
    n = len(test_set)
    if n < 1:
        raise ValueError("empty test set")
    correct = 0
    loss_sum = 0.0
    for start in range(0, n, batch_size):
        x = test_set.samples[start:start + batch_size]
        y = test_set.labels[start:start + batch_size]
        logits = model.forward(x)
        loss, _ = softmax_cross_entropy(logits, y)
        loss_sum += loss * len(y)
        correct += int((logits.argmax(axis=1) == y).sum())
    for layer in model.layers:
        layer.cache = None
    return correct / n, loss_sum / n
