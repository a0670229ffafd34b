import numpy as np

from .loss import softmax_cross_entropy


def batch_rng(seed, *keys):
    """Independent generator for one (seed, keys...) stream, e.g. (seed, model, client, round)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(k) for k in keys]))


def batch_order(indices, batch_size, rng):
    """Shuffle indices and cut them into consecutive batches; the last one may be short."""
    indices = np.asarray(indices, dtype=np.int64)
    order = indices[rng.permutation(indices.size)]
    return [order[i:i + batch_size] for i in range(0, order.size, batch_size)]


def train_step(model, optimizer, x, y):
    loss, grad = softmax_cross_entropy(model.forward(x), y)
    model.backward(grad)
    optimizer.step(model)
    return loss


def train_epoch(model, optimizer, samples, labels, indices, batch_size, rng):
    """One shuffled pass of monolithic training; returns the mean batch loss."""
    losses = []
    for batch in batch_order(indices, batch_size, rng):
        losses.append(train_step(model, optimizer, samples[batch], labels[batch]))
    return float(np.mean(losses)) if losses else 0.0
