import numpy as np

from .loss import softmax_cross_entropy


def _loss(model, x, labels):
    loss, _ = softmax_cross_entropy(model.forward(x), labels)
    return loss


def gradient_check(model, x, labels, epsilon=1e-5, floor=1e-3):
    """Worst relative error between analytic and central-difference gradients.

    Runs on a float64 clone. Relative error is |a - n| / max(|a|, |n|, floor) so that
    vanishing gradients are judged on absolute error.
    """
    twin = model.clone(dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _, grad = softmax_cross_entropy(twin.forward(x), labels)
    twin.backward(grad)
    analytic = {key: g.copy() for key, g in twin.named_gradients()}

    worst = 0.0
    for key, param in twin.named_parameters():
        flat = param.reshape(-1)
        expected = analytic[key].reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            plus = _loss(twin, x, labels)
            flat[i] = saved - epsilon
            minus = _loss(twin, x, labels)
            flat[i] = saved
            numeric = (plus - minus) / (2 * epsilon)
            a = float(expected[i])
            scale = max(abs(a), abs(numeric), floor)
            worst = max(worst, abs(a - numeric) / scale)
    return worst
