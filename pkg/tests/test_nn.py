import math
import unittest

import numpy as np

from splitbench.errors import CacheError, DatasetError, HarnessError, ShapeError
from splitbench.lib.nn import (
    Conv1D,
    Dense,
    Flatten,
    MaxPool1D,
    Model,
    Optimizer,
    OptimizerState,
    ReLU,
    adam_step,
    batch_rng,
    gradient_check,
    layer_backward,
    layer_forward,
    make_layer,
    softmax_cross_entropy,
    train_epoch,
)
from splitbench.lib.zoo import ModelSpec, build_conv1d_classifier, init_weights

from .helpers import random_inputs, tiny_spec


def f32(values):
    return np.asarray(values, dtype=np.float32)


class TestLayers(unittest.TestCase):

    def test_conv1d_dot_product(self):
        layer = make_layer(Conv1D(in_channels=1, out_channels=1, kernel_size=2), (1, 3), 0,
                           {"weight": f32([[[1, 1]]]), "bias": f32([0])})
        out = layer_forward(layer, f32([[[1, 2, 3]]]))
        np.testing.assert_array_equal(out, f32([[[3, 5]]]))

        grad_in, grads = layer_backward(layer, f32([[[1, 1]]]))
        np.testing.assert_array_equal(grads["weight"], f32([[[3, 5]]]))
        np.testing.assert_array_equal(grads["bias"], f32([2]))
        np.testing.assert_array_equal(grad_in, f32([[[1, 2, 1]]]))

    def test_conv1d_output_length(self):
        spec = Conv1D(in_channels=2, out_channels=3, kernel_size=5, stride=2, padding=1)
        layer = make_layer(spec, (2, 20))
        self.assertEqual(layer.output_shape, (3, (20 + 2 - 5) // 2 + 1))
        out = layer.forward(random_inputs((2, 20), 4))
        self.assertEqual(out.shape, (4,) + layer.output_shape)

    def test_relu(self):
        layer = make_layer(ReLU(), (3,))
        np.testing.assert_array_equal(layer.forward(f32([[-1, 0, 2]])), f32([[0, 0, 2]]))

        layer = make_layer(ReLU(), (2,))
        layer.forward(f32([[-1, 2]]))
        grad_in, grads = layer.backward(f32([[5, 5]]))
        np.testing.assert_array_equal(grad_in, f32([[0, 5]]))
        self.assertEqual(grads, {})

    def test_dense_identity(self):
        layer = make_layer(Dense(in_features=3, out_features=3), (3,), 0,
                           {"weight": np.eye(3, dtype=np.float32), "bias": np.zeros(3, dtype=np.float32)})
        x = random_inputs((3,), 5)
        np.testing.assert_array_equal(layer.forward(x), x)

    def test_dense_scalar_chain_rule(self):
        layer = make_layer(Dense(in_features=1, out_features=1), (1,), 0,
                           {"weight": f32([[2]]), "bias": f32([0])})
        layer.forward(f32([[3]]))
        grad_in, grads = layer.backward(f32([[4]]))
        self.assertEqual(float(grads["weight"][0, 0]), 12.0)
        self.assertEqual(float(grad_in[0, 0]), 8.0)

    def test_maxpool_drops_ragged_tail(self):
        layer = make_layer(MaxPool1D(window=2), (1, 5))
        np.testing.assert_array_equal(layer.forward(f32([[[1, 3, 2, 5, 9]]])), f32([[[3, 5]]]))
        grad_in, _ = layer.backward(f32([[[1, 1]]]))
        np.testing.assert_array_equal(grad_in, f32([[[0, 1, 0, 1, 0]]]))

    def test_flatten(self):
        layer = make_layer(Flatten(), (2, 3))
        x = random_inputs((2, 3), 2)
        self.assertEqual(layer.forward(x).shape, (2, 6))
        grad_in, _ = layer.backward(np.ones((2, 6), dtype=np.float32))
        self.assertEqual(grad_in.shape, (2, 2, 3))

    def test_input_mismatch_names_layer(self):
        model = Model([Conv1D(in_channels=1, out_channels=2, kernel_size=3), ReLU()], (1, 8))
        with self.assertRaises(ShapeError) as ctx:
            model.forward(random_inputs((2, 8), 1))
        self.assertEqual(ctx.exception.layer_index, 0)
        self.assertEqual(ctx.exception.actual, (1, 2, 8))

    def test_chain_mismatch_names_layer(self):
        with self.assertRaises(ShapeError) as ctx:
            Model([Dense(in_features=4, out_features=3), Dense(in_features=5, out_features=2)], (4,))
        self.assertEqual(ctx.exception.layer_index, 1)

    def test_backward_without_forward(self):
        layer = make_layer(Dense(in_features=2, out_features=2), (2,))
        with self.assertRaises(CacheError):
            layer.backward(np.ones((1, 2), dtype=np.float32))

    def test_backward_consumes_cache(self):
        layer = make_layer(ReLU(), (2,))
        layer.forward(f32([[1, 2]]))
        layer.backward(f32([[1, 1]]))
        with self.assertRaises(CacheError):
            layer.backward(f32([[1, 1]]))

    def test_gradient_shape_mismatch(self):
        layer = make_layer(ReLU(), (2,))
        layer.forward(f32([[1, 2]]))
        with self.assertRaises(ShapeError):
            layer.backward(f32([[1, 1, 1]]))


class TestLoss(unittest.TestCase):

    def test_uniform_logits(self):
        loss, _ = softmax_cross_entropy(np.zeros((4, 5), dtype=np.float32), [0, 1, 2, 3])
        self.assertAlmostEqual(loss, math.log(5), places=6)

    def test_gradient_is_softmax_minus_onehot_over_batch(self):
        _, grad = softmax_cross_entropy(f32([[0, 0]]), [0])
        np.testing.assert_allclose(grad, f32([[-0.5, 0.5]]))
        _, grad = softmax_cross_entropy(f32([[0, 0], [0, 0]]), [0, 1])
        np.testing.assert_allclose(grad, f32([[-0.25, 0.25], [0.25, -0.25]]))

    def test_large_logits_are_stable(self):
        loss, grad = softmax_cross_entropy(f32([[1000, 0, -1000]]), [0])
        self.assertTrue(np.isfinite(loss))
        self.assertTrue(np.all(np.isfinite(grad)))

    def test_label_out_of_range(self):
        with self.assertRaises(DatasetError) as ctx:
            softmax_cross_entropy(np.zeros((2, 3), dtype=np.float32), [0, 3])
        self.assertIsInstance(ctx.exception, HarnessError)
        self.assertIn("label 3", str(ctx.exception))


class TestOptimizers(unittest.TestCase):

    def test_first_adam_step_is_lr_times_sign(self):
        params = {"w": f32([1.0, -1.0, 0.5])}
        grads = {"w": f32([0.5, -2.0, 3.0])}
        state = OptimizerState(lr=0.001)
        adam_step(params, grads, state)
        np.testing.assert_allclose(params["w"], f32([0.999, -0.999, 0.499]), atol=1e-6)
        self.assertEqual(state.t, 1)

    def test_zero_gradient_leaves_params(self):
        params = {"w": f32([1.0, 2.0])}
        state = OptimizerState()
        adam_step(params, {"w": np.zeros(2, dtype=np.float32)}, state)
        np.testing.assert_array_equal(params["w"], f32([1.0, 2.0]))
        self.assertEqual(state.t, 1)

    def test_two_steps_match_hand_recurrence(self):
        lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
        g = 0.3
        params = {"w": np.array([1.0])}
        state = OptimizerState(lr=lr)
        adam_step(params, {"w": np.array([g])}, state)
        adam_step(params, {"w": np.array([g])}, state)

        w, m, v = 1.0, 0.0, 0.0
        for t in (1, 2):
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            w -= lr * (m / (1 - b1 ** t)) / (math.sqrt(v / (1 - b2 ** t)) + eps)
        self.assertAlmostEqual(float(params["w"][0]), w, places=12)

    def test_zero_lr(self):
        params = {"w": f32([1.0, 2.0])}
        adam_step(params, {"w": f32([1.0, -1.0])}, OptimizerState(lr=0.0))
        np.testing.assert_array_equal(params["w"], f32([1.0, 2.0]))
        with self.assertRaises(ValueError):
            OptimizerState(lr=-0.1)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            adam_step({"w": f32([1.0, 2.0])}, {"w": f32([1.0])}, OptimizerState())

    def test_sgd(self):
        model = Model([Dense(in_features=2, out_features=2)], (2,),
                      [{"weight": f32([[1, 0], [0, 1]]), "bias": f32([0, 0])}])
        _, grad = softmax_cross_entropy(model.forward(f32([[1, 2]])), [0])
        model.backward(grad)
        before = model.flatten().copy()
        Optimizer("sgd", lr=0.5).step(model)
        expected = before - 0.5 * np.concatenate([model.layers[0].grads["bias"].ravel(),
                                                  model.layers[0].grads["weight"].ravel()])
        np.testing.assert_allclose(model.flatten(), expected, rtol=1e-6, atol=1e-7)

    def test_step_without_backward(self):
        model = Model([Dense(in_features=2, out_features=2)], (2,))
        with self.assertRaises(ShapeError):
            Optimizer().step(model)

    def test_unknown_optimizer(self):
        with self.assertRaises(ValueError):
            Optimizer("rmsprop")


class TestRanges(unittest.TestCase):

    def setUp(self):
        self.spec = tiny_spec()
        self.model = init_weights(self.spec, 3)
        self.x = random_inputs(self.spec.input_shape, 4)

    def test_composition_is_exact(self):
        full = self.model.forward(self.x)
        for cut in range(self.model.layer_count + 1):
            head = self.model.forward_range(self.x, 0, cut)
            tail = self.model.forward_range(head, cut, self.model.layer_count)
            np.testing.assert_array_equal(tail, full)

    def test_empty_range_is_identity(self):
        self.assertIs(self.model.forward_range(self.x, 2, 2), self.x)

    def test_out_of_bounds(self):
        with self.assertRaises(ShapeError):
            self.model.forward_range(self.x, 0, self.model.layer_count + 1)
        with self.assertRaises(ShapeError):
            self.model.backward_range(np.zeros(1), 3, 4)

    def test_ranged_backward_matches_full_backward(self):
        other = self.model.clone()
        labels = [0, 1, 2, 0]

        _, grad = softmax_cross_entropy(self.model.forward(self.x), labels)
        full_in = self.model.backward(grad)

        cut = 4
        head = other.forward_range(self.x, 0, cut)
        logits = other.forward_range(head, cut, other.layer_count)
        _, grad = softmax_cross_entropy(logits, labels)
        grad_cut = other.backward_range(grad, other.layer_count, cut)
        split_in = other.backward_range(grad_cut, cut, 0)

        np.testing.assert_array_equal(split_in, full_in)
        for (key, a), (_, b) in zip(self.model.named_gradients(), other.named_gradients()):
            np.testing.assert_array_equal(a, b, err_msg=str(key))

    def test_flatten_roundtrip(self):
        vector = self.model.flatten()
        self.assertEqual(vector.dtype, np.float32)
        self.assertEqual(vector.size, self.model.param_count())
        other = init_weights(self.spec, 4).load_flat(vector)
        np.testing.assert_array_equal(other.flatten(), vector)
        with self.assertRaises(ShapeError):
            other.load_flat(vector[:-1])


class TestGradientCheck(unittest.TestCase):

    def _spec(self, layers, input_shape, classes):
        return ModelSpec(layers=layers, input_shape=input_shape, classes=classes)

    def small_models(self):
        yield self._spec([Flatten(), Dense(in_features=8, out_features=3)], (2, 4), 3)
        yield self._spec([Flatten(), Dense(in_features=8, out_features=6), ReLU(),
                          Dense(in_features=6, out_features=3)], (1, 8), 3)
        yield self._spec([Conv1D(in_channels=1, out_channels=2, kernel_size=3), ReLU(), Flatten(),
                          Dense(in_features=12, out_features=4)], (1, 8), 4)
        yield self._spec([Conv1D(in_channels=2, out_channels=3, kernel_size=3, stride=2, padding=1), ReLU(),
                          MaxPool1D(window=2), Flatten(), Dense(in_features=6, out_features=2)], (2, 8), 2)
        yield build_conv1d_classifier(4, 2, 3, (1, 16), 3, hidden=6)

    def test_random_small_models(self):
        for seed, spec in enumerate(self.small_models()):
            model = init_weights(spec, seed)
            x = random_inputs(spec.input_shape, 2, seed)
            labels = np.arange(2) % spec.classes
            error = gradient_check(model, x, labels, epsilon=1e-7)
            self.assertLess(error, 1e-4, f"model {seed}")

    def test_zero_input_is_finite(self):
        spec = build_conv1d_classifier(4, 2, 3, (1, 16), 3, hidden=6)
        model = init_weights(spec, 0)
        error = gradient_check(model, np.zeros((2, 1, 16), dtype=np.float32), [0, 1], epsilon=1e-7)
        self.assertTrue(np.isfinite(error))


class TestDeterminism(unittest.TestCase):

    def _train(self, seed):
        spec = tiny_spec()
        model = init_weights(spec, seed)
        x = random_inputs(spec.input_shape, 20, seed)
        y = np.arange(20) % 3
        optimizer = Optimizer("adam", 0.01)
        for epoch in range(3):
            train_epoch(model, optimizer, x, y, np.arange(20), 6, batch_rng(seed, 0, 0, epoch))
        return model.flatten()

    def test_same_seed_same_parameters(self):
        np.testing.assert_array_equal(self._train(1), self._train(1))
        self.assertFalse(np.array_equal(self._train(1), self._train(2)))


if __name__ == '__main__':
    unittest.main()
