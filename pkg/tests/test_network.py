import tempfile
import unittest
from pathlib import Path

import numpy as np

from quantguard.errors import CheckpointError, ShapeError, StaleCacheError
from quantguard.network import (
    ARCHITECTURES,
    FORMAT_VERSION,
    backward,
    binary_weights_in_range,
    build,
    decode_checkpoint,
    encode_checkpoint,
    forward,
    load_checkpoint,
    loss,
    save_checkpoint,
    sgd_step,
    step_decay_lr,
)
from quantguard.network.checkpoint import HEADER
from quantguard.network.layers import Dense
from quantguard.network.model import Gradients
from quantguard.tensor_core import Tensor, double_precision
from tests.helpers import check_input_gradient, check_parameter_gradients


def random_batch(n, seed=0, dim=784):
    rng = np.random.default_rng(seed)
    return Tensor(rng.uniform(0, 1, size=(n, dim))), rng.integers(0, 10, size=n)


def zero_gradients(m):
    return Gradients(
        params={(i, name): Tensor.zeros(value.shape) for i, name, value in m.named_params()},
        grad_input=None,
        loss=0.0,
    )


class TestBuild(unittest.TestCase):
    def test_fcn2_parameter_count(self):
        dense = 784 * 600 + 600 + 3 * (600 * 600 + 600) + 600 * 10 + 10
        batchnorm = 4 * 2 * 600
        self.assertEqual(build("FCN2", False, 1).parameter_count(), dense + batchnorm)
        # the binarized variant adds a batchnorm on the 10 logits
        self.assertEqual(build("FCN2", True, 1).parameter_count(), dense + batchnorm + 2 * 10)

    def test_fcn1_width(self):
        self.assertEqual(ARCHITECTURES["FCN1"], (6144,) * 4)
        self.assertEqual(build("FCN2", False, None).hidden_widths, (600,) * 4)

    def test_same_seed_same_weights(self):
        a, b = build("FCN2", True, 5), build("FCN2", True, 5)
        for (_, _, wa), (_, _, wb) in zip(a.named_params(), b.named_params()):
            self.assertEqual(wa, wb)

    def test_unknown_architecture(self):
        with self.assertRaises(ShapeError):
            build("FCN3", False, 0)


class TestForward(unittest.TestCase):
    def test_zero_weight_network_is_uniform(self):
        m = build("FCN2", False, init_seed=None)
        logits, _ = forward(m, random_batch(3)[0])
        np.testing.assert_array_equal(logits.data, np.zeros((3, 10)))
        self.assertAlmostEqual(loss(m, random_batch(3)[0], [0, 1, 2]), np.log(10), places=5)

    def test_sign_activation_codomain(self):
        m = build("custom", True, 2, widths=(32, 32))
        _, cache = forward(m, random_batch(6)[0], "train")
        for index, layer in enumerate(m.layers):
            if layer.kind == "sign_act":
                self.assertTrue(set(np.unique(cache.layer_output(index).data)) <= {-1.0, 1.0})

    def test_binary_layers_use_signed_weights(self):
        m = build("custom", True, 2, widths=(8,))
        _, cache = forward(m, random_batch(2)[0])
        weight = cache.aux[m.first_dense_index()]
        self.assertTrue(set(np.unique(weight.data)) <= {-1.0, 1.0})

    def test_eval_forward_is_deterministic(self):
        m = build("FCN2", True, 3)
        x, _ = random_batch(4)
        self.assertEqual(forward(m, x)[0], forward(m, x)[0])

    def test_wrong_input_width(self):
        with self.assertRaises(ShapeError):
            forward(build("custom", False, 0, widths=(4,)), Tensor(np.zeros((2, 10))))


class TestBackward(unittest.TestCase):
    def test_full_precision_fcn2_gradients(self):
        with double_precision():
            m = build("FCN2", False, 7)
            x, y = random_batch(4, seed=1)
            _, cache = forward(m, x, "train")
            grads = backward(m, cache, y)
            self.assertEqual(grads.grad_input.shape, x.shape)
            self.assertGreater(check_parameter_gradients(self, m, x, y, grads), 40)
            self.assertGreater(check_input_gradient(self, m, x, y, grads.grad_input), 4)

    def test_binarized_fcn2_surrogate_gradients(self):
        with double_precision():
            m = build("FCN2", True, 7)
            x, y = random_batch(4, seed=2)
            _, cache = forward(m, x, "train", surrogate=True)
            grads = backward(m, cache, y)
            self.assertGreater(check_parameter_gradients(self, m, x, y, grads, surrogate=True), 40)
            self.assertGreater(check_input_gradient(self, m, x, y, grads.grad_input, surrogate=True), 4)

    def test_stale_cache(self):
        m = build("custom", False, 0, widths=(4,))
        x, y = random_batch(2)
        _, cache = forward(m, x, "train")
        sgd_step(m, backward(m, cache, y), lr=0.1)
        with self.assertRaises(StaleCacheError):
            backward(m, cache, y)


class TestSgd(unittest.TestCase):
    def test_binary_weight_is_clamped(self):
        m = build("custom", True, None, widths=(2,), input_dim=1)
        index = m.first_dense_index()
        m.set_param(index, "W", [[0.99], [0.0]])
        grads = zero_gradients(m)
        grads.params[(index, "W")] = Tensor([[-5.0], [0.0]])
        sgd_step(m, grads, lr=0.1)
        self.assertEqual(float(m.layers[index].params["W"].data[0, 0]), 1.0)

    def test_full_precision_weight_is_not_clamped(self):
        m = build("custom", False, None, widths=(2,), input_dim=1)
        index = m.first_dense_index()
        m.set_param(index, "W", [[0.99], [0.0]])
        grads = zero_gradients(m)
        grads.params[(index, "W")] = Tensor([[-5.0], [0.0]])
        sgd_step(m, grads, lr=0.1)
        self.assertAlmostEqual(float(m.layers[index].params["W"].data[0, 0]), 1.49, places=5)

    def test_zero_gradient_is_a_fixed_point(self):
        m = build("custom", False, 4, widths=(8,))
        before = [value for _, _, value in m.named_params()]
        sgd_step(m, zero_gradients(m), lr=0.5)
        for old, (_, _, new) in zip(before, m.named_params()):
            self.assertEqual(old, new)

    def test_clamp_holds_after_random_steps(self):
        m = build("custom", True, 3, widths=(16, 16))
        rng = np.random.default_rng(0)
        for _ in range(100):
            grads = zero_gradients(m)
            for key, grad in grads.params.items():
                grads.params[key] = Tensor(rng.normal(scale=10.0, size=grad.shape))
            sgd_step(m, grads, lr=0.5)
        self.assertTrue(binary_weights_in_range(m))

    def test_full_batch_sgd_decreases_loss_every_step(self):
        m = build("FCN2", False, 1)
        x, y = random_batch(64, seed=3)
        losses = []
        for step in range(51):
            _, cache = forward(m, x, "train")
            grads = backward(m, cache, y)
            losses.append(grads.loss)
            if step < 50:
                sgd_step(m, grads, lr=0.01)
        for step, (before, after) in enumerate(zip(losses, losses[1:])):
            self.assertLess(after, before, msg=f"step {step}")

    def test_running_moments_follow_train_batches(self):
        m = build("custom", False, 1, widths=(4,))
        bn = m.layers[1]
        x, y = random_batch(8)
        _, cache = forward(m, x, "train")
        sgd_step(m, backward(m, cache, y), lr=0.01)
        self.assertFalse(np.allclose(bn.buffers["running_mean"].data, 0.0))

    def test_step_decay(self):
        self.assertEqual(step_decay_lr(0.1, 0, 10), 0.1)
        self.assertAlmostEqual(step_decay_lr(0.1, 5, 10), 0.01)
        self.assertAlmostEqual(step_decay_lr(0.1, 9, 10), 0.001)
        self.assertEqual(step_decay_lr(0.1, 0, 1), 0.1)


class TestCheckpoint(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_save_load_save_is_byte_identical(self):
        m = build("FCN2", True, 9)
        first = save_checkpoint(m, self.dir / "a.dqn", b"\x01" * 32)
        loaded, config_hash = load_checkpoint(first)
        second = save_checkpoint(loaded, self.dir / "b.dqn", config_hash)
        self.assertEqual(first.read_bytes(), second.read_bytes())
        self.assertEqual(loaded.arch, "FCN2")
        x, _ = random_batch(3)
        self.assertEqual(forward(m, x)[0], forward(loaded, x)[0])

    def test_bad_magic(self):
        raw = bytearray(encode_checkpoint(build("custom", False, 0, widths=(4,))))
        raw[0:4] = b"XXXX"
        with self.assertRaises(CheckpointError):
            decode_checkpoint(bytes(raw))

    def test_future_version(self):
        raw = bytearray(encode_checkpoint(build("custom", False, 0, widths=(4,))))
        magic, _, config_hash, layers = HEADER.unpack_from(raw)
        HEADER.pack_into(raw, 0, magic, FORMAT_VERSION + 1, config_hash, layers)
        with self.assertRaises(CheckpointError) as ctx:
            decode_checkpoint(bytes(raw))
        self.assertIn("version 2", str(ctx.exception))

    def test_truncated(self):
        raw = encode_checkpoint(build("custom", False, 0, widths=(4,)))
        with self.assertRaises(CheckpointError):
            decode_checkpoint(raw[:-3])

    def test_config_hash_mismatch(self):
        raw = encode_checkpoint(build("custom", False, 0, widths=(4,)), b"\x02" * 32)
        with self.assertRaises(CheckpointError):
            decode_checkpoint(raw, expected_hash=b"\x03" * 32)

    def test_dense_layers_restored(self):
        m = build("custom", True, 4, widths=(5, 3))
        loaded, _ = decode_checkpoint(encode_checkpoint(m))
        self.assertTrue(all(isinstance(a, Dense) == isinstance(b, Dense) for a, b in zip(m.layers, loaded.layers)))
        self.assertTrue(loaded.binarized)


if __name__ == "__main__":
    unittest.main()
