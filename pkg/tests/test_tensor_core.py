import unittest

import numpy as np

from quantguard.errors import DomainError, ShapeError
from quantguard.tensor_core import (
    Rng,
    Tensor,
    double_precision,
    elementwise,
    elementwise_vjp,
    gaussian,
    matmul,
    matmul_vjp,
    ste_mask,
    transpose,
)


def triple_loop(a, b):
    out = np.zeros((a.shape[0], b.shape[1]), dtype=np.float64)
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            for k in range(a.shape[1]):
                out[i, j] += float(a[i, k]) * float(b[k, j])
    return out


class TestMatmul(unittest.TestCase):
    def test_identity(self):
        out = matmul([[1, 0], [0, 1]], [[5, 6], [7, 8]])
        np.testing.assert_array_equal(out.data, [[5, 6], [7, 8]])

    def test_hand_computed(self):
        self.assertEqual(matmul([[1, 2]], [[3], [4]]), Tensor([[11]]))

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(3)
        a, b = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
        out = matmul(a, b).data
        expected = triple_loop(Tensor(a).data, Tensor(b).data)
        np.testing.assert_allclose(out, expected, rtol=1e-5, atol=1e-5)

    def test_identity_is_exact(self):
        a = Tensor(np.random.default_rng(0).normal(size=(5, 7)))
        self.assertEqual(matmul(np.eye(5), a), a)

    def test_inner_extent_mismatch_names_both_shapes(self):
        with self.assertRaises(ShapeError) as ctx:
            matmul(np.ones((2, 3)), np.ones((4, 2)))
        self.assertIn("2x3", str(ctx.exception))
        self.assertIn("4x2", str(ctx.exception))

    def test_empty_extent_rejected(self):
        with self.assertRaises(ShapeError):
            Tensor(np.zeros((0, 3)))


class TestElementwise(unittest.TestCase):
    def test_sign_maps_zero_to_plus_one(self):
        np.testing.assert_array_equal(elementwise("sign", [-0.3, 0.0, 2.1]).data, [-1, 1, 1])

    def test_hardtanh(self):
        np.testing.assert_array_equal(elementwise("hardtanh", [-5, 0.5, 5]).data, [-1, 0.5, 1])

    def test_relu(self):
        np.testing.assert_array_equal(elementwise("relu", [-1, 3]).data, [0, 3])

    def test_scalar_operand(self):
        np.testing.assert_array_equal(elementwise("mul", [1, 2, 3], 2.0).data, [2, 4, 6])

    def test_scalar_only_operands(self):
        np.testing.assert_array_equal(elementwise("add", 1.0, 2.0).data, [3.0])
        np.testing.assert_array_equal(elementwise("mul", 2.0, 3.0).data, [6.0])
        np.testing.assert_array_equal(elementwise("relu", -1.0).data, [0.0])
        self.assertAlmostEqual(float(elementwise("exp", 1.0).data[0]), np.e, places=5)

    def test_exp_overflow_names_the_value(self):
        with self.assertRaises(DomainError) as ctx:
            elementwise("exp", [1.0, 100.0])
        self.assertIn("100.0", str(ctx.exception))
        self.assertTrue(np.all(np.isfinite(elementwise("exp", [1.0, 80.0]).data)))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            elementwise("add", np.ones(3), np.ones(4))

    def test_log_of_non_positive(self):
        with self.assertRaises(DomainError):
            elementwise("log", [1.0, 0.0])

    def test_tensors_are_immutable(self):
        t = Tensor([1.0, 2.0])
        with self.assertRaises(ValueError):
            t.data[0] = 5.0


class TestGaussian(unittest.TestCase):
    def test_same_seed_is_bit_identical(self):
        self.assertEqual(gaussian(Rng(7), (4, 5)), gaussian(Rng(7), (4, 5)))

    def test_child_streams_differ(self):
        self.assertNotEqual(gaussian(Rng(7).child(0), (10,)), gaussian(Rng(7).child(1), (10,)))

    def test_shape(self):
        self.assertEqual(gaussian(Rng(1), (2, 3)).size, 6)

    def test_moments(self):
        draws = gaussian(Rng(11), (10**6,)).data.astype(np.float64)
        self.assertLess(abs(draws.mean()), 0.01)
        self.assertLess(abs(draws.var() - 1.0), 0.01)


class TestGradientRules(unittest.TestCase):
    def test_ste_mask(self):
        np.testing.assert_array_equal(ste_mask([2.5, 0.3, -1.0, -1.5]).data, [0, 1, 1, 0])

    def test_sign_gradient_goes_through_hardtanh_window(self):
        (grad,) = elementwise_vjp("sign", [Tensor([2.5, 0.3])], Tensor([1.0, 1.0]))
        np.testing.assert_array_equal(grad.data, [0.0, 1.0])

    def test_matmul_vjp_matches_finite_differences(self):
        with double_precision():
            rng = np.random.default_rng(5)
            a, b, g = rng.normal(size=(5, 5)), rng.normal(size=(5, 5)), rng.normal(size=(5, 5))
            grad_a, grad_b = matmul_vjp(Tensor(a), Tensor(b), Tensor(g))
            h = 1e-6
            for i, j in ((0, 0), (2, 3), (4, 1)):
                da = np.zeros_like(a)
                da[i, j] = h
                numeric = ((matmul(a + da, b).data - matmul(a - da, b).data) * g).sum() / (2 * h)
                self.assertAlmostEqual(grad_a.data[i, j], numeric, places=6)
                numeric = ((matmul(a, b + da).data - matmul(a, b - da).data) * g).sum() / (2 * h)
                self.assertAlmostEqual(grad_b.data[i, j], numeric, places=6)

    def test_pointwise_vjps_match_finite_differences(self):
        with double_precision():
            rng = np.random.default_rng(9)
            # keep away from the relu/hardtanh kinks and from log's pole
            x = rng.uniform(0.2, 0.8, size=(5, 5)) * rng.choice([-1, 1], size=(5, 5))
            y = rng.normal(size=(5, 5))
            g = rng.normal(size=(5, 5))
            h = 1e-6
            cases = {
                "relu": (x,), "hardtanh": (x,), "exp": (x,), "log": (np.abs(x),),
                "add": (x, y), "sub": (x, y), "mul": (x, y),
            }
            for op, operands in cases.items():
                grads = elementwise_vjp(op, [Tensor(v) for v in operands], Tensor(g))
                for k, operand in enumerate(operands):
                    bump = np.zeros_like(operand)
                    bump[1, 2] = h
                    up = [v + bump if i == k else v for i, v in enumerate(operands)]
                    down = [v - bump if i == k else v for i, v in enumerate(operands)]
                    numeric = ((elementwise(op, *up).data - elementwise(op, *down).data) * g).sum() / (2 * h)
                    self.assertAlmostEqual(grads[k].data[1, 2], numeric, places=5, msg=op)

    def test_transpose(self):
        np.testing.assert_array_equal(transpose([[1, 2, 3]]).data, [[1], [2], [3]])


if __name__ == "__main__":
    unittest.main()
