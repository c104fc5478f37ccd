import tempfile
import unittest
from pathlib import Path

import numpy as np

from quantguard.attacks import (
    AttackSpec,
    adversarial_testset,
    fgsm,
    load_adversarial_set,
    perturb,
    rfgsm,
    sample_noise,
    save_adversarial_set,
)
from quantguard.data_pipeline import PipelineConfig, dataset_inputs, normalize_images
from quantguard.errors import AttackError, CheckpointError
from quantguard.network import LayerSpec, build, build_from_specs
from quantguard.tensor_core import Rng, Tensor
from tests.helpers import tiny_dataset


def single_pixel_model():
    """logits = (-x, +x): the loss of class 0 grows with the pixel value."""
    m = build_from_specs([LayerSpec("dense", 1, 2), LayerSpec("softmax_xent_head")], init_seed=None)
    m.set_param(0, "W", [[-1.0], [1.0]])
    return m


class TestFgsm(unittest.TestCase):
    def setUp(self):
        self.pipeline = PipelineConfig(input_bits=8)

    def test_zero_epsilon_is_identity(self):
        m = build("custom", False, 1, widths=(16,))
        ds = tiny_dataset(8)
        x = normalize_images(ds.images)
        self.assertEqual(fgsm(m, self.pipeline, x, ds.labels.astype(np.int64), 0.0), x)

    def test_single_pixel_moves_by_epsilon(self):
        m = single_pixel_model()
        x = Tensor([[0.5]])
        up = fgsm(m, self.pipeline, x, np.array([0]), 0.1)
        self.assertAlmostEqual(float(up.data[0, 0]), 0.6, places=6)
        down = fgsm(m, self.pipeline, x, np.array([1]), 0.1)
        self.assertAlmostEqual(float(down.data[0, 0]), 0.4, places=6)

    def test_result_stays_in_unit_range(self):
        m = single_pixel_model()
        out = fgsm(m, self.pipeline, Tensor([[0.98]]), np.array([0]), 0.3)
        self.assertEqual(float(out.data[0, 0]), 1.0)

    def test_negative_epsilon(self):
        with self.assertRaises(AttackError):
            fgsm(single_pixel_model(), self.pipeline, Tensor([[0.5]]), np.array([0]), -0.1)


class TestRfgsm(unittest.TestCase):
    def setUp(self):
        self.pipeline = PipelineConfig(input_bits=4)
        self.m = build("custom", True, 2, widths=(16,))
        ds = tiny_dataset(12, seed=4)
        self.x = normalize_images(ds.images)
        self.y = ds.labels.astype(np.int64)

    def test_zero_alpha_equals_fgsm(self):
        noise = Tensor(np.random.default_rng(0).normal(size=self.x.shape))
        self.assertEqual(
            rfgsm(self.m, self.pipeline, self.x, self.y, 0.2, 0.0, noise=noise),
            fgsm(self.m, self.pipeline, self.x, self.y, 0.2),
        )

    def test_alpha_must_be_below_epsilon(self):
        with self.assertRaises(AttackError):
            rfgsm(self.m, self.pipeline, self.x, self.y, 0.1, 0.1, rng=Rng(0))

    def test_fixed_seed_is_reproducible(self):
        spec = AttackSpec("rfgsm", 0.3, seed=5)
        index = np.arange(len(self.y))
        first = perturb(self.m, self.pipeline, self.x, self.y, spec, index)
        self.assertEqual(first, perturb(self.m, self.pipeline, self.x, self.y, spec, index))
        other = perturb(self.m, self.pipeline, self.x, self.y, AttackSpec("rfgsm", 0.3, seed=6), index)
        self.assertNotEqual(first, other)

    def test_noise_depends_only_on_seed_and_sample_index(self):
        together = sample_noise(9, [3, 4], 784)
        alone = sample_noise(9, [4], 784)
        np.testing.assert_array_equal(together.data[1], alone.data[0])


class TestBudget(unittest.TestCase):
    def test_linf_budget_and_range_over_1000_samples(self):
        ds = tiny_dataset(1000, seed=8)
        x_raw = normalize_images(ds.images).data
        for binarized in (False, True):
            m = build("custom", binarized, 3, widths=(32,))
            for bits in (2, 8):
                pipeline = PipelineConfig(input_bits=bits)
                for family, eps in (("fgsm", 0.1), ("rfgsm", 0.3)):
                    advset = adversarial_testset(m, pipeline, ds, AttackSpec(family, eps, seed=1))
                    x_adv = advset.x_adv.data
                    self.assertEqual(len(advset), 1000)
                    self.assertLessEqual(float(np.max(np.abs(x_adv - x_raw))), eps + 1e-6)
                    self.assertGreaterEqual(float(x_adv.min()), 0.0)
                    self.assertLessEqual(float(x_adv.max()), 1.0)

    def test_family_none_is_the_clean_test_set(self):
        ds = tiny_dataset(20)
        pipeline = PipelineConfig(input_bits=2)
        m = build("custom", False, 0, widths=(8,))
        advset = adversarial_testset(m, pipeline, ds, AttackSpec())
        inputs, labels = dataset_inputs(ds, pipeline)
        self.assertEqual(advset.model_inputs(pipeline), inputs)
        np.testing.assert_array_equal(advset.labels, labels)

    def test_spec_validation(self):
        with self.assertRaises(AttackError):
            AttackSpec("fgsm", -0.1)
        with self.assertRaises(AttackError):
            AttackSpec("none", 0.1)
        with self.assertRaises(AttackError):
            AttackSpec("pgd", 0.1)
        self.assertEqual(AttackSpec("fgsm", 0.0).effective_family, "none")


class TestAdversarialStore(unittest.TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        ds = tiny_dataset(10)
        m = build("custom", False, 1, widths=(8,))
        spec = AttackSpec("rfgsm", 0.2, alpha_fraction=0.25, seed=4)
        advset = adversarial_testset(m, PipelineConfig(), ds, spec)
        path = save_adversarial_set(advset, self.dir / "adv.dqa", b"\x07" * 32)
        loaded, config_hash = load_adversarial_set(path)
        self.assertEqual(loaded.x_adv, advset.x_adv)
        np.testing.assert_array_equal(loaded.labels, advset.labels)
        self.assertEqual(loaded.spec, spec)
        self.assertEqual(config_hash, b"\x07" * 32)

    def test_truncated(self):
        ds = tiny_dataset(4)
        advset = adversarial_testset(build("custom", False, 1, widths=(4,)), PipelineConfig(), ds, AttackSpec())
        path = save_adversarial_set(advset, self.dir / "adv.dqa")
        path.write_bytes(path.read_bytes()[:-1])
        with self.assertRaises(CheckpointError):
            load_adversarial_set(path)


if __name__ == "__main__":
    unittest.main()
