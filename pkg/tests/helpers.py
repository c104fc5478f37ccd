"""Shared fixtures: synthetic MNIST-format files and a finite-difference gradient checker."""
import struct
from pathlib import Path

import numpy as np

from quantguard.data_pipeline import IMAGES_MAGIC, LABELS_MAGIC, RawDataset
from quantguard.data_pipeline.idx import MNIST_FILES
from quantguard.network import forward, softmax_xent
from quantguard.tensor_core import Tensor


def idx_bytes(array, magic):
    array = np.asarray(array, dtype=np.uint8)
    header = struct.pack(">II", magic, array.shape[0])
    if magic == IMAGES_MAGIC:
        header += struct.pack(">II", array.shape[1], array.shape[2])
    return header + array.tobytes()


def write_idx(path, array, magic):
    path = Path(path)
    path.write_bytes(idx_bytes(array, magic))
    return path


def synthetic_images(n, seed=0, side=28):
    """Noisy digits stand-ins: class k lights a horizontal band at rows 2k+4 and 2k+5."""
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n).astype(np.uint8)
    images = rng.integers(0, 40, size=(n, side, side)).astype(np.uint8)
    for i, label in enumerate(labels):
        row = 2 * int(label) + 4
        images[i, row:row + 2, 4:side - 4] = rng.integers(200, 256, size=(2, side - 8))
    return images, labels


def tiny_dataset(n=64, split="test", seed=0, side=28):
    images, labels = synthetic_images(n, seed, side)
    return RawDataset(images, labels, split)


def write_mnist_dir(directory, n_train=300, n_test=100, seed=0):
    """Lay out train/test IDX files under their MNIST names."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for split, n, offset in (("train", n_train, 0), ("test", n_test, 1)):
        images, labels = synthetic_images(n, seed + offset)
        images_name, labels_name = MNIST_FILES[split]
        write_idx(directory / images_name, images, IMAGES_MAGIC)
        write_idx(directory / labels_name, labels, LABELS_MAGIC)
    return directory


def _kinks(m, cache):
    masks = []
    for index, layer in enumerate(m.layers):
        values = cache.inputs[index].data
        if layer.kind == "relu":
            masks.append(values > 0)
        elif layer.kind in ("sign_act", "hardtanh"):
            masks.append(np.abs(values) <= 1)
    return masks


def _loss_and_kinks(m, x, labels, mode, surrogate):
    logits, cache = forward(m, x, mode, surrogate)
    return softmax_xent(logits, labels)[0], _kinks(m, cache)


def _same(masks_a, masks_b):
    return all(np.array_equal(a, b) for a, b in zip(masks_a, masks_b))


def _central(evaluate, h):
    plus, kinks_plus = evaluate(h)
    minus, kinks_minus = evaluate(-h)
    if not _same(kinks_plus, kinks_minus):
        return None  # step crossed a relu/hardtanh kink
    return (plus - minus) / (2 * h)


def _assert_close(testcase, analytic, numeric, rtol, atol, where):
    testcase.assertLessEqual(
        abs(analytic - numeric),
        rtol * max(abs(analytic), abs(numeric)) + atol,
        msg=f"{where}: analytic {analytic!r} vs numeric {numeric!r}",
    )


def check_parameter_gradients(testcase, m, x, labels, grads, mode="train", surrogate=False,
                              per_tensor=4, seed=0, h=1e-5, rtol=1e-3, atol=1e-7):
    """Compare sampled entries of every parameter gradient with central differences. Run in float64."""
    rng = np.random.default_rng(seed)
    checked = 0
    for (index, name) in sorted(grads.params):
        base = m.layers[index].params[name].numpy()
        analytic = grads.params[(index, name)].data
        for flat in rng.choice(base.size, size=min(per_tensor, base.size), replace=False):

            def evaluate(step):
                bumped = base.copy()
                bumped.flat[flat] += step
                m.set_param(index, name, Tensor(bumped))
                return _loss_and_kinks(m, x, labels, mode, surrogate)

            numeric = _central(evaluate, h)
            if numeric is None:
                continue
            _assert_close(testcase, float(analytic.flat[flat]), numeric, rtol, atol, f"layer {index} {name}[{flat}]")
            checked += 1
        m.set_param(index, name, Tensor(base))
    return checked


def check_input_gradient(testcase, m, x, labels, grad_input, mode="train", surrogate=False,
                         samples=8, seed=0, h=1e-5, rtol=1e-3, atol=1e-7):
    rng = np.random.default_rng(seed)
    base = x.numpy()
    checked = 0
    for flat in rng.choice(base.size, size=samples, replace=False):

        def evaluate(step):
            bumped = base.copy()
            bumped.flat[flat] += step
            return _loss_and_kinks(m, Tensor(bumped), labels, mode, surrogate)

        numeric = _central(evaluate, h)
        if numeric is None:
            continue
        _assert_close(testcase, float(grad_input.data.flat[flat]), numeric, rtol, atol, f"input[{flat}]")
        checked += 1
    return checked
