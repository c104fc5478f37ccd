"""
L1 norms of the first hidden layer's response to clean and FGSM inputs.

The captured vector is the first dense layer's output (before batchnorm and the
nonlinearity); each norm is divided by the layer width so architectures of
different widths compare on one scale.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quantguard.attacks import AttackSpec, adversarial_testset
from quantguard.network import forward

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class L1Profile:
    epsilon: float
    norms: np.ndarray

    @property
    def minimum(self):
        return float(self.norms.min())

    @property
    def maximum(self):
        return float(self.norms.max())

    @property
    def mean(self):
        return float(self.norms.mean())

    @property
    def variance(self):
        return float(self.norms.var())

    def overlaps(self, other):
        return self.minimum <= other.maximum and other.minimum <= self.maximum

    def exceeds_max_of(self, other):
        return self.maximum > other.maximum

    def summary(self):
        return {"min": self.minimum, "max": self.maximum, "mean": self.mean, "variance": self.variance}


def first_hidden_norms(m, inputs, batch_size=1000):
    index = m.first_dense_index()
    width = m.layers[index].spec.fan_out
    norms = []
    for start in range(0, len(inputs), batch_size):
        _, cache = forward(m, inputs.rows(slice(start, start + batch_size)), "eval")
        activation = cache.layer_output(index).data
        norms.append(np.abs(activation).sum(axis=1) / width)
    return np.concatenate(norms).astype(np.float64)


def l1_profile(m, pipeline, samples, epsilons=(0.0, 0.1, 0.3), seed=0):
    """Per-epsilon L1Profile over `samples` (a RawDataset)."""
    profiles = {}
    for epsilon in sorted(epsilons):
        spec = AttackSpec(family="none" if epsilon == 0 else "fgsm", epsilon=epsilon, seed=seed)
        advset = adversarial_testset(m, pipeline, samples, spec)
        profiles[float(epsilon)] = L1Profile(float(epsilon), first_hidden_norms(m, advset.model_inputs(pipeline)))
        logger.info("L1 profile eps=%g: %s", epsilon, profiles[float(epsilon)].summary())
    return profiles


def emit_l1_profiles(profiles, path, metadata=None):
    """CSV of (epsilon, sample_index, l1_norm) with per-epsilon summaries as '#' lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metadata = dict(metadata or {})
    lines = [f"# config_hash={metadata.pop('config_hash', 'none')}"]
    lines += [f"# {k}={v}" for k, v in metadata.items()]
    clean = profiles.get(0.0)
    for epsilon, profile in profiles.items():
        stats = " ".join(f"{k}={v!r}" for k, v in profile.summary().items())
        if clean is not None and epsilon != 0.0:
            stats += f" overlaps_clean={profile.overlaps(clean)} exceeds_clean_max={profile.exceeds_max_of(clean)}"
        lines.append(f"# summary epsilon={epsilon!r} {stats}")
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(lines) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(("epsilon", "sample_index", "l1_norm"))
        for epsilon, profile in profiles.items():
            for i, norm in enumerate(profile.norms):
                writer.writerow((repr(epsilon), i, repr(float(norm))))
    logger.info("L1 profiles written to %s", path)
    return path
