import logging
import time
from dataclasses import dataclass, field

import psutil

from quantguard.attacks import QUANTIZER_GRADIENT, AttackSpec, adversarial_testset
from quantguard.tensor_core import ALGORITHM

logger = logging.getLogger(__name__)

COLUMNS = ("model_id", "input_bits", "binarized", "attack", "epsilon", "accuracy_pct", "n_samples")
VOLATILE_KEYS = ("wall_clock_s", "rss_mb")


@dataclass(frozen=True)
class SweepRow:
    model_id: str
    input_bits: int
    binarized: bool
    attack: str
    epsilon: float
    accuracy_pct: float
    n_samples: int


@dataclass
class SweepReport:
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def accuracy(self, epsilon, model_id=None):
        for row in self.rows:
            if row.epsilon == epsilon and (model_id is None or row.model_id == model_id):
                return row.accuracy_pct
        raise KeyError(f"no row for epsilon={epsilon}" + (f", model {model_id}" if model_id else ""))

    def extend(self, other):
        self.rows.extend(other.rows)


def sweep(m, pipeline, testset, eval_epsilons, family, seed=0, alpha_fraction=0.5, model_id=None, metadata=None):
    """One accuracy row per epsilon over the full adversarial test set; eps=0 is the clean row."""
    started = time.perf_counter()
    model_id = model_id or f"{m.arch}-{'bnn' if m.binarized else 'full'}-{pipeline.input_bits}b"
    report = SweepReport(
        metadata={
            "generator": ALGORITHM,
            "quantizer_gradient": QUANTIZER_GRADIENT,
            "attack_seed": seed,
            **(metadata or {}),
        }
    )
    for epsilon in sorted(eval_epsilons):
        spec = AttackSpec(
            family="none" if epsilon == 0 else family,
            epsilon=epsilon,
            alpha_fraction=alpha_fraction,
            seed=seed,
        )
        advset = adversarial_testset(m, pipeline, testset, spec)
        acc = round(advset.accuracy(m, pipeline), 4)
        report.rows.append(
            SweepRow(model_id, pipeline.input_bits, m.binarized, spec.effective_family, float(epsilon), acc, len(advset))
        )
        logger.info("%s eps=%g %s accuracy=%.2f%%", model_id, epsilon, spec.effective_family, acc)
    report.metadata["wall_clock_s"] = round(time.perf_counter() - started, 3)
    report.metadata["rss_mb"] = round(psutil.Process().memory_info().rss / 2**20, 1)
    return report


def experiment_metadata(cfg):
    return {
        "config_hash": cfg.config_hash().hex(),
        "seeds": f"init:{cfg.seeds.init},shuffle:{cfg.seeds.shuffle},attack:{cfg.seeds.attack}",
        "epochs": cfg.epochs,
        "adv_train": f"rfgsm:{cfg.adv_train.epsilon_train}" if cfg.adv_train else "none",
    }


def sweep_experiment(cfg, m, testset, epsilons=None, family=None):
    return sweep(
        m,
        cfg.pipeline(),
        testset,
        epsilons or cfg.eval_epsilons,
        family or cfg.attack_family,
        seed=cfg.seeds.attack,
        alpha_fraction=cfg.alpha_fraction,
        model_id=cfg.resolved_model_id,
        metadata=experiment_metadata(cfg),
    )
