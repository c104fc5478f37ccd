import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from quantguard.attacks import AttackSpec, clean_accuracy, perturb
from quantguard.data_pipeline import load_mnist, raw_batches
from quantguard.errors import DivergenceError
from quantguard.network import SGDState, backward, build, forward, save_checkpoint, sgd_step, step_decay_lr
from quantguard.tensor_core import concat_rows

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataBundle:
    train: object
    test: object


def load_data(cfg):
    return DataBundle(train=load_mnist("train", cfg.data_dir), test=load_mnist("test", cfg.data_dir))


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    loss: float
    test_acc: float
    lr: float

    def to_line(self):
        return f"epoch={self.epoch} loss={self.loss:.6f} test_acc={self.test_acc:.2f} lr={self.lr:g}"


@dataclass
class TrainingLog:
    model_id: str
    records: list = field(default_factory=list)

    def append(self, record):
        self.records.append(record)

    @property
    def final_test_acc(self):
        return self.records[-1].test_acc if self.records else None

    def write(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [f"# model_id={self.model_id}"] + [r.to_line() for r in self.records]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def adversarial_spec(cfg):
    adv = cfg.adv_train
    return AttackSpec(
        family=adv.family,
        epsilon=adv.epsilon_train,
        alpha_fraction=adv.alpha_fraction,
        seed=cfg.seeds.attack,
    )


def training_inputs(m, pipeline, raw, labels, index, spec, epoch):
    """Model inputs for one batch: first half clean, second half R-FGSM adversaries."""
    if spec is None:
        return pipeline.quantize(raw)
    half = len(labels) // 2
    clean = raw.rows(slice(0, half))
    adversarial = perturb(
        m, pipeline, raw.rows(slice(half, None)), labels[half:], spec, index[half:], epoch
    )
    parts = [clean, adversarial] if half else [adversarial]
    return pipeline.quantize(concat_rows(parts))


def train(cfg, data, checkpoint_path=None, log_path=None):
    """Standard or adversarial training; returns (model, TrainingLog)."""
    m = build(cfg.arch, cfg.binarized, cfg.seeds.init, widths=cfg.widths or None, input_dim=cfg.input_dim)
    pipeline = cfg.pipeline()
    spec = adversarial_spec(cfg) if cfg.adv_train else None
    state = SGDState()
    log = TrainingLog(model_id=cfg.resolved_model_id)
    logger.info(
        "🔹 Training %s for %d epochs (%d parameters%s)",
        log.model_id, cfg.epochs, m.parameter_count(),
        f", R-FGSM eps={spec.epsilon}" if spec else "",
    )

    for epoch in range(cfg.epochs):
        lr = step_decay_lr(cfg.lr, epoch, cfg.epochs, cfg.lr_milestones, cfg.lr_gamma)
        total, count = 0.0, 0
        for batch_index, (raw, labels, index) in enumerate(raw_batches(data.train, pipeline, epoch)):
            inputs = training_inputs(m, pipeline, raw, labels, index, spec, epoch)
            _, cache = forward(m, inputs, "train")
            grads = backward(m, cache, labels)
            if not math.isfinite(grads.loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch + 1}, batch {batch_index}")
            try:
                sgd_step(m, grads, lr, cfg.weight_decay, cfg.momentum, state)
            except DivergenceError as exc:
                raise DivergenceError(f"epoch {epoch + 1}, batch {batch_index}: {exc}") from exc
            total += grads.loss * len(labels)
            count += len(labels)

        record = EpochRecord(epoch=epoch + 1, loss=total / count, test_acc=clean_accuracy(m, pipeline, data.test), lr=lr)
        log.append(record)
        logger.info("%s %s", log.model_id, record.to_line())

    if checkpoint_path:
        save_checkpoint(m, checkpoint_path, cfg.training_hash())
    if log_path:
        log.write(log_path)
    return m, log
