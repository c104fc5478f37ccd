"""
Command-line surface.

    train       checkpoint (model.dqn) + per-epoch log (train.log)
    attack      adversarial test sets (adversarial_eps<eps>.dqa) from a checkpoint
    sweep       accuracy-vs-epsilon report (sweep.csv / sweep.txt)
    analyze-l1  first-hidden-layer L1 profiles (l1_profile.csv)
    reproduce   canned multi-run comparison against published numbers

Every command writes effective_config.yaml into --out before anything else.
Exit status: 0 when all artifacts were written, 1 on a runtime failure,
2 on a usage error.
"""
import argparse
import logging
from pathlib import Path

import numpy as np
import psutil

from quantguard.attacks import adversarial_testset, save_adversarial_set
from quantguard.data_pipeline import load_mnist
from quantguard.errors import CheckpointError, ConfigError, QuantGuardError
from quantguard.experiments import (
    TARGETS,
    emit_l1_profiles,
    emit_report,
    experiment_metadata,
    l1_profile,
    load_data,
    reproduce,
    resolve_config,
    sweep_experiment,
    train,
    write_effective_config,
)
from quantguard.network import load_checkpoint
from quantguard.utils import display_comparison, handle_execution_error, setup_logging

logger = logging.getLogger(__name__)


def default_workers():
    return psutil.cpu_count(logical=False) or psutil.cpu_count() or 1


def epsilon_list(text):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--eps expects a comma list of numbers, got '{text}'") from None
    if not values:
        raise argparse.ArgumentTypeError("--eps needs at least one value")
    return values


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="yaml file with ExperimentConfig keys")
    common.add_argument("--profile", help="packaged profile to start from (desk, fcn1, smoke)")
    common.add_argument("--out", default="runs", help="output directory (default: %(default)s)")
    common.add_argument("--seed", type=int, help="base seed: init=SEED, shuffle=SEED+1, attack=SEED+2")
    common.add_argument("--eps", type=epsilon_list, help="comma list of epsilons, e.g. 0,0.1,0.2,0.3")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="dotted config override, repeatable; last one wins",
    )
    common.add_argument("--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="quantguard",
        description="Input discretization, binarized networks and FGSM robustness experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("train", parents=[common], help="train one model")

    attack = sub.add_parser("attack", parents=[common], help="craft adversarial test sets")
    attack.add_argument("--checkpoint", required=True, help="model.dqn written by train")

    for name, help_text in (("sweep", "accuracy over an epsilon sweep"), ("analyze-l1", "L1 activation profile")):
        cmd = sub.add_parser(name, parents=[common], help=help_text)
        cmd.add_argument("--checkpoint", help="evaluate this model instead of training one")
        if name == "sweep":
            cmd.add_argument("--format", choices=("csv", "text"), default="csv")

    rep = sub.add_parser("reproduce", parents=[common], help="run a canned comparison")
    rep.add_argument("target", choices=TARGETS)
    rep.add_argument("--workers", type=int, default=default_workers(), help="parallel runs (default: %(default)s)")
    rep.add_argument("--replicates", type=int, help="seeds per variant (default: plan's own)")
    return parser


def _overrides(args):
    overrides = []
    if args.seed is not None:
        overrides += [f"seeds.init={args.seed}", f"seeds.shuffle={args.seed + 1}", f"seeds.attack={args.seed + 2}"]
    if args.eps is not None:
        key = "l1_epsilons" if args.command == "analyze-l1" else "eval_epsilons"
        overrides.append(f"{key}=[{', '.join(repr(e) for e in args.eps)}]")
    return overrides + args.overrides


def _model(args, cfg, out_dir):
    """Checkpointed model plus the test split, or a freshly trained one."""
    if getattr(args, "checkpoint", None):
        try:
            m, _ = load_checkpoint(args.checkpoint, expected_hash=cfg.training_hash())
        except CheckpointError as exc:
            raise CheckpointError(f"{exc}; was it trained with different model, input or training settings?") from exc
        return m, load_mnist("test", cfg.data_dir)
    data = load_data(cfg)
    m, _ = train(cfg, data, checkpoint_path=out_dir / "model.dqn", log_path=out_dir / "train.log")
    return m, data.test


def run_train(args, cfg, out_dir):
    train(cfg, load_data(cfg), checkpoint_path=out_dir / "model.dqn", log_path=out_dir / "train.log")


def run_attack(args, cfg, out_dir):
    m, testset = _model(args, cfg, out_dir)
    pipeline = cfg.pipeline()
    for epsilon in cfg.eval_epsilons:
        advset = adversarial_testset(m, pipeline, testset, cfg.attack_spec(epsilon))
        save_adversarial_set(advset, out_dir / f"adversarial_eps{epsilon:g}.dqa", cfg.config_hash())
        logger.info("eps=%g %s accuracy=%.2f%%", epsilon, advset.spec.effective_family, advset.accuracy(m, pipeline))


def run_sweep(args, cfg, out_dir):
    m, testset = _model(args, cfg, out_dir)
    report = sweep_experiment(cfg, m, testset)
    suffix = "csv" if args.format == "csv" else "txt"
    emit_report(report, out_dir / f"sweep.{suffix}", fmt=args.format)


def run_analyze_l1(args, cfg, out_dir):
    m, testset = _model(args, cfg, out_dir)
    samples = testset.subset(np.arange(min(cfg.l1_samples, len(testset))))
    profiles = l1_profile(m, cfg.pipeline(), samples, cfg.l1_epsilons, cfg.seeds.attack)
    emit_l1_profiles(profiles, out_dir / "l1_profile.csv", experiment_metadata(cfg))


def run_reproduce(args, cfg, out_dir):
    if args.workers < 1:
        raise ConfigError(f"--workers must be at least 1, got {args.workers}")
    comparison, _ = reproduce(args.target, cfg, out_dir / args.target, args.workers, args.replicates)
    display_comparison(comparison)


COMMANDS = {
    "train": run_train,
    "attack": run_attack,
    "sweep": run_sweep,
    "analyze-l1": run_analyze_l1,
    "reproduce": run_reproduce,
}


def parse_and_dispatch(argv=None, configure_logging=False):
    """Run one command; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if configure_logging:
        setup_logging(args.verbose)

    try:
        cfg = resolve_config(args.config, _overrides(args), args.profile)
        out_dir = Path(args.out)
        write_effective_config(cfg, out_dir)
        COMMANDS[args.command](args, cfg, out_dir)
    except (QuantGuardError, OSError) as exc:
        handle_execution_error(exc)
        return 1
    logger.info("✅ %s finished, artifacts in %s", args.command, args.out)
    return 0
