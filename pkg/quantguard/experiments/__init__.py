from .config import AdvTrain, ExperimentConfig, Seeds, resolve_config, write_effective_config
from .l1_profile import L1Profile, emit_l1_profiles, l1_profile
from .report import emit_report, parse_report, render_report
from .reproduce import PLANS, TARGETS, Comparison, reproduce
from .sweep import SweepReport, SweepRow, experiment_metadata, sweep, sweep_experiment
from .training import DataBundle, EpochRecord, TrainingLog, load_data, train

__all__ = [
    "PLANS",
    "TARGETS",
    "AdvTrain",
    "Comparison",
    "DataBundle",
    "EpochRecord",
    "ExperimentConfig",
    "L1Profile",
    "Seeds",
    "SweepReport",
    "SweepRow",
    "TrainingLog",
    "emit_l1_profiles",
    "emit_report",
    "experiment_metadata",
    "l1_profile",
    "load_data",
    "parse_report",
    "render_report",
    "reproduce",
    "resolve_config",
    "sweep",
    "sweep_experiment",
    "train",
    "write_effective_config",
]
