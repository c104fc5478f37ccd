"""
Canned multi-run pipelines that re-measure published MNIST results at FCN2 scale.

Each plan trains a set of variants (one per replicate seed), sweeps or profiles
them, and compares the outcome against embedded reference numbers and trend
checks. Reference cells marked gating decide the verdict together with the
checks; the others are printed for orientation only. A trend check passes when
it holds in a majority of replicates.
"""
import csv
import io
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from quantguard.errors import ConfigError
from quantguard.experiments.config import AdvTrain, ExperimentConfig, write_effective_config
from quantguard.experiments.l1_profile import emit_l1_profiles, l1_profile
from quantguard.experiments.report import emit_report
from quantguard.experiments.sweep import experiment_metadata, sweep_experiment
from quantguard.experiments.training import load_data, train

logger = logging.getLogger(__name__)

COMPARISON_COLUMNS = (
    "variant", "input_bits", "binarized", "epsilon", "measure", "ours", "paper", "delta", "pass",
)
CLEAN_FLOOR = 95.0
TABLE_EPSILONS = (0.0, 0.1, 0.2, 0.3)


@dataclass(frozen=True)
class Variant:
    name: str
    changes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PaperValue:
    variant: str
    epsilon: float
    value: float
    source: str
    tolerance: float = 3.0
    gating: bool = False


@dataclass(frozen=True)
class TrendCheck:
    name: str
    predicate: object  # callable(results: dict[variant name -> run result]) -> bool


@dataclass(frozen=True)
class Plan:
    target: str
    description: str
    variants: tuple
    epsilons: tuple = TABLE_EPSILONS
    replicates: int = 3
    paper: tuple = ()
    checks: tuple = ()
    kind: str = "sweep"  # or "l1"


def _acc(results, variant, epsilon):
    return results[variant].accuracy(epsilon)


def _gap(results, variant, epsilon):
    return _acc(results, variant, 0.0) - _acc(results, variant, epsilon)


def _rows(variant, source, values, tolerance=3.0, gating_epsilons=()):
    return tuple(
        PaperValue(variant, eps, value, source, tolerance, eps in gating_epsilons)
        for eps, value in zip(TABLE_EPSILONS, values)
    )


ADV = {"adv_train": AdvTrain()}
CLEAN = {"adv_train": None}

PLANS = {
    "table2": Plan(
        target="table2",
        description="adversarially trained (R-FGSM, eps_train=0.3) FCN2 at 2b and 8b inputs",
        variants=(
            Variant("adv-2b", {"binarized": False, "input_bits": 2, **ADV}),
            Variant("adv-8b", {"binarized": False, "input_bits": 8, **ADV}),
        ),
        paper=_rows("adv-2b", "Table 2 MNIST 2b", (98.5, 98.5, 84.7, 85.4), gating_epsilons=(0.0, 0.1))
        + _rows("adv-8b", "Table 2 MNIST 8b", (98.0, 84.8, 74.5, 65.9), gating_epsilons=(0.0, 0.1)),
        checks=(
            TrendCheck(
                "adv-2b >= adv-8b at eps 0.1, 0.2, 0.3",
                lambda r: all(_acc(r, "adv-2b", e) >= _acc(r, "adv-8b", e) for e in (0.1, 0.2, 0.3)),
            ),
        ),
    ),
    "fig4b": Plan(
        target="fig4b",
        description="full-precision FCN2 without adversarial training, input depth 2/3/4/8 bits",
        variants=tuple(
            Variant(f"full-{b}b", {"binarized": False, "input_bits": b, **CLEAN}) for b in (2, 3, 4, 8)
        ),
        epsilons=(0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3),
        paper=_rows("full-2b", "Table 5 Full-2b (FCN1)", (97.8, 97.4, 35.4, 35.3), 5.0)
        + _rows("full-4b", "Table 5 Full-4b (FCN1)", (98.1, 71.1, 50.9, 33.7), 5.0)
        + _rows("full-8b", "Table 5 Full-8b (FCN1)", (98.2, 75.9, 38.5, 26.4), 5.0),
        checks=(
            TrendCheck("full-2b at eps 0.1 within 2 points of clean", lambda r: _gap(r, "full-2b", 0.1) <= 2.0),
            TrendCheck("full-8b at eps 0.3 below 50%", lambda r: _acc(r, "full-8b", 0.3) < 50.0),
            TrendCheck(
                "full-2b > full-8b at every eps >= 0.1",
                lambda r: all(
                    _acc(r, "full-2b", e) > _acc(r, "full-8b", e) for e in (0.1, 0.15, 0.2, 0.25, 0.3)
                ),
            ),
        ),
    ),
    "fig5b": Plan(
        target="fig5b",
        description="BNN vs full-precision FCN2 at 8b inputs, no adversarial training",
        variants=(
            Variant("bnn-8b", {"binarized": True, "input_bits": 8, **CLEAN}),
            Variant("full-8b", {"binarized": False, "input_bits": 8, **CLEAN}),
        ),
        epsilons=(0.0, 0.05, 0.1, 0.2, 0.3),
        checks=(
            TrendCheck(
                "bnn-8b gap at eps 0.05 <= full-8b gap",
                lambda r: _gap(r, "bnn-8b", 0.05) <= _gap(r, "full-8b", 0.05),
            ),
            TrendCheck("full-8b beats bnn-8b at eps 0.3", lambda r: _acc(r, "full-8b", 0.3) > _acc(r, "bnn-8b", 0.3)),
        ),
    ),
    "table5-fcn2": Plan(
        target="table5-fcn2",
        description="input and parameter discretization combined, FCN2 (reference numbers are FCN1)",
        variants=tuple(
            Variant(f"{kind}-{b}b", {"binarized": kind == "bnn", "input_bits": b, **CLEAN})
            for b in (2, 4, 8)
            for kind in ("bnn", "full")
        ),
        paper=_rows("bnn-2b", "Table 5 BNN-2b (FCN1)", (96.4, 96.4, 60.7, 62.3), 5.0)
        + _rows("full-2b", "Table 5 Full-2b (FCN1)", (97.8, 97.4, 35.4, 35.3), 5.0)
        + _rows("bnn-4b", "Table 5 BNN-4b (FCN1)", (96.4, 88.9, 76.7, 58.7), 5.0)
        + _rows("full-4b", "Table 5 Full-4b (FCN1)", (98.1, 71.1, 50.9, 33.7), 5.0)
        + _rows("bnn-8b", "Table 5 BNN-8b (FCN1)", (97.1, 89.4, 56.1, 33.6), 5.0)
        + _rows("full-8b", "Table 5 Full-8b (FCN1)", (98.2, 75.9, 38.5, 26.4), 5.0),
        checks=(
            TrendCheck("bnn-2b at eps 0.1 within 2 points of clean", lambda r: _gap(r, "bnn-2b", 0.1) <= 2.0),
            TrendCheck(
                "bnn-2b >= bnn-8b at every eps >= 0.1",
                lambda r: all(_acc(r, "bnn-2b", e) >= _acc(r, "bnn-8b", e) for e in (0.1, 0.2, 0.3)),
            ),
        ),
    ),
    "table3-fcn2": Plan(
        target="table3-fcn2",
        description="adversarially trained BNN vs full-precision FCN2 at 8b inputs",
        variants=(
            Variant("adv-bnn-8b", {"binarized": True, "input_bits": 8, **ADV}),
            Variant("adv-full-8b", {"binarized": False, "input_bits": 8, **ADV}),
        ),
        paper=_rows("adv-bnn-8b", "Table 3 MNIST BNN (FCN1)", (96.9, 89.1, 74.5, 65.8), 5.0)
        + _rows("adv-full-8b", "Table 3 MNIST Full (FCN1)", (98.0, 84.8, 71.0, 61.7), 5.0),
        replicates=1,
    ),
    "table6-fcn2": Plan(
        target="table6-fcn2",
        description="adversarially trained BNN FCN2 at 2b inputs",
        variants=(Variant("adv-bnn-2b", {"binarized": True, "input_bits": 2, **ADV}),),
        paper=_rows("adv-bnn-2b", "Table 6 MNIST BNN-2b (FCN1)", (95.7, 95.7, 89.3, 88.6), 5.0),
        checks=(
            TrendCheck("adv-bnn-2b at eps 0.1 within 2 points of clean", lambda r: _gap(r, "adv-bnn-2b", 0.1) <= 2.0),
        ),
        replicates=1,
    ),
    "fig6": Plan(
        target="fig6",
        description="L1 norm of first hidden layer activations, BNN vs full-precision FCN2 at 8b",
        variants=(
            Variant("bnn-8b", {"binarized": True, "input_bits": 8, **CLEAN}),
            Variant("full-8b", {"binarized": False, "input_bits": 8, **CLEAN}),
        ),
        epsilons=(0.0, 0.1, 0.3),
        checks=(
            TrendCheck(
                "bnn-8b clean variance > full-8b clean variance",
                lambda r: r["bnn-8b"][0.0].variance > r["full-8b"][0.0].variance,
            ),
            TrendCheck("bnn-8b eps 0.1 range overlaps clean range", lambda r: r["bnn-8b"][0.1].overlaps(r["bnn-8b"][0.0])),
            TrendCheck(
                "bnn-8b eps 0.3 max exceeds clean max",
                lambda r: r["bnn-8b"][0.3].exceeds_max_of(r["bnn-8b"][0.0]),
            ),
        ),
        replicates=1,
        kind="l1",
    ),
}

TARGETS = tuple(PLANS)


def _clean_floor_check(plan):
    names = [v.name for v in plan.variants]
    return TrendCheck(
        f"clean accuracy >= {CLEAN_FLOOR:g}% for every variant",
        lambda r: all(_acc(r, name, 0.0) >= CLEAN_FLOOR for name in names),
    )


def plan_checks(plan):
    if plan.kind == "sweep":
        return (*plan.checks, _clean_floor_check(plan))
    return plan.checks


@dataclass(frozen=True)
class RunJob:
    variant: str
    replicate: int
    config: dict
    kind: str
    run_dir: str


def run_job(job):
    """Train one variant and measure it; runs in a worker process."""
    cfg = ExperimentConfig.from_dict(job.config)
    run_dir = Path(job.run_dir)
    write_effective_config(cfg, run_dir)
    data = load_data(cfg)
    m, _ = train(cfg, data, checkpoint_path=run_dir / "model.dqn", log_path=run_dir / "train.log")
    if job.kind == "l1":
        samples = data.test.subset(np.arange(min(cfg.l1_samples, len(data.test))))
        profiles = l1_profile(m, cfg.pipeline(), samples, cfg.l1_epsilons, cfg.seeds.attack)
        emit_l1_profiles(profiles, run_dir / "l1_profile.csv", experiment_metadata(cfg))
        return profiles
    report = sweep_experiment(cfg, m, data.test)
    emit_report(report, run_dir / "sweep.csv", include_volatile=False)
    return report


def plan_jobs(plan, base, out_dir, replicates=None):
    replicates = replicates or plan.replicates
    jobs = []
    for k in range(replicates):
        seeds = base.seeds.offset(k)
        for variant in plan.variants:
            changes = {"model_id": variant.name, "seeds": seeds, **variant.changes}
            if plan.kind == "l1":
                changes["l1_epsilons"] = plan.epsilons
            else:
                changes["eval_epsilons"] = plan.epsilons
            cfg = base.with_changes(**changes)
            run_dir = Path(out_dir) / "runs" / f"{variant.name}-r{k}"
            jobs.append(RunJob(variant.name, k, cfg.to_dict(), plan.kind, str(run_dir)))
    return jobs


def execute(jobs, workers=1):
    """Run jobs, returning results in job order."""
    if workers <= 1 or len(jobs) <= 1:
        return [run_job(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(run_job, jobs))


@dataclass(frozen=True)
class ComparisonRow:
    variant: str
    input_bits: int
    binarized: bool
    epsilon: float
    measure: str
    ours: float
    paper: float = None
    delta: float = None
    passed: bool = None
    gating: bool = False

    def cells(self):
        verdict = "" if self.passed is None else ("pass" if self.passed else "fail")
        if verdict and not self.gating:
            verdict = f"ref-{verdict}"
        return [
            self.variant,
            str(self.input_bits),
            "true" if self.binarized else "false",
            repr(self.epsilon),
            self.measure,
            f"{self.ours:.2f}" if self.measure == "accuracy_pct" else f"{self.ours:.6g}",
            "" if self.paper is None else f"{self.paper:.1f}",
            "" if self.delta is None else f"{self.delta:+.2f}",
            verdict,
        ]


@dataclass(frozen=True)
class CheckOutcome:
    name: str
    holds: int
    total: int

    @property
    def passed(self):
        return self.holds >= self.total // 2 + 1


@dataclass
class Comparison:
    target: str
    rows: list = field(default_factory=list)
    checks: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self):
        gating = all(row.passed for row in self.rows if row.gating)
        return gating and all(check.passed for check in self.checks)

    def render(self):
        out = io.StringIO()
        out.write(f"# config_hash={self.metadata.get('config_hash', 'none')}\n")
        for key, value in self.metadata.items():
            if key != "config_hash":
                out.write(f"# {key}={value}\n")
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(COMPARISON_COLUMNS)
        for row in self.rows:
            writer.writerow(row.cells())
        for check in self.checks:
            status = "pass" if check.passed else "fail"
            out.write(f"# check {check.name}: {check.holds}/{check.total} {status}\n")
        out.write(f"# verdict={'pass' if self.passed else 'fail'}\n")
        return out.getvalue()


def _variant_info(plan, base):
    info = {}
    for variant in plan.variants:
        cfg = base.with_changes(**variant.changes)
        info[variant.name] = (cfg.input_bits, cfg.binarized)
    return info


def _accuracy_rows(plan, base, by_replicate):
    paper = {(p.variant, p.epsilon): p for p in plan.paper}
    info = _variant_info(plan, base)
    rows = []
    for variant in plan.variants:
        bits, binarized = info[variant.name]
        for epsilon in plan.epsilons:
            ours = round(float(np.mean([r[variant.name].accuracy(epsilon) for r in by_replicate])), 2)
            ref = paper.get((variant.name, epsilon))
            if ref is None:
                rows.append(ComparisonRow(variant.name, bits, binarized, epsilon, "accuracy_pct", ours))
                continue
            delta = round(ours - ref.value, 2)
            rows.append(
                ComparisonRow(
                    variant.name, bits, binarized, epsilon, "accuracy_pct", ours,
                    ref.value, delta, abs(delta) <= ref.tolerance, ref.gating,
                )
            )
    return rows


def _l1_rows(plan, base, by_replicate):
    info = _variant_info(plan, base)
    rows = []
    for variant in plan.variants:
        bits, binarized = info[variant.name]
        for epsilon in plan.epsilons:
            profile = by_replicate[0][variant.name][epsilon]
            for measure, value in (("l1_mean", profile.mean), ("l1_variance", profile.variance),
                                   ("l1_min", profile.minimum), ("l1_max", profile.maximum)):
                rows.append(ComparisonRow(variant.name, bits, binarized, epsilon, measure, value))
    return rows


def compare(plan, base, by_replicate):
    """Merge per-replicate results (dicts keyed by variant name) into a Comparison."""
    rows = (_l1_rows if plan.kind == "l1" else _accuracy_rows)(plan, base, by_replicate)
    checks = [
        CheckOutcome(check.name, sum(bool(check.predicate(r)) for r in by_replicate), len(by_replicate))
        for check in plan_checks(plan)
    ]
    return Comparison(
        target=plan.target,
        rows=rows,
        checks=checks,
        metadata={
            "config_hash": base.config_hash().hex(),
            "target": plan.target,
            "description": plan.description,
            "replicates": len(by_replicate),
            "base_seeds": f"init:{base.seeds.init},shuffle:{base.seeds.shuffle},attack:{base.seeds.attack}",
        },
    )


def reproduce(target, base, out_dir, workers=1, replicates=None):
    """Run a canned plan end to end; writes <target>_comparison.csv under out_dir."""
    if target not in PLANS:
        raise ConfigError(f"unknown reproduce target '{target}', available: {', '.join(TARGETS)}")
    plan = PLANS[target]
    out_dir = Path(out_dir)
    write_effective_config(base, out_dir)
    jobs = plan_jobs(plan, base, out_dir, replicates)
    logger.info("🔹 reproduce %s: %d runs on %d worker(s)", target, len(jobs), workers)
    results = execute(jobs, workers)

    by_replicate = {}
    for job, result in zip(jobs, results):
        by_replicate.setdefault(job.replicate, {})[job.variant] = result
    comparison = compare(plan, base, [by_replicate[k] for k in sorted(by_replicate)])

    path = out_dir / f"{target}_comparison.csv"
    path.write_text(comparison.render(), encoding="utf-8")
    logger.info("%s reproduce %s: %s", "✅" if comparison.passed else "❌", target, path)
    return comparison, path
