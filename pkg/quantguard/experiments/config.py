import difflib
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from quantguard.attacks import FAMILIES, AttackSpec
from quantguard.config import dump_yaml, load_config
from quantguard.data_pipeline import VALID_INPUT_BITS, PipelineConfig
from quantguard.errors import ConfigError
from quantguard.network import ARCHITECTURES

# keys that locate inputs but do not change results
UNHASHED_KEYS = ("data_dir",)
# keys that only affect evaluation, left out of the checkpoint hash
EVALUATION_KEYS = ("model_id", "attack_family", "alpha_fraction", "eval_epsilons", "l1_samples", "l1_epsilons")
INT_LISTS = ("widths",)
FLOAT_LISTS = ("lr_milestones", "eval_epsilons", "l1_epsilons")


def _closest(key, valid):
    match = difflib.get_close_matches(key, valid, n=1, cutoff=0.5)
    return f"; did you mean '{match[0]}'?" if match else f"; valid keys: {', '.join(valid)}"


def _check_keys(raw, cls, prefix=""):
    valid = [f.name for f in fields(cls)]
    for key in raw:
        if key not in valid:
            dotted = [prefix + name for name in valid]
            raise ConfigError(f"unknown config key '{prefix}{key}'{_closest(prefix + key, dotted)}")


@dataclass(frozen=True)
class Seeds:
    init: int = 1
    shuffle: int = 2
    attack: int = 3

    def __post_init__(self):
        for name in ("init", "shuffle", "attack"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or not 0 <= value < 2**64:
                raise ConfigError(f"seeds.{name} must be an integer in [0, 2**64), got {value!r}")

    def offset(self, k):
        return Seeds(self.init + k, self.shuffle + k, self.attack + k)


@dataclass(frozen=True)
class AdvTrain:
    family: str = "rfgsm"
    epsilon_train: float = 0.3
    alpha_fraction: float = 0.5

    def __post_init__(self):
        if self.family != "rfgsm":
            raise ConfigError(f"adv_train.family must be 'rfgsm', got '{self.family}'")
        if not 0 < self.epsilon_train < 1:
            raise ConfigError(f"adv_train.epsilon_train must lie in (0, 1), got {self.epsilon_train}")
        if not 0 <= self.alpha_fraction < 1:
            raise ConfigError(f"adv_train.alpha_fraction must lie in [0, 1), got {self.alpha_fraction}")


@dataclass(frozen=True)
class ExperimentConfig:
    model_id: str = ""
    arch: str = "FCN2"
    widths: tuple = ()
    input_dim: int = 784
    binarized: bool = False
    input_bits: int = 8
    epochs: int = 10
    batch_size: int = 100
    lr: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    lr_milestones: tuple = (0.5, 0.75)
    lr_gamma: float = 0.1
    adv_train: AdvTrain = None
    attack_family: str = "fgsm"
    alpha_fraction: float = 0.5
    eval_epsilons: tuple = (0.0, 0.1, 0.2, 0.3)
    l1_samples: int = 1000
    l1_epsilons: tuple = (0.0, 0.1, 0.3)
    seeds: Seeds = field(default_factory=Seeds)
    data_dir: str = None

    def __post_init__(self):
        if self.arch not in (*ARCHITECTURES, "custom"):
            raise ConfigError(f"arch must be one of {[*ARCHITECTURES, 'custom']}, got '{self.arch}'")
        if self.arch == "custom" and not self.widths:
            raise ConfigError("arch 'custom' needs a non-empty widths list")
        if self.input_bits not in VALID_INPUT_BITS:
            raise ConfigError(f"input_bits must be one of {VALID_INPUT_BITS}, got {self.input_bits}")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError(f"epochs and batch_size must be positive, got {self.epochs}/{self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")
        if self.attack_family not in FAMILIES[1:]:
            raise ConfigError(f"attack_family must be one of {FAMILIES[1:]}, got '{self.attack_family}'")
        for name in ("eval_epsilons", "l1_epsilons"):
            values = getattr(self, name)
            if not values or values[0] != 0 or list(values) != sorted(values):
                raise ConfigError(f"{name} must be sorted ascending and start at 0, got {list(values)}")
            if any(not 0 <= eps <= 1 for eps in values):
                raise ConfigError(f"{name} must lie in [0, 1], got {list(values)}")

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw)
        _check_keys(raw, cls)
        seeds = raw.pop("seeds", None) or {}
        if not isinstance(seeds, dict):
            raise ConfigError(f"seeds must be a mapping of init/shuffle/attack, got {seeds!r}")
        _check_keys(seeds, Seeds, "seeds.")
        adv = raw.pop("adv_train", None)
        if adv is not None:
            if not isinstance(adv, dict):
                raise ConfigError(f"adv_train must be a mapping or null, got {adv!r}")
            _check_keys(adv, AdvTrain, "adv_train.")
        try:
            for key in INT_LISTS + FLOAT_LISTS:
                if key in raw:
                    cast = int if key in INT_LISTS else float
                    raw[key] = tuple(cast(v) for v in (raw[key] or ()))
            return cls(
                **raw,
                seeds=Seeds(**{k: int(v) for k, v in seeds.items()}),
                adv_train=AdvTrain(**adv) if adv is not None else None,
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config value: {exc}") from exc

    def to_dict(self):
        out = asdict(self)
        for key in INT_LISTS + FLOAT_LISTS:
            out[key] = list(out[key])
        return out

    def config_hash(self):
        """SHA-256 over the canonical JSON of every result-bearing key."""
        payload = {k: v for k, v in self.to_dict().items() if k not in UNHASHED_KEYS}
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).digest()

    def training_hash(self):
        """
        SHA-256 over the keys that shape a trained model, stored in checkpoints.

        The attack seed counts only when adversarial training consumes it.
        """
        payload = {
            k: v for k, v in self.to_dict().items() if k not in UNHASHED_KEYS + EVALUATION_KEYS
        }
        if self.adv_train is None:
            del payload["seeds"]["attack"]
        return hashlib.sha256(json.dumps(payload, sort_keys=True).encode("utf-8")).digest()

    @property
    def resolved_model_id(self):
        if self.model_id:
            return self.model_id
        kind = "bnn" if self.binarized else "full"
        suffix = "-adv" if self.adv_train else ""
        return f"{self.arch}-{kind}-{self.input_bits}b{suffix}"

    def pipeline(self, batch_size=None):
        return PipelineConfig(
            input_bits=self.input_bits,
            shuffle_seed=self.seeds.shuffle,
            batch_size=batch_size or self.batch_size,
        )

    def attack_spec(self, epsilon, family=None):
        family = family or self.attack_family
        if epsilon == 0:
            family = "none"
        return AttackSpec(family=family, epsilon=epsilon, alpha_fraction=self.alpha_fraction, seed=self.seeds.attack)

    def with_seeds(self, seeds):
        return replace(self, seeds=seeds)

    def with_changes(self, **changes):
        return replace(self, **changes)


def resolve_config(path=None, overrides=(), profile=None):
    return ExperimentConfig.from_dict(load_config(path, overrides, profile))


def write_effective_config(cfg, out_dir, name="effective_config.yaml"):
    return dump_yaml(cfg.to_dict(), f"{out_dir}/{name}")
