import copy
import logging
from pathlib import Path

import yaml

from quantguard.errors import ConfigError

logger = logging.getLogger(__name__)

CONFIG_PATH = Path(__file__).resolve().parent / "config.yaml"


def load_yaml(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Config file not found at: {path}")
    with open(path, "r", encoding="utf-8") as file:
        loaded = yaml.safe_load(file) or {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path}: expected a mapping at top level, got {type(loaded).__name__}")
    return loaded


def load_defaults(profile=None):
    """Return the selected profile section of the packaged config.yaml."""
    config = load_yaml(CONFIG_PATH)
    profile = profile or config.get("profile", "desk")
    if profile not in config or profile == "profile":
        names = sorted(k for k in config if k != "profile")
        raise ConfigError(f"unknown profile '{profile}', available: {names}")
    logger.debug("Using config profile '%s' from %s", profile, CONFIG_PATH)
    return copy.deepcopy(config[profile])


def merge(base, extra):
    """Recursive dict merge; values in `extra` win."""
    merged = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def parse_override(text):
    """'seeds.init=7' -> (['seeds', 'init'], 7); values are parsed as yaml scalars."""
    if "=" not in text:
        raise ConfigError(f"override '{text}' is not of the form key=value")
    key, raw = text.split("=", 1)
    path = [part for part in key.strip().split(".") if part]
    if not path:
        raise ConfigError(f"override '{text}' has an empty key")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"override '{text}': cannot parse value ({exc})") from exc
    return path, value


def apply_overrides(config, overrides):
    config = copy.deepcopy(config)
    for text in overrides:
        path, value = parse_override(text)
        node = config
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[path[-1]] = value
    return config


def load_config(path=None, overrides=(), profile=None):
    """
    Resolve a raw config dict: packaged profile, then the user file, then overrides.
    A user file may pick its base with a top-level `profile:` key.
    """
    user = load_yaml(path) if path else {}
    profile = profile or user.pop("profile", None)
    user.pop("profile", None)
    return apply_overrides(merge(load_defaults(profile), user), overrides)


def dump_yaml(config, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as file:
        yaml.safe_dump(config, file, sort_keys=False)
    return path
