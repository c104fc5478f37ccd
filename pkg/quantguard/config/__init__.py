from .config_loader import apply_overrides, dump_yaml, load_config, load_defaults, load_yaml, merge

__all__ = ["apply_overrides", "dump_yaml", "load_config", "load_defaults", "load_yaml", "merge"]
