"""Run configuration: defaults, flat key-value config files, CLI overrides.

File format is deliberately primitive ("key = value" lines, '#' comments)
so runs stay scriptable; any flag given on the command line wins over the
file."""

from dataclasses import dataclass, fields

from .attribution import METHODS
from .codebook import LABEL_SOURCES
from .errors import ConfigError


@dataclass
class RunConfig:
    seed: int = 1
    delta: float = 1.0 / 6.0
    methods: tuple = ("deconvnet",)
    lrp_epsilon: float = 1e-2
    epochs: int = 5
    learning_rate: float = 0.05
    momentum: float = 0.9
    batch_size: int = 64
    train_count: int = 10000
    test_count: int = 2000
    num_classes: int = 10
    label_source: str = "blackbox"

    def validate(self):
        if not 0.0 <= self.delta < 0.5:
            raise ConfigError(f"delta must be in [0, 0.5), got {self.delta}")
        if not self.lrp_epsilon > 0:
            raise ConfigError(f"lrp_epsilon must be positive, got {self.lrp_epsilon}")
        if self.label_source not in LABEL_SOURCES:
            raise ConfigError(f"label_source must be one of {LABEL_SOURCES}")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; expected one of {METHODS}")
        for name in ("epochs", "batch_size", "train_count", "test_count", "num_classes"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        return self

    def as_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["methods"] = list(self.methods)
        return d


_PARSERS = {
    "seed": int,
    "delta": float,
    "lrp_epsilon": float,
    "epochs": int,
    "learning_rate": float,
    "momentum": float,
    "batch_size": int,
    "train_count": int,
    "test_count": int,
    "num_classes": int,
    "label_source": str,
    "methods": lambda s: tuple(part.strip() for part in s.split(",") if part.strip()),
}


def parse_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in _PARSERS:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                try:
                    values[key] = _PARSERS[key](value)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def resolve(file_values=None, overrides=None):
    """Defaults < config file < explicit CLI flags."""
    merged = {}
    merged.update(file_values or {})
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    unknown = set(merged) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "methods" in merged and isinstance(merged["methods"], str):
        merged["methods"] = _PARSERS["methods"](merged["methods"])
    return RunConfig(**merged).validate()
