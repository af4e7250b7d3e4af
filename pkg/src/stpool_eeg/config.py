"""Plain-text run configuration.

A config file holds ``key = value`` lines; ``#`` starts a comment.  Keys are
the names in :data:`DEFAULTS`; values are parsed according to the type of the
default.  Later sources override earlier ones (defaults < file < flags).
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

from .coords import TsneParams
from .errors import ConfigInvalidError, IoFailure
from .harness import TrainConfig
from .model import ModelConfig

DEFAULTS: dict[str, object] = {
    "montage": "",  # empty: shipped 64-channel layout
    "data_dir": "",
    "cache_dir": "",
    "subjects": "1-109",
    "scheme": "L/R/O/F",
    "window_s": 6.0,
    "transform": "tsne",
    "norm": "zscore",
    "split_seed": 0,
    "fold": 0,
    "synthetic": False,
    "synthetic.n_subjects": 40,
    "synthetic.epochs_per_subject": 10,
    "synthetic.num_classes": 2,
    "synthetic.window_s": 1.0,
    "synthetic.separation": 5.0,
    "synthetic.seed": 0,
}
DEFAULTS.update({f"tsne.{f.name}": f.default for f in fields(TsneParams)})
DEFAULTS.update({f"model.{f.name}": f.default for f in fields(ModelConfig)})
DEFAULTS.update({f"train.{f.name}": f.default for f in fields(TrainConfig)})
# num_classes follows the task scheme unless set explicitly
DEFAULTS["model.num_classes"] = 0
PATH_KEYS = ("montage", "data_dir", "cache_dir")


def _parse_value(key: str, text: str):
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise ConfigInvalidError(f"bad value {text!r} for {key} (expected {type(default).__name__})") from None
    return text


def parse_config_text(text: str, origin: str = "<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigInvalidError(f"{origin}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigInvalidError(f"{origin}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, value)
    return out


def parse_override(item: str) -> tuple[str, object]:
    if "=" not in item:
        raise ConfigInvalidError(f"override {item!r} must look like key=value")
    key, value = (p.strip() for p in item.split("=", 1))
    if key not in DEFAULTS:
        raise ConfigInvalidError(f"unknown key {key!r}")
    return key, _parse_value(key, value)


class RunConfig:
    def __init__(self, values: dict | None = None, source: str = ""):
        self.values = dict(DEFAULTS)
        self.source = source
        self.overrides: list[str] = []
        if values:
            self.values.update(values)

    @classmethod
    def load(cls, path=None, overrides=()) -> "RunConfig":
        values = {}
        source = ""
        if path:
            try:
                text = Path(path).read_text()
            except OSError as exc:
                raise IoFailure(f"cannot read config {path}: {exc}") from exc
            values = parse_config_text(text, str(path))
            source = str(Path(path).resolve())
        cfg = cls(values, source)
        for item in overrides:
            key, value = parse_override(item) if isinstance(item, str) else item
            cfg.values[key] = value
            cfg.overrides.append(key)
        cfg.resolve_paths()
        return cfg

    def resolve_paths(self):
        for key in PATH_KEYS:
            if self.values[key]:
                self.values[key] = str(Path(self.values[key]).expanduser().resolve())

    def set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigInvalidError(f"unknown key {key!r}")
        self.values[key] = value
        self.overrides.append(key)

    def __getitem__(self, key):
        return self.values[key]

    def _section(self, prefix, cls, **fixed):
        kw = {f.name: self.values[f"{prefix}.{f.name}"] for f in fields(cls)}
        kw.update(fixed)
        return cls(**kw)

    def tsne_params(self) -> TsneParams:
        return self._section("tsne", TsneParams)

    def train_config(self) -> TrainConfig:
        return self._section("train", TrainConfig)

    def model_config(self, num_classes: int) -> ModelConfig:
        explicit = self.values["model.num_classes"]
        return self._section("model", ModelConfig, num_classes=explicit or num_classes).validate()

    def manifest(self) -> dict:
        entries = {"config_file": self.source or "(none)", "overrides": " ".join(self.overrides) or "(none)"}
        entries.update({k: self.values[k] for k in sorted(self.values)})
        return entries
