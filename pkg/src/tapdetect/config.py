"""Run configuration: one root seed, one DSP config, one config per model.

Config files are TOML or JSON with optional [dsp], [forest] and [cnn]
tables; top-level keys cover paths and split/training settings. Command
line flags override file values. All randomness descends from the root
seed through named sub-seeds (split, forest, cnn, baseline, shuffling), so
a run is reproducible from the config alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dsp import DspConfig
from .errors import ConfigError, MissingInputError
from .forest import ForestConfig
from .neural import CnnConfig

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib


@dataclass(frozen=True)
class RunConfig:
    annotations: Path | None = None
    audio_root: Path | None = None
    out_dir: Path = Path("out")
    target_class: str = "tap water"
    reference_class: str = "water"
    seed: int = 0
    dsp: DspConfig = field(default_factory=DspConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    cnn: CnnConfig = field(default_factory=CnnConfig)
    train_fraction: float = 0.7
    overlap_threshold: float = 0.5
    epochs: int = 16
    batch_size: int = 32
    learning_rate: float = 1e-3
    baseline_trials: int = 32
    smoothing_k: int = 3

    def __post_init__(self):
        if self.smoothing_k < 1 or self.smoothing_k % 2 == 0:
            raise ConfigError(f"smoothing_k must be odd and >= 1, got {self.smoothing_k}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.epochs < 0 or self.batch_size < 1 or self.baseline_trials < 1:
            raise ConfigError("epochs must be >= 0; batch_size and baseline_trials >= 1")


_TOP_LEVEL_KEYS = {
    "annotations",
    "audio_root",
    "out_dir",
    "target_class",
    "reference_class",
    "seed",
    "train_fraction",
    "overlap_threshold",
    "epochs",
    "batch_size",
    "learning_rate",
    "baseline_trials",
    "smoothing_k",
}
_PATH_KEYS = {"annotations", "audio_root", "out_dir"}


def config_from_dict(obj: dict) -> RunConfig:
    unknown = set(obj) - _TOP_LEVEL_KEYS - {"dsp", "forest", "cnn"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in _TOP_LEVEL_KEYS & set(obj):
        kwargs[key] = Path(obj[key]) if key in _PATH_KEYS else obj[key]
    try:
        if "dsp" in obj:
            kwargs["dsp"] = DspConfig(**obj["dsp"])
        if "forest" in obj:
            kwargs["forest"] = ForestConfig(**obj["forest"])
        if "cnn" in obj:
            cnn = dict(obj["cnn"])
            if "channels" in cnn:
                cnn["channels"] = tuple(cnn["channels"])
            kwargs["cnn"] = CnnConfig(**cnn)
        return RunConfig(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"config file not found: {path}")
    raw = path.read_bytes()
    if path.suffix.lower() == ".json":
        obj = json.loads(raw.decode("utf-8"))
    else:
        try:
            obj = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not isinstance(obj, dict):
        raise ConfigError(f"config root must be a table/object, got {type(obj).__name__}")
    return config_from_dict(obj)


def apply_overrides(
    config: RunConfig,
    seed: int | None = None,
    target_class: str | None = None,
    out_dir: str | None = None,
) -> RunConfig:
    """Fold command-line overrides into a config. Model seeds are derived
    from the root seed at training time, so overriding it here is enough."""
    updates: dict = {}
    if seed is not None:
        updates["seed"] = seed
    if target_class is not None:
        updates["target_class"] = target_class
    if out_dir is not None:
        updates["out_dir"] = Path(out_dir)
    return replace(config, **updates) if updates else config
