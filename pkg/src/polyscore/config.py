"""Pipeline configuration: flat TOML file + command-line overrides."""

import dataclasses
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

from . import __version__
from .errors import ValidationError

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


@dataclass
class PipelineConfig:
    # features
    slots: list = field(default_factory=lambda: ["gop", "tempo", "phonemb", "pitch"])
    k: int = 2
    sigma_floor: float = 1e-6
    priors: str = "uniform"  # uniform | estimate | <path to "phone prior" lines>
    epsilon: float = 1e-10
    # embeddings
    dim: int = 32
    window: int = 4
    negatives: int = 5
    embed_epochs: int = 5
    embed_lr: float = 0.025
    # model
    hidden: int = 256
    layers: int = 2
    metrics: list = field(default_factory=lambda: ["pronunciation", "rhythm", "intonation"])
    # training
    lr: float = 1e-3
    batch_size: int = 16
    epochs: int = 30
    clip: float = 5.0
    val_fraction: float = 0.1
    patience: int = 5
    aggregation: str = "mean"
    seed: int = 0
    jobs: int = 1

    @classmethod
    def keys(cls):
        return [f.name for f in dataclasses.fields(cls)]

    def update(self, values, source="config"):
        known = set(self.keys())
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValidationError(f"{source}: unknown config key(s): {', '.join(unknown)}")
        for key, val in values.items():
            current = getattr(self, key)
            if isinstance(current, list) and isinstance(val, str):
                val = [v.strip() for v in val.split(",") if v.strip()]
            elif isinstance(current, bool):
                val = bool(val)
            elif isinstance(current, int) and not isinstance(val, bool):
                val = int(val)
            elif isinstance(current, float):
                val = float(val)
            setattr(self, key, val)
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def load_config(path=None, overrides=None):
    cfg = PipelineConfig()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ValidationError(f"{path}: {exc}") from None
        cfg.update(data, str(path))
    if overrides:
        cfg.update({k: v for k, v in overrides.items() if v is not None}, "command line")
    return cfg


def echo_config(cfg, out_dir, command):
    """Write ``effective_config.toml`` (with toolkit version) into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    body = tomli_w.dumps(cfg.to_dict())
    text = f"# polyscore {__version__}\n# command: {command}\n" + body
    (out_dir / "effective_config.toml").write_text(text, encoding="utf-8")
    (out_dir / "VERSION").write_text(__version__ + "\n", encoding="utf-8")
