"""Flat ``key = value`` configuration for models and training runs."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from ..dpr import DprConfig
from ..gsr import GsrConfig
from ..hfr import HfrConfig, UNetConfig
from ..losses import LossWeights

STAGE1_CHOICES = ("gsr", "unet")
STAGE2_CHOICES = ("dpr", "unet")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AblationSpec:
    stage1: str = "gsr"
    stage2: str = "dpr"

    def __post_init__(self):
        if self.stage1 not in STAGE1_CHOICES:
            raise ConfigError(f"stage1 must be one of {STAGE1_CHOICES}, got {self.stage1!r}")
        if self.stage2 not in STAGE2_CHOICES:
            raise ConfigError(f"stage2 must be one of {STAGE2_CHOICES}, got {self.stage2!r}")

    @property
    def label(self) -> str:
        return f"{self.stage1.upper()}+{self.stage2.upper()}"


@dataclass(frozen=True)
class ModelConfig:
    """Everything needed to rebuild the network; echoed into checkpoints."""

    stage1: str = "gsr"
    stage2: str = "dpr"
    seed: int = 0
    gsr_channels: int = 16
    gsr_blocks: tuple[int, ...] = (1, 2, 2, 4)
    gsr_heads: tuple[int, ...] = (1, 2, 2, 4)
    gsr_ffn: int = 2
    hfr_depth: int = 3
    hfr_channels: int = 16
    dpr_layers: int = 3
    dpr_channels: int = 64
    dpr_cond: int = 32
    dpr_encoder_blocks: int = 3
    unet1_depth: int = 4
    unet1_channels: int = 16
    unet2_depth: int = 3
    unet2_channels: int = 16

    def __post_init__(self):
        AblationSpec(self.stage1, self.stage2)
        # build each sub-config once so invalid values fail at load time
        self.gsr, self.hfr, self.dpr, self.unet1, self.unet2  # noqa: B018

    @property
    def ablation(self) -> AblationSpec:
        return AblationSpec(self.stage1, self.stage2)

    @property
    def gsr(self) -> GsrConfig:
        return GsrConfig(self.gsr_channels, 4, tuple(self.gsr_blocks), tuple(self.gsr_heads), self.gsr_ffn, self.seed)

    @property
    def hfr(self) -> HfrConfig:
        return HfrConfig(self.hfr_depth, self.hfr_channels, self.seed + 1)

    @property
    def dpr(self) -> DprConfig:
        return DprConfig(self.dpr_layers, self.dpr_channels, self.dpr_cond, self.dpr_encoder_blocks, self.seed + 2)

    @property
    def unet1(self) -> UNetConfig:
        return UNetConfig(3, self.unet1_depth, self.unet1_channels, self.seed + 3)

    @property
    def unet2(self) -> UNetConfig:
        return UNetConfig(3, self.unet2_depth, self.unet2_channels, self.seed + 4)

    @property
    def multiple(self) -> int:
        """Image side lengths must be divisible by this."""
        ll_multiple = self.gsr.multiple if self.stage1 == "gsr" else self.unet1.multiple
        ll_multiple = max(ll_multiple, self.hfr.unet().multiple)
        full = 2 * ll_multiple
        if self.stage2 == "unet":
            full = max(full, self.unet2.multiple)
        return full

    def to_text(self) -> str:
        return dump(self)

    @classmethod
    def from_text(cls, text: str) -> "ModelConfig":
        return cls(**parse_pairs(text, cls))

    def diff(self, other: "ModelConfig") -> list[str]:
        return [f.name for f in fields(self) if getattr(self, f.name) != getattr(other, f.name)]


@dataclass(frozen=True)
class TrainConfig:
    input_dir: str = ""
    target_dir: str = ""
    manifest: str = ""
    out_dir: str = "runs/default"
    steps: int = 2000
    lr: float = 1e-4
    crop: int = 64
    checkpoint_every: int = 500
    log_every: int = 1
    flip: bool = True
    brightness_jitter: float = 0.1
    saturation_jitter: float = 0.1
    w_lab: float = 1.0
    w_ms: float = 0.5
    tap_weights: tuple[float, ...] = (1.0,) * 6
    lambda_r: float = 2.0
    lambda_smooth: float = 2.0
    smooth_beta: float = 1.0
    model: ModelConfig = ModelConfig()

    def __post_init__(self):
        if self.steps < 0:
            raise ConfigError("steps must be >= 0")
        if self.crop % 16:
            raise ConfigError(f"crop must be divisible by 16, got {self.crop}")
        if not 0 <= self.brightness_jitter < 1 or not 0 <= self.saturation_jitter < 1:
            raise ConfigError("jitter amplitudes must lie in [0, 1)")
        self.loss_weights  # noqa: B018

    @property
    def seed(self) -> int:
        return self.model.seed

    @property
    def loss_weights(self) -> LossWeights:
        return LossWeights(self.w_lab, self.w_ms, tuple(self.tap_weights), self.lambda_r,
                           self.lambda_smooth, self.smooth_beta)

    def with_seed(self, seed: int) -> "TrainConfig":
        return dataclasses.replace(self, model=dataclasses.replace(self.model, seed=seed))

    def replace(self, **changes) -> "TrainConfig":
        model_keys = {f.name for f in fields(ModelConfig)}
        model_changes = {k: v for k, v in changes.items() if k in model_keys}
        rest = {k: v for k, v in changes.items() if k not in model_keys}
        return dataclasses.replace(self, model=dataclasses.replace(self.model, **model_changes), **rest)

    def to_text(self) -> str:
        own = dump(self, skip=("model",))
        return own + self.model.to_text()

    @classmethod
    def from_text(cls, text: str) -> "TrainConfig":
        model_keys = {f.name for f in fields(ModelConfig)}
        own_keys = {f.name for f in fields(cls)} - {"model"}
        pairs = _read_pairs(text)
        unknown = [k for k in pairs if k not in model_keys | own_keys]
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
        model = ModelConfig(**_convert({k: v for k, v in pairs.items() if k in model_keys}, ModelConfig))
        own = _convert({k: v for k, v in pairs.items() if k in own_keys}, cls)
        return cls(model=model, **own)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump(obj, skip=()) -> str:
    return "".join(f"{f.name} = {_format(getattr(obj, f.name))}\n" for f in fields(obj) if f.name not in skip)


def _read_pairs(text: str) -> dict[str, str]:
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


def _parse_value(text: str, kind):
    if kind is bool:
        lowered = text.lower()
        if lowered not in ("true", "false", "1", "0", "yes", "no"):
            raise ConfigError(f"not a boolean: {text!r}")
        return lowered in ("true", "1", "yes")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    return text


_TUPLE_ITEM = {"tuple[int, ...]": int, "tuple[float, ...]": float}


def _convert(pairs: dict[str, str], cls) -> dict:
    types = {f.name: f.type for f in fields(cls)}
    out = {}
    for key, text in pairs.items():
        kind = types[key]
        try:
            if kind in _TUPLE_ITEM:
                out[key] = tuple(_parse_value(t.strip(), _TUPLE_ITEM[kind]) for t in text.split(",") if t.strip())
            else:
                out[key] = _parse_value(text, {"int": int, "float": float, "bool": bool}.get(kind, str))
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {text!r} ({exc})") from None
    return out


def parse_pairs(text: str, cls) -> dict:
    pairs = _read_pairs(text)
    known = {f.name for f in fields(cls)}
    unknown = [k for k in pairs if k not in known]
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    return _convert(pairs, cls)
