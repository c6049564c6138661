"""Pipeline configuration: nested dataclasses loaded from / dumped to JSON dicts."""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import GeometryConfig
from .saliency import SaliencyConfig
from .segment import TrainConfig
from .tracker import TrackerConfig


class ConfigError(ValueError):
    """Schema violation; ``path`` names the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


@dataclass
class PipelineConfig:
    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    saliency: SaliencyConfig = field(default_factory=SaliencyConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tracker: TrackerConfig = field(default_factory=TrackerConfig)
    salient_policy: str = "any-frame"
    salient_fraction: float = 1.0
    feedback: str = "off"
    seed: int = 0

    def validate(self) -> None:
        for name in ("geometry", "saliency", "train", "tracker"):
            try:
                getattr(self, name).validate(name)
            except ValueError as exc:
                msg = str(exc)
                raise ConfigError(msg.split(" ", 1)[0], msg.split(" ", 1)[1]) from None
        if self.salient_policy not in ("any-frame", "fraction"):
            raise ConfigError("salient_policy", "must be 'any-frame' or 'fraction'")
        if not 0 < self.salient_fraction <= 1:
            raise ConfigError("salient_fraction", "must be in (0, 1]")
        if self.feedback not in ("off", "refine-feeds-tracker"):
            raise ConfigError("feedback", "must be 'off' or 'refine-feeds-tracker'")


def to_dict(cfg) -> dict:
    return dataclasses.asdict(cfg)


_SCALARS = {int: (int,), float: (int, float), str: (str,), bool: (bool,)}


def _build(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(path, f"expected an object, got {type(data).__name__}")
    hints = typing.get_type_hints(cls)
    known = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in known:
            raise ConfigError(f"{path}.{key}" if path else key, "unknown field")
    kwargs = {}
    for name, value in data.items():
        fpath = f"{path}.{name}" if path else name
        tp = hints[name]
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, value, fpath)
        elif tp in _SCALARS:
            if isinstance(value, bool) and tp is not bool:
                raise ConfigError(fpath, f"expected {tp.__name__}, got bool")
            if not isinstance(value, _SCALARS[tp]):
                raise ConfigError(fpath, f"expected {tp.__name__}, got {type(value).__name__}")
            kwargs[name] = tp(value)
        elif typing.get_origin(tp) is list or tp is list:
            if not isinstance(value, list):
                raise ConfigError(fpath, f"expected a list, got {type(value).__name__}")
            for i, v in enumerate(value):
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise ConfigError(f"{fpath}[{i}]", "expected a number")
            kwargs[name] = [float(v) for v in value]
        else:
            kwargs[name] = value
    return cls(**kwargs)


def from_dict(data: dict) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "")
    cfg.validate()
    return cfg


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path} is not valid JSON: {exc}") from None
    return from_dict(data)


def merge(data: dict, overrides: dict) -> dict:
    """Deep-merge dotted-path overrides (``{"train.iterations": 50}``) into ``data``."""
    out = json.loads(json.dumps(data))
    for dotted, value in overrides.items():
        node = out
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    return out
