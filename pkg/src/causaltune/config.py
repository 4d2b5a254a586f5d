"""Run configuration as a flat ``key = value`` text file.

Unknown keys are rejected.  Floats are written with ``repr`` so a
write/read cycle reproduces every value exactly.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .filtering import DEFAULT_R_HIGH, DEFAULT_R_LOW, FilterMode
from .spectral import Backend
from .synthbench import CORRUPTION_KINDS


@dataclass(frozen=True)
class RunConfig:
    # frozen backbone
    backbone_seed: int = 0
    n_layers: int = 4
    width: int = 32
    heads: int = 2
    ffn: int = 64
    patch: int = 8
    image_size: int = 64
    num_classes: int = 4
    artifact_scale: float = 4.0
    artifact_layers: tuple = (3, 4)
    artifact_tokens: int = 3
    # adapter
    adapter: bool = True
    adapter_layers: tuple = (1, 2, 3, 4)
    adapter_m: int = 16
    adapter_r: int = 4
    mlp_depth: int = 1
    adapter_mode: str = "add"
    # filter; layer_cutoffs entries look like "3:0.1:0.6" (layer:R_L:R_H)
    filter_mode: str = "bandpass"
    backend: str = "dct"
    r_low: float = DEFAULT_R_LOW
    r_high: float = DEFAULT_R_HIGH
    layer_cutoffs: tuple = ()
    # optimizer
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    grad_clip: float = 0.0
    # schedule and data
    steps: int = 300
    batch_size: int = 4
    seed: int = 0
    train_scene_start: int = 0
    n_train_scenes: int = 200
    eval_scene_start: int = 100_000
    n_eval_scenes: int = 50
    suite: tuple = ("noise", "fog", "night", "rain")
    outdir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        FilterMode.parse(self.filter_mode)
        Backend.parse(self.backend)
        if self.adapter_mode not in ("add", "replace"):
            raise ConfigError(f"adapter_mode must be add or replace, got {self.adapter_mode!r}")
        for kind in self.suite:
            if kind not in CORRUPTION_KINDS:
                raise ConfigError(f"unknown corruption {kind!r} in suite")
        for name in ("steps", "n_train_scenes", "n_eval_scenes"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.image_size % self.patch:
            raise ConfigError(f"image_size {self.image_size} is not divisible by patch {self.patch}")
        for layer in self.adapter_layers:
            if not 1 <= layer <= self.n_layers:
                raise ConfigError(f"adapter layer {layer} outside 1..{self.n_layers}")
        self.cutoffs_by_layer()

    def cutoffs_by_layer(self) -> dict:
        out = {i: (self.r_low, self.r_high) for i in self.adapter_layers}
        for item in self.layer_cutoffs:
            try:
                layer, rl, rh = item.split(":")
                out[int(layer)] = (float(rl), float(rh))
            except ValueError:
                raise ConfigError(f"bad layer_cutoffs entry {item!r}; expected layer:R_L:R_H") from None
        return out

    def train_seeds(self) -> range:
        return range(self.train_scene_start, self.train_scene_start + self.n_train_scenes)

    def eval_seeds(self) -> range:
        return range(self.eval_scene_start, self.eval_scene_start + self.n_eval_scenes)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # text form --------------------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text: str) -> "RunConfig":
        known = {f.name: f for f in fields(cls)}
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            if key in values:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            values[key] = _parse(value, known[key].default, key)
        return cls(**values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.loads(text)


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_format(x) for x in v)
    return str(v)


def _parse(text: str, default, key: str):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if key in ("adapter_layers", "artifact_layers"):
                return tuple(int(s) for s in items)
            return tuple(items)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key}: {text!r}") from None

