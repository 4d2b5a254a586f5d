"""The composed segmenter: frozen backbone, optional per-layer adapters, trainable head."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import autodiff as ad
from .adapter import AdapterParams, causal_tune_tensor
from .backbone import (
    ArtifactInjector,
    SegHead,
    ToyBackbone,
    block_tensor,
    embed_tensor,
    final_norm_tensor,
    head_tensor,
    standardize,
)
from .errors import ConfigError, DimensionError
from .filtering import BandPassFilter

ADAPTER_MODES = ("add", "replace")


@dataclass
class ForwardResult:
    logits: ad.Tensor
    features: list = field(default_factory=list)
    refined: list = field(default_factory=list)


@dataclass(frozen=True)
class CausalTuneModel:
    backbone: ToyBackbone
    head: SegHead
    adapters: AdapterParams | None = None
    filters: dict | None = None
    injector: ArtifactInjector | None = None
    adapter_mode: str = "add"
    # training scene seeds, recorded so evaluation can refuse overlapping seeds
    train_seeds: tuple = ()

    def __post_init__(self):
        if self.adapter_mode not in ADAPTER_MODES:
            raise ConfigError(f"adapter mode must be one of {ADAPTER_MODES}, got {self.adapter_mode!r}")
        if self.adapters is not None:
            missing = [i for i in self.adapters.layers if i not in (self.filters or {})]
            if missing:
                raise ConfigError(f"adapted layers {missing} have no band-pass filter")
            bad = [i for i in self.adapters.layers if not 1 <= i <= self.backbone.n_layers]
            if bad:
                raise ConfigError(f"adapter layers {bad} outside 1..{self.backbone.n_layers}")
            if self.adapters.c != self.backbone.width:
                raise DimensionError("adapter width does not match backbone width")

    def trainable(self) -> dict:
        out = dict(self.head.tensors())
        if self.adapters is not None:
            out.update(self.adapters.tensors)
        return out

    def with_trainable(self, arrays: dict) -> "CausalTuneModel":
        head = SegHead(np.asarray(arrays["head.w"]), np.asarray(arrays["head.b"]), self.head.patch)
        adapters = self.adapters.with_tensors(arrays) if self.adapters is not None else None
        return replace(self, head=head, adapters=adapters)

    def forward(self, images, tensors: dict | None = None) -> ForwardResult:
        """Logits (B, Himg, Wimg, K) plus per-layer features before and after refinement.

        ``tensors`` overrides trainable arrays by name (Tensors for recording).
        """
        W = dict(self.trainable())
        if tensors:
            W.update(tensors)
        x = embed_tensor(standardize(images), self.backbone)
        grid = x.shape[1:3]
        features, refined = [], []
        for i in range(1, self.backbone.n_layers + 1):
            f = block_tensor(x, self.backbone, i)
            if self.injector is not None and self.injector.applies(i):
                f = f + self.injector.bias(grid)
            features.append(f)
            if self.adapters is not None and i in self.adapters.layers:
                prefix = f"adapter{i}."
                local = {k[len(prefix):]: v for k, v in W.items() if k.startswith(prefix)}
                filt: BandPassFilter = self.filters[i]
                if (filt.height, filt.width) != tuple(grid):
                    raise DimensionError(f"layer {i} filter grid does not match token grid {grid}")
                delta = causal_tune_tensor(f, local, filt.gain, filt.backend, self.adapters.mlp_depth)
                x = f + delta if self.adapter_mode == "add" else delta
            else:
                x = f
            refined.append(x)
        logits = head_tensor(final_norm_tensor(x, self.backbone), W["head.w"], W["head.b"], self.backbone.patch)
        return ForwardResult(logits, features, refined)

    def loss(self, images, labels, tensors: dict | None = None):
        return ad.cross_entropy(self.forward(images, tensors).logits, labels)

    def predict(self, images, batch: int = 16) -> np.ndarray:
        x = np.asarray(images, dtype=np.float64)
        single = x.ndim == 3
        if single:
            x = x[None]
        out = [np.argmax(self.forward(x[s:s + batch]).logits.data, axis=-1) for s in range(0, len(x), batch)]
        labels = np.concatenate(out, axis=0)
        return labels[0] if single else labels


def forward(image, backbone: ToyBackbone, head: SegHead, adapters: AdapterParams | None = None,
            filt=None, injector: ArtifactInjector | None = None, adapter_mode: str = "add"):
    """Functional entry point: returns (logits array, list of per-layer feature arrays).

    ``filt`` is a single filter shared by every adapted layer or a dict layer -> filter.
    """
    filters = None
    if adapters is not None:
        if filt is None:
            raise ConfigError("adapters need a band-pass filter")
        filters = filt if isinstance(filt, dict) else {i: filt for i in adapters.layers}
    model = CausalTuneModel(backbone, head, adapters, filters, injector, adapter_mode)
    res = model.forward(image)
    logits = res.logits.data
    feats = [f.data for f in res.features]
    if np.asarray(image).ndim == 3:
        return logits[0], [f[0] for f in feats]
    return logits, feats
