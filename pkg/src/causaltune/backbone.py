"""Frozen toy transformer encoder, artifact injection and the linear segmentation head.

Blocks are pre-norm: ``x + Attn(LN(x))`` then ``x + FFN(LN(x))``, and a final
layer norm sits in front of the head.  Weights are drawn once from a seeded
generator as unit-variance uniforms scaled by ``1/sqrt(fan_in)``; block
layer-norm scales are one, the final norm scale is ``FINAL_NORM_SCALE``, all
offsets zero.  Every array is read-only.  Images are standardized with
``PIXEL_MEAN``/``PIXEL_STD`` before patch embedding.  There is no positional
embedding and no class token.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, ValidationError
from .spectral import FeatureMap


PIXEL_MEAN = 0.5
PIXEL_STD = 0.25
FINAL_NORM_SCALE = 8.0


def _ro(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ToyBackbone:
    n_layers: int
    width: int
    heads: int
    ffn: int
    patch: int
    seed: int
    params: dict

    @classmethod
    def build(cls, n_layers: int = 4, width: int = 32, heads: int = 2, ffn: int = 64,
              patch: int = 8, seed: int = 0, in_channels: int = 3) -> "ToyBackbone":
        if width % heads:
            raise ValidationError(f"width {width} is not divisible by {heads} heads")
        rng = np.random.default_rng(seed)

        def lin(fan_in, fan_out):
            s = np.sqrt(3.0 / fan_in)
            return rng.uniform(-s, s, (fan_in, fan_out)), rng.uniform(-s, s, fan_out)

        p = {}
        p["patch.w"], p["patch.b"] = lin(patch * patch * in_channels, width)
        for i in range(1, n_layers + 1):
            pre = f"layer{i}."
            p[pre + "ln1.g"], p[pre + "ln1.b"] = np.ones(width), np.zeros(width)
            for name in ("q", "k", "v", "o"):
                p[pre + f"attn.w{name}"], p[pre + f"attn.b{name}"] = lin(width, width)
            p[pre + "ln2.g"], p[pre + "ln2.b"] = np.ones(width), np.zeros(width)
            p[pre + "ffn.w1"], p[pre + "ffn.b1"] = lin(width, ffn)
            p[pre + "ffn.w2"], p[pre + "ffn.b2"] = lin(ffn, width)
        p["norm.g"], p["norm.b"] = np.full(width, FINAL_NORM_SCALE), np.zeros(width)
        return cls(n_layers, width, heads, ffn, patch, seed, {k: _ro(v) for k, v in p.items()})

    def digest(self) -> str:
        """SHA-256 over every parameter name and its bytes."""
        h = hashlib.sha256()
        for name in sorted(self.params):
            h.update(name.encode())
            h.update(np.ascontiguousarray(self.params[name]).tobytes())
        return h.hexdigest()

    def grid(self, image_hw) -> tuple[int, int]:
        Himg, Wimg = image_hw
        if Himg % self.patch or Wimg % self.patch:
            raise DimensionError(f"image {Himg}x{Wimg} is not divisible by patch size {self.patch}")
        return Himg // self.patch, Wimg // self.patch


def _as_batch(images) -> np.ndarray:
    x = np.asarray(images, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4:
        raise DimensionError(f"images must be (H, W, 3) or (B, H, W, 3), got {x.shape}")
    return x


def standardize(images) -> np.ndarray:
    return (_as_batch(images) - PIXEL_MEAN) / PIXEL_STD


def embed_tensor(images, bb: ToyBackbone):
    """(B, Himg, Wimg, C) -> (B, h, w, c) by non-overlapping patch projection."""
    x = _as_batch(images)
    B, Himg, Wimg, C = x.shape
    h, w = bb.grid((Himg, Wimg))
    p = bb.patch
    patches = x.reshape(B, h, p, w, p, C).transpose(0, 1, 3, 2, 4, 5).reshape(B, h, w, p * p * C)
    return ad.matmul(ad.Tensor(patches), bb.params["patch.w"]) + bb.params["patch.b"]


def embed(image, bb: ToyBackbone) -> FeatureMap:
    x = np.asarray(image, dtype=np.float64)
    if x.ndim != 3:
        raise DimensionError(f"embed takes a single H x W x 3 image, got {x.shape}")
    return FeatureMap(embed_tensor(x, bb).data[0])


def block_tensor(x, bb: ToyBackbone, layer: int):
    """One frozen pre-norm transformer block on (B, h, w, c)."""
    P = bb.params
    pre = f"layer{layer}."
    B, h, w, c = x.shape
    L, nh = h * w, bb.heads
    dh = c // nh
    t = ad.reshape(x, (B, L, c))

    y = ad.layer_norm(t, P[pre + "ln1.g"], P[pre + "ln1.b"])

    def heads(z):
        return ad.transpose(ad.reshape(z, (B, L, nh, dh)), (0, 2, 1, 3))

    q = heads(ad.matmul(y, P[pre + "attn.wq"]) + P[pre + "attn.bq"])
    k = heads(ad.matmul(y, P[pre + "attn.wk"]) + P[pre + "attn.bk"])
    v = heads(ad.matmul(y, P[pre + "attn.wv"]) + P[pre + "attn.bv"])
    att = ad.softmax(ad.matmul(q, ad.transpose(k, (0, 1, 3, 2))) * (1.0 / np.sqrt(dh)))
    o = ad.reshape(ad.transpose(ad.matmul(att, v), (0, 2, 1, 3)), (B, L, c))
    t = t + ad.matmul(o, P[pre + "attn.wo"]) + P[pre + "attn.bo"]

    y = ad.layer_norm(t, P[pre + "ln2.g"], P[pre + "ln2.b"])
    hid = ad.gelu(ad.matmul(y, P[pre + "ffn.w1"]) + P[pre + "ffn.b1"])
    t = t + ad.matmul(hid, P[pre + "ffn.w2"]) + P[pre + "ffn.b2"]
    return ad.reshape(t, (B, h, w, c))


@dataclass(frozen=True)
class ArtifactInjector:
    """Fixed bias of magnitude ``beta`` added at a fixed token subset in chosen layers."""

    layers: tuple
    tokens: tuple
    direction: np.ndarray
    beta: float

    def __post_init__(self):
        if self.beta < 0 or not np.isfinite(self.beta):
            raise ValidationError(f"artifact magnitude must be finite and >= 0, got {self.beta}")

    @classmethod
    def create(cls, grid, width: int, beta: float, layers=(3, 4), n_tokens: int = 3,
               seed: int = 0) -> "ArtifactInjector":
        h, w = grid
        rng = np.random.default_rng(seed)
        flat = rng.choice(h * w, size=n_tokens, replace=False)
        tokens = tuple(sorted((int(i) // w, int(i) % w) for i in flat))
        d = rng.normal(size=width)
        return cls(tuple(layers), tokens, _ro(d / np.linalg.norm(d)), float(beta))

    def bias(self, grid) -> np.ndarray:
        h, w = grid
        out = np.zeros((h, w, self.direction.size))
        for i, j in self.tokens:
            if not (0 <= i < h and 0 <= j < w):
                raise DimensionError(f"artifact token {(i, j)} outside the {h}x{w} grid")
            out[i, j] = self.beta * self.direction
        return out

    def applies(self, layer: int) -> bool:
        return self.beta > 0 and layer in self.layers


@dataclass(frozen=True)
class SegHead:
    """Linear per-token classifier followed by nearest-neighbour upsampling by ``patch``."""

    weight: np.ndarray
    bias: np.ndarray
    patch: int

    def __post_init__(self):
        if self.weight.ndim != 2 or self.weight.shape[1] < 2:
            raise ValidationError(f"head weight must be c x K with K >= 2, got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[1],):
            raise DimensionError("head bias does not match class count")

    @property
    def num_classes(self) -> int:
        return self.weight.shape[1]

    @classmethod
    def zeros(cls, width: int, num_classes: int, patch: int) -> "SegHead":
        return cls(np.zeros((width, num_classes)), np.zeros(num_classes), patch)

    def tensors(self) -> dict:
        return {"head.w": self.weight, "head.b": self.bias}


def final_norm_tensor(x, bb: ToyBackbone):
    return ad.layer_norm(x, bb.params["norm.g"], bb.params["norm.b"])


def head_tensor(x, w, b, patch: int):
    return ad.upsample_nearest(ad.matmul(x, w) + b, patch)
