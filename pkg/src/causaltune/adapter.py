"""Causal-aware token refinement of the band-passed spectrum.

Per adapted layer the trainable state is a low-rank token matrix ``T = B @ A``
(m x c) and two channel MLPs.  Spectrum cells are flattened row-major into a
sequence of H*W queries of width c:

    W       = softmax(F_cau @ T.T / sqrt(c))      over the m tokens
    F_tilde = F_cau + W @ MLP1(T)
    F_hat   = F_cau + MLP2(F_tilde)

and the spatial refinement is the inverse transform of ``F_hat``.  The
non-causal part of the spectrum never re-enters.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import DimensionError, NumericError, ValidationError
from .filtering import BandPassFilter, split
from .spectral import Backend, FeatureMap, Spectrum, forward_terms, inverse, inverse_terms, transform

MLP_NAMES = ("mlp1", "mlp2")


def _layer_prefix(layer: int) -> str:
    return f"adapter{layer}."


@dataclass(frozen=True)
class AdapterParams:
    """Token factors and MLP weights for every adapted layer.

    ``tensors`` maps names like ``adapter2.B`` or ``adapter2.mlp1.w0`` to arrays.
    MLP weights follow the row-vector convention ``y = x @ w + b``.
    """

    m: int
    r: int
    c: int
    layers: tuple
    mlp_depth: int
    tensors: dict

    def __post_init__(self):
        if self.m < 1 or not 1 <= self.r <= min(self.m, self.c):
            raise ValidationError(f"need m >= 1 and 1 <= r <= min(m, c); got m={self.m}, r={self.r}, c={self.c}")
        if self.mlp_depth not in (1, 2):
            raise ValidationError(f"mlp_depth must be 1 or 2, got {self.mlp_depth}")
        for name, a in self.tensors.items():
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"adapter tensor {name!r} has non-finite entries")
        for layer in self.layers:
            for name, shape in self.expected_shapes(layer).items():
                got = np.shape(self.tensors.get(name))
                if got != shape:
                    raise DimensionError(f"{name!r} has shape {got}, expected {shape}")

    def expected_shapes(self, layer: int) -> dict:
        p, c = _layer_prefix(layer), self.c
        shapes = {p + "B": (self.m, self.r), p + "A": (self.r, c)}
        for mlp in MLP_NAMES:
            for j in range(self.mlp_depth):
                shapes[f"{p}{mlp}.w{j}"] = (c, c)
                shapes[f"{p}{mlp}.b{j}"] = (c,)
        return shapes

    def layer(self, layer: int) -> dict:
        """Arrays for one layer keyed by local names (``B``, ``mlp1.w0``...)."""
        if layer not in self.layers:
            raise IndexError(f"no adapter at layer {layer}; adapted layers are {self.layers}")
        p = _layer_prefix(layer)
        return {k[len(p):]: v for k, v in self.tensors.items() if k.startswith(p)}

    def with_tensors(self, tensors: dict) -> "AdapterParams":
        merged = dict(self.tensors)
        merged.update({k: np.asarray(v, dtype=np.float64) for k, v in tensors.items() if k in self.tensors})
        return AdapterParams(self.m, self.r, self.c, self.layers, self.mlp_depth, merged)

    @classmethod
    def init(cls, c: int, layers, m: int = 16, r: int = 4, seed: int = 0,
             mlp_depth: int = 1) -> "AdapterParams":
        """B, A ~ U(+-1/sqrt(r)); MLP1 ~ U(+-1/sqrt(c)); MLP2 zero."""
        rng = np.random.default_rng(seed)
        tensors = {}
        s_r, s_c = 1.0 / np.sqrt(r), 1.0 / np.sqrt(c)
        for layer in layers:
            p = _layer_prefix(layer)
            tensors[p + "B"] = rng.uniform(-s_r, s_r, (m, r))
            tensors[p + "A"] = rng.uniform(-s_r, s_r, (r, c))
            for j in range(mlp_depth):
                tensors[f"{p}mlp1.w{j}"] = rng.uniform(-s_c, s_c, (c, c))
                tensors[f"{p}mlp1.b{j}"] = rng.uniform(-s_c, s_c, c)
            for j in range(mlp_depth):
                tensors[f"{p}mlp2.w{j}"] = np.zeros((c, c))
                tensors[f"{p}mlp2.b{j}"] = np.zeros(c)
        return cls(m, r, c, tuple(layers), mlp_depth, tensors)


def materialize_tokens(params: AdapterParams, layer: int) -> np.ndarray:
    p = params.layer(layer)
    return p["B"] @ p["A"]


def _mlp(x, p, prefix: str, depth: int):
    h = ad.matmul(x, p[f"{prefix}.w0"]) + p[f"{prefix}.b0"]
    if depth == 2:
        h = ad.matmul(ad.gelu(h), p[f"{prefix}.w1"]) + p[f"{prefix}.b1"]
    return h


def refine_tensors(queries, p: dict, depth: int = 1) -> dict:
    """Tape version of the refinement on a (n, L, c) query tensor.

    ``p`` maps local names to Tensors (or arrays).  Returns the tokens, the
    pre-softmax logits, the attention weights and both refined stages.
    """
    p = {k: ad.const(v) for k, v in p.items()}
    c = queries.shape[-1]
    tokens = ad.matmul(p["B"], p["A"])
    logits = ad.matmul(queries, ad.transpose(tokens, (1, 0))) * (1.0 / np.sqrt(c))
    weights = ad.softmax(logits, axis=-1)
    tilde = queries + ad.matmul(weights, _mlp(tokens, p, "mlp1", depth))
    hat = queries + _mlp(tilde, p, "mlp2", depth)
    return {"tokens": tokens, "logits": logits, "weights": weights, "tilde": tilde, "hat": hat}


def causal_tune_tensor(f, p: dict, gain: np.ndarray, backend=Backend.DCT, depth: int = 1):
    """Refinement of a batched feature tensor (n, H, W, c); returns the spatial output."""
    backend = Backend.parse(backend)
    f = ad.const(f)
    n, H, W, c = f.shape
    g = ad.const(np.asarray(gain)[:, :, None])
    hats = []
    for part in ad.linear_terms([f], forward_terms(backend, H, W)):
        causal = part * g
        out = refine_tensors(ad.reshape(causal, (n, H * W, c)), p, depth)
        hats.append(ad.reshape(out["hat"], (n, H, W, c)))
    (spatial,) = ad.linear_terms(hats, inverse_terms(backend, H, W))
    return spatial


@dataclass(frozen=True)
class RefinementTrace:
    weights: np.ndarray
    tilde: Spectrum
    hat: Spectrum
    spatial: FeatureMap
    logits: np.ndarray


def refine(F_cau: Spectrum, params: AdapterParams, layer: int) -> RefinementTrace:
    """Refine a causal spectrum. Complex spectra refine real and imaginary queries with shared tokens."""
    if F_cau.channels != params.c:
        raise DimensionError(f"spectrum has {F_cau.channels} channels, adapter expects {params.c}")
    H, W, c = F_cau.height, F_cau.width, F_cau.channels
    p = params.layer(layer)
    weights, logits, tildes, hats = [], [], [], []
    for part in F_cau.parts():
        with np.errstate(over="ignore", invalid="ignore"):
            out = refine_tensors(ad.Tensor(part.reshape(1, H * W, c)), p, params.mlp_depth)
        for key in ("weights", "logits", "tilde", "hat"):
            if not np.all(np.isfinite(out[key].data)):
                raise NumericError(f"non-finite values in refinement stage {key!r}")
        weights.append(out["weights"].data[0])
        logits.append(out["logits"].data[0])
        tildes.append(out["tilde"].data[0].reshape(H, W, c))
        hats.append(out["hat"].data[0].reshape(H, W, c))
    hat = Spectrum.from_parts(hats, F_cau.backend)
    return RefinementTrace(
        weights=np.concatenate(weights, axis=0),
        tilde=Spectrum.from_parts(tildes, F_cau.backend),
        hat=hat,
        spatial=inverse(hat),
        logits=np.concatenate(logits, axis=0),
    )


def causal_tune(f: FeatureMap, params: AdapterParams, filt: BandPassFilter, layer: int) -> FeatureMap:
    """Delta f for one layer: transform, keep the causal band, refine, transform back."""
    if not isinstance(f, FeatureMap):
        f = FeatureMap(f)
    if (f.height, f.width) != (filt.height, filt.width):
        raise DimensionError(f"feature grid {f.height}x{f.width} does not match filter {filt.height}x{filt.width}")
    parts = split(transform(f, filt.backend), filt)
    return refine(parts.causal, params, layer).spatial
