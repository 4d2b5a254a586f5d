"""Gaussian band-pass gain grids and the causal / non-causal spectrum split."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError, ValidationError
from .spectral import Backend, Spectrum

DEFAULT_R_LOW = 0.2
DEFAULT_R_HIGH = 0.7


class FilterMode(str, enum.Enum):
    BANDPASS = "bandpass"
    REMOVE_LOW = "remove_low"
    REMOVE_HIGH = "remove_high"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, value) -> "FilterMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            raise ValidationError(f"unknown filter mode {value!r}") from None


def radial_frequency(H: int, W: int, backend=Backend.DCT) -> np.ndarray:
    """Normalized radial frequency per spectrum cell, in [0, sqrt(2)].

    DCT axes are normalized by their own extent (u / (H - 1)).  FFT cells use the
    signed frequency distance to the zero bin, normalized by the Nyquist index.
    """
    backend = Backend.parse(backend)
    if backend is Backend.FFT:
        fu = np.minimum(np.arange(H), H - np.arange(H)) / (H // 2)
        fv = np.minimum(np.arange(W), W - np.arange(W)) / (W // 2)
    else:
        fu = np.arange(H) / (H - 1)
        fv = np.arange(W) / (W - 1)
    return np.sqrt(fu[:, None] ** 2 + fv[None, :] ** 2)


def bandpass_gain(rho, r_low: float, r_high: float):
    """Difference of Gaussians: exp(-rho^2 / 2 R_H^2) - exp(-rho^2 / 2 R_L^2)."""
    rho2 = np.asarray(rho, dtype=np.float64) ** 2
    return np.exp(-rho2 / (2.0 * r_high**2)) - np.exp(-rho2 / (2.0 * r_low**2))


@dataclass(frozen=True)
class BandPassFilter:
    r_low: float
    r_high: float
    height: int
    width: int
    mode: FilterMode
    backend: Backend
    gain: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "v", "gain"])
            for u in range(self.height):
                for v in range(self.width):
                    w.writerow([u, v, repr(float(self.gain[u, v]))])


def _check_cutoffs(r_low: float, r_high: float, mode: FilterMode) -> None:
    for name, r in (("R_L", r_low), ("R_H", r_high)):
        if not np.isfinite(r) or r < 0:
            raise ConfigError(f"{name} must be a finite non-negative number, got {r}")
    if mode is FilterMode.BANDPASS:
        if r_low == 0:
            raise ConfigError("band-pass filter needs R_L > 0")
        if r_low >= r_high:
            raise ConfigError(f"band-pass filter needs R_L < R_H, got {r_low} >= {r_high}")
    elif mode is FilterMode.REMOVE_LOW and r_low == 0:
        raise ConfigError("low-frequency removal needs R_L > 0")
    elif mode is FilterMode.REMOVE_HIGH and r_high == 0:
        raise ConfigError("high-frequency removal needs R_H > 0")


def _haar_mask(H: int, W: int, mode: FilterMode) -> np.ndarray:
    g = np.ones((H, W))
    h2, w2 = H // 2, W // 2
    if mode in (FilterMode.REMOVE_LOW, FilterMode.BANDPASS):
        g[:h2, :w2] = 0.0
    if mode in (FilterMode.REMOVE_HIGH, FilterMode.BANDPASS):
        g[h2:, w2:] = 0.0
    return g


def build_filter(
    r_low: float = DEFAULT_R_LOW,
    r_high: float = DEFAULT_R_HIGH,
    H: int = 8,
    W: int = 8,
    mode=FilterMode.BANDPASS,
    backend=Backend.DCT,
) -> BandPassFilter:
    mode = FilterMode.parse(mode)
    backend = Backend.parse(backend)
    if H < 2 or W < 2:
        raise DimensionError(f"filter grid needs H, W >= 2, got {H} x {W}")
    r_low, r_high = float(r_low), float(r_high)
    _check_cutoffs(r_low, r_high, mode)

    if mode is FilterMode.IDENTITY:
        g = np.ones((H, W))
    elif backend is Backend.HAAR:
        if H % 2 or W % 2:
            raise DimensionError(f"HAAR filter needs even H and W, got {H} x {W}")
        g = _haar_mask(H, W, mode)
    else:
        rho = radial_frequency(H, W, backend)
        if mode is FilterMode.BANDPASS:
            g = bandpass_gain(rho, r_low, r_high)
        elif mode is FilterMode.REMOVE_LOW:
            g = 1.0 - np.exp(-(rho**2) / (2.0 * r_low**2))
        else:
            g = np.exp(-(rho**2) / (2.0 * r_high**2))
    g = np.array(g, dtype=np.float64)
    g.setflags(write=False)
    return BandPassFilter(r_low, r_high, H, W, mode, backend, g)


@dataclass(frozen=True)
class CausalSplit:
    causal: Spectrum
    noncausal: Spectrum


def split(S: Spectrum, filt: BandPassFilter) -> CausalSplit:
    """causal = S * G, noncausal = S * (1 - G), same gain for every channel."""
    if (S.height, S.width) != (filt.height, filt.width):
        raise DimensionError(
            f"spectrum grid {S.height}x{S.width} does not match filter {filt.height}x{filt.width}"
        )
    if S.backend is not filt.backend:
        raise ValidationError(f"{S.backend.value} spectrum with a {filt.backend.value} filter")
    g = filt.gain[:, :, None]
    causal, noncausal = [], []
    for part in S.parts():
        causal.append(part * g)
        noncausal.append(part * (1.0 - g))
    return CausalSplit(
        Spectrum.from_parts(causal, S.backend),
        Spectrum.from_parts(noncausal, S.backend),
    )

