"""Orthonormal 2D frequency transforms applied per channel to feature grids.

Three backends share one representation: every transform is a sum of
separable terms ``coef * (A @ x @ B.T)`` over the spatial axes, evaluated by
the ``sep2d`` kernel.  That keeps the adjoint trivial (transpose each term),
which the autodiff layer relies on.

* ``DCT``  orthonormal DCT-II forward, DCT-III inverse.
* ``FFT``  unitary 2D DFT (``1/sqrt(HW)`` split evenly between directions);
  spectra are stored as real/imaginary pairs in a trailing axis of size 2.
* ``HAAR`` single-level orthogonal Haar decomposition with the LL, LH, HL, HH
  quadrants stored in place.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._core import sep2d
from .errors import DimensionError, ValidationError


class Backend(str, enum.Enum):
    DCT = "dct"
    FFT = "fft"
    HAAR = "haar"

    @classmethod
    def parse(cls, value) -> "Backend":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValidationError(f"unknown transform backend {value!r}") from None


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureMap:
    """Spatial feature grid of shape (H, W, c), channel innermost."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim == 2:
            a = a[:, :, None]
        if a.ndim != 3:
            raise DimensionError(f"feature map must be H x W x c, got shape {a.shape}")
        H, W, c = a.shape
        if H < 2 or W < 2 or c < 1:
            raise DimensionError(f"feature map needs H, W >= 2 and c >= 1, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("feature map contains non-finite values")
        object.__setattr__(self, "data", _freeze(a))

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class Spectrum:
    """Per-channel frequency coefficients.

    ``data`` is (H, W, c) for DCT and HAAR, (H, W, c, 2) for FFT where the last
    axis holds (real, imag).
    """

    data: np.ndarray
    backend: Backend

    def __post_init__(self):
        backend = Backend.parse(self.backend)
        a = np.asarray(self.data, dtype=np.float64)
        if backend is Backend.FFT:
            if a.ndim != 4 or a.shape[-1] != 2:
                raise ValidationError(f"FFT spectrum must be H x W x c x 2, got {a.shape}")
        elif a.ndim != 3:
            raise ValidationError(f"{backend.value} spectrum must be H x W x c, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("spectrum contains non-finite values")
        object.__setattr__(self, "backend", backend)
        object.__setattr__(self, "data", _freeze(a))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    @property
    def is_complex(self) -> bool:
        return self.backend is Backend.FFT

    def parts(self) -> list[np.ndarray]:
        """Real-valued components: [data] or [real, imag]."""
        if self.is_complex:
            return [self.data[..., 0], self.data[..., 1]]
        return [self.data]

    @classmethod
    def from_parts(cls, parts, backend) -> "Spectrum":
        backend = Backend.parse(backend)
        if backend is Backend.FFT:
            return cls(np.stack(parts, axis=-1), backend)
        (data,) = parts
        return cls(data, backend)

    def energy(self) -> float:
        return float(np.sum(self.data**2))


@lru_cache(maxsize=None)
def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix D with D[u, h] = alpha(u) cos(pi (2h+1) u / 2n)."""
    u = np.arange(n)[:, None]
    h = np.arange(n)[None, :]
    d = np.cos(np.pi * (2 * h + 1) * u / (2 * n))
    alpha = np.full(n, np.sqrt(2.0 / n))
    alpha[0] = np.sqrt(1.0 / n)
    return _freeze(alpha[:, None] * d)


@lru_cache(maxsize=None)
def haar_matrix(n: int) -> np.ndarray:
    """Single-level orthogonal Haar analysis matrix; averages on top, details below."""
    if n % 2:
        raise DimensionError(f"Haar transform needs an even length, got {n}")
    m = np.zeros((n, n))
    s = 1.0 / np.sqrt(2.0)
    for i in range(n // 2):
        m[i, 2 * i] = m[i, 2 * i + 1] = s
        m[n // 2 + i, 2 * i] = s
        m[n // 2 + i, 2 * i + 1] = -s
    return _freeze(m)


@lru_cache(maxsize=None)
def dft_matrices(n: int) -> tuple[np.ndarray, np.ndarray]:
    """(C, S) with the unitary DFT matrix equal to C - iS. Both are symmetric."""
    k = np.arange(n)
    ang = 2.0 * np.pi * np.outer(k, k) / n
    scale = 1.0 / np.sqrt(n)
    return _freeze(np.cos(ang) * scale), _freeze(np.sin(ang) * scale)


# A linear transform between lists of real parts: terms[i][j] is the list of
# (coef, A, B) mapping input part j to output part i.
Terms = list[list[list[tuple[float, np.ndarray, np.ndarray]]]]


@lru_cache(maxsize=None)
def forward_terms(backend: Backend, H: int, W: int) -> Terms:
    backend = Backend.parse(backend)
    if backend is Backend.DCT:
        return [[[(1.0, dct_matrix(H), dct_matrix(W))]]]
    if backend is Backend.HAAR:
        return [[[(1.0, haar_matrix(H), haar_matrix(W))]]]
    ch, sh = dft_matrices(H)
    cw, sw = dft_matrices(W)
    return [
        [[(1.0, ch, cw), (-1.0, sh, sw)]],
        [[(-1.0, ch, sw), (-1.0, sh, cw)]],
    ]


@lru_cache(maxsize=None)
def inverse_terms(backend: Backend, H: int, W: int) -> Terms:
    backend = Backend.parse(backend)
    if backend is Backend.DCT:
        return [[[(1.0, dct_matrix(H).T, dct_matrix(W).T)]]]
    if backend is Backend.HAAR:
        return [[[(1.0, haar_matrix(H).T, haar_matrix(W).T)]]]
    ch, sh = dft_matrices(H)
    cw, sw = dft_matrices(W)
    # real part of (C + iS)(A + iB)(C + iS)^T
    return [[
        [(1.0, ch, cw), (-1.0, sh, sw)],
        [(-1.0, sh, cw), (-1.0, ch, sw)],
    ]]


def apply_terms(parts: list[np.ndarray], terms: Terms) -> list[np.ndarray]:
    """Evaluate a term table on batched parts of shape (n, H, W, c)."""
    out = []
    for row in terms:
        acc = None
        for x, cell in zip(parts, row):
            for coef, a, b in cell:
                y = sep2d(x, a, b)
                if coef != 1.0:
                    y = coef * y
                acc = y if acc is None else acc + y
        out.append(acc)
    return out


def adjoint_terms(terms: Terms) -> Terms:
    """Transpose of a term table (swap in/out parts, transpose each matrix)."""
    n_out, n_in = len(terms), len(terms[0])
    return [
        [[(coef, a.T, b.T) for coef, a, b in terms[i][j]] for i in range(n_out)]
        for j in range(n_in)
    ]


def _check_grid(H: int, W: int, backend: Backend) -> None:
    if backend is Backend.HAAR and (H % 2 or W % 2):
        raise DimensionError(f"HAAR backend needs even H and W, got {H} x {W}")


def transform(f: FeatureMap, backend=Backend.DCT) -> Spectrum:
    """Per-channel orthonormal 2D transform of a feature map."""
    if not isinstance(f, FeatureMap):
        f = FeatureMap(f)
    backend = Backend.parse(backend)
    H, W, _ = f.shape
    _check_grid(H, W, backend)
    parts = apply_terms([f.data[None]], forward_terms(backend, H, W))
    return Spectrum.from_parts([p[0] for p in parts], backend)


def inverse(S: Spectrum) -> FeatureMap:
    """Back to the spatial domain. FFT inverses keep the real part only."""
    if not isinstance(S, Spectrum):
        raise ValidationError("inverse expects a Spectrum")
    H, W = S.height, S.width
    _check_grid(H, W, S.backend)
    (out,) = apply_terms([p[None] for p in S.parts()], inverse_terms(S.backend, H, W))
    return FeatureMap(out[0])
