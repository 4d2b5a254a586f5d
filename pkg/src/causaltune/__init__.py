"""Frequency-domain causal refinement for a frozen toy transformer, with a synthetic corruption benchmark."""

from ._core import KERNEL_BACKEND
from .adapter import AdapterParams, RefinementTrace, causal_tune, refine
from .backbone import ArtifactInjector, SegHead, ToyBackbone, embed
from .config import RunConfig
from .errors import (
    CausalTuneError,
    ConfigError,
    CtenIOError,
    DimensionError,
    NumericError,
    UsageError,
    ValidationError,
)
from .filtering import BandPassFilter, CausalSplit, FilterMode, build_filter, split
from .model import CausalTuneModel, forward
from .spectral import Backend, FeatureMap, Spectrum, inverse, transform
from .synthbench import BenchmarkReport, Corruption, EvalReport, SynthScene, corrupt, evaluate, gen_scene, miou

__version__ = "0.1.0"

__all__ = [
    "AdapterParams", "ArtifactInjector", "Backend", "BandPassFilter", "BenchmarkReport",
    "CausalSplit", "CausalTuneError", "CausalTuneModel", "ConfigError", "Corruption",
    "CtenIOError", "DimensionError", "EvalReport", "FeatureMap", "FilterMode", "KERNEL_BACKEND",
    "NumericError", "RefinementTrace", "RunConfig", "SegHead", "Spectrum", "SynthScene",
    "ToyBackbone", "UsageError", "ValidationError", "build_filter", "causal_tune", "corrupt",
    "embed", "evaluate", "forward", "gen_scene", "inverse", "miou", "refine", "split", "transform",
]
