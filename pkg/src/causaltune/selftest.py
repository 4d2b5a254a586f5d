"""Fast invariant checks for every module; backs ``causaltune selftest``."""

from __future__ import annotations

import numpy as np

from . import _core, _fallback, cten, reference
from .adapter import AdapterParams, causal_tune, refine
from .config import RunConfig
from .filtering import FilterMode, build_filter, split
from .spectral import Backend, FeatureMap, inverse, transform
from .synthbench import CORRUPTION_KINDS, Corruption, corrupt, gen_scene, miou


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def _checks(rng):
    x = rng.normal(size=(2, 6, 10, 3))
    mh, mw = rng.normal(size=(5, 6)), rng.normal(size=(7, 10))
    yield "kernel sep2d matches numpy", _max_abs(_core.sep2d(x, mh, mw), _fallback.sep2d(x, mh, mw)), 1e-12
    p, g = rng.integers(0, 4, 500), rng.integers(0, 4, 500)
    yield "kernel confusion matches numpy", _max_abs(_core.confusion(p, g, 4), _fallback.confusion(p, g, 4)), 0

    small = rng.normal(size=(8, 8))
    fast = transform(FeatureMap(small[:, :, None])).data[:, :, 0]
    yield "dct matches literal quadruple loop (8x8)", _max_abs(fast, reference.dct2_literal(small)), 1e-10

    f = FeatureMap(rng.normal(size=(64, 64, 8)))
    for b in Backend:
        S = transform(f, b)
        yield f"{b.value} roundtrip", _max_abs(inverse(S).data, f.data), 1e-9
        e0 = float(np.sum(f.data**2))
        yield f"{b.value} parseval", abs(S.energy() - e0) / e0, 1e-9

    filt = build_filter(0.2, 0.7, 16, 16)
    yield "bandpass G(0,0) = 0", abs(float(filt.gain[0, 0])), 0
    yield "bandpass gain in [0, 1)", float(np.any((filt.gain < 0) | (filt.gain >= 1))), 0
    yield "bandpass G(rho=0.5)", abs(float(build_filter(0.2, 0.7, 3, 3).gain[1, 0])
                                       - reference.bandpass_scalar(0.5, 0.2, 0.7)), 1e-12
    fm = FeatureMap(rng.normal(size=(16, 16, 4)))
    for b in Backend:
        S = transform(fm, b)
        parts = split(S, build_filter(0.2, 0.7, 16, 16, backend=b))
        num = max(_max_abs(c + n, s) for c, n, s in zip(parts.causal.parts(), parts.noncausal.parts(), S.parts()))
        yield f"{b.value} causal + noncausal = spectrum", num / float(np.max(np.abs(S.data))), 1e-12

    params = AdapterParams.init(4, (1,), m=6, r=3, seed=1)
    S = split(transform(fm), filt).causal
    tr = refine(S, params, 1)
    yield "softmax rows sum to one", _max_abs(tr.weights.sum(axis=1), 1.0), 1e-12
    band = inverse(S).data
    yield "zero MLP2 gives the band-passed feature", _max_abs(causal_tune(fm, params, filt, 1).data, band), 1e-9
    live = params.with_tensors({k: rng.normal(size=v.shape) for k, v in params.tensors.items()})
    d0 = causal_tune(fm, live, filt, 1).data
    d1 = causal_tune(FeatureMap(fm.data + rng.normal(size=4)), live, filt, 1).data
    yield "delta f invariant to constant offsets", _max_abs(d0, d1), 1e-9

    blob = {"a": rng.normal(size=(3, 4)), "b": np.array(rng.normal())}
    back = cten.loads(cten.dumps(blob))
    yield "cten roundtrip is bit-exact", float(any(back[k].tobytes() != v.tobytes() for k, v in blob.items())), 0
    cfg = RunConfig(lr=rng.uniform(), suite=("fog", "snow"), layer_cutoffs=("2:0.1:0.5",))
    yield "config text roundtrip", float(RunConfig.loads(cfg.dumps()) != cfg), 0

    worst = 0.0
    for _ in range(20):
        H, W = rng.integers(1, 9, size=2)
        pr, gt = rng.integers(0, 4, (H, W)), rng.integers(0, 4, (H, W))
        got = miou(pr, gt, 4).iou
        ref = reference.iou_by_counting(pr, gt, 4)
        worst = max(worst, float(any((a is None) != (b is None) or (a is not None and a != b)
                                     for a, b in zip(got, ref))))
    yield "mIoU matches pixel counting", worst, 0
    img = gen_scene(7).image
    yield "severity-zero corruptions are identity", max(
        _max_abs(corrupt(img, Corruption.at_severity(k, 0.0)), img) for k in CORRUPTION_KINDS), 0


def run(seed: int = 0) -> list[tuple[str, bool, float, float]]:
    rng = np.random.default_rng(seed)
    return [(name, bool(err <= tol), err, tol) for name, err, tol in _checks(rng)]
