"""Compiled kernels vs the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Times ``sep2d`` at the shapes the model uses, ``confusion`` at evaluation
size, and one training step end to end (run in a subprocess per backend so
the import-time selection is exercised).

The package routes ``sep2d`` to numpy in both modes because BLAS wins at
these shapes; only ``confusion`` comes from the extension.  The training
step therefore differs between backends by noise alone; it is kept as a
check that neither selection path regresses.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from causaltune import _fallback

try:
    from causaltune import _kernels
except ImportError:
    _kernels = None

STEP_SNIPPET = """
import timeit
import causaltune
from causaltune import autodiff as ad
from causaltune.config import RunConfig
from causaltune.experiments import build_model
from causaltune.synthbench import scene_batch
model = build_model(RunConfig())
images, labels = scene_batch(range(4))
params = model.trainable()
def step():
    t = {k: ad.param(v, k) for k, v in params.items()}
    ad.backward(model.loss(images, labels, t))
step()
print(causaltune.KERNEL_BACKEND, min(timeit.repeat(step, number=1, repeat=%d)))
"""


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    impls = [("python", _fallback)] + ([("cython", _kernels)] if _kernels else [])
    if _kernels is None:
        print("compiled kernels not built; showing the fallback only")

    cases = [
        ("sep2d  4x8x8x32, 8x8 (adapter batch)", rng.normal(size=(4, 8, 8, 32)), 8, 8),
        ("sep2d 25x8x8x32, 8x8 (eval batch)", rng.normal(size=(25, 8, 8, 32)), 8, 8),
        ("sep2d  1x64x64x8, 64x64", rng.normal(size=(1, 64, 64, 8)), 64, 64),
    ]
    print(f"{'case':40s} " + " ".join(f"{n:>12s}" for n, _ in impls))
    for label, x, H, W in cases:
        mh, mw = rng.normal(size=(H, H)), rng.normal(size=(W, W))
        times = [best(lambda m=mod: m.sep2d(x, mh, mw), args.repeat) for _, mod in impls]
        print(f"{label:40s} " + " ".join(f"{t * 1e3:10.3f}ms" for t in times))

    pred, gt = rng.integers(0, 4, (50, 64, 64)), rng.integers(0, 4, (50, 64, 64))
    times = [best(lambda m=mod: m.confusion(pred, gt, 4), args.repeat) for _, mod in impls]
    print(f"{'confusion 50x64x64, K=4':40s} " + " ".join(f"{t * 1e3:10.3f}ms" for t in times))

    for pure in ("1", ""):
        env = dict(os.environ, CAUSALTUNE_PURE_PYTHON=pure)
        out = subprocess.run([sys.executable, "-c", STEP_SNIPPET % max(3, args.repeat // 4)],
                             env=env, capture_output=True, text=True, check=True).stdout.split()
        print(f"{'train step (batch 4, adapters) [' + out[0] + ']':40s} {float(out[1]) * 1e3:10.3f}ms")


if __name__ == "__main__":
    main()
