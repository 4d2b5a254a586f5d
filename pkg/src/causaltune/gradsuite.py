"""Finite-difference gradient suite used by ``causaltune gradcheck`` and the tests.

All trainable tensors are re-drawn at small random values first: with the
zero-initialized second MLP and head, most true gradients are exactly zero
and a relative comparison would only measure round-off.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .adapter import AdapterParams, causal_tune_tensor, refine_tensors
from .config import RunConfig
from .experiments import build_model
from .filtering import build_filter
from .spectral import Backend
from .synthbench import scene_batch

REFINE_TOL = 1e-6
PIPELINE_TOL = 1e-5
PIPELINE_IMAGE = 16
HEAD_SCALE = 0.1


@dataclass(frozen=True)
class SuiteResult:
    name: str
    tol: float
    report: ad.GradCheckReport

    @property
    def passed(self) -> bool:
        return self.report.passed(self.tol)

    def line(self) -> str:
        r = self.report
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} {self.name}: max rel err {r.max_rel_error:.3e} (tol {self.tol:.0e}) "
                f"over {r.n_coords} coords, worst {r.worst_param}{list(r.worst_index)}")


def _perturbed(arrays: dict, rng, scale: float = 1.0) -> dict:
    return {k: rng.uniform(-scale, scale, np.shape(v)) for k, v in arrays.items()}


def _layer_params(c: int, m: int, r: int, depth: int, rng) -> dict:
    p = AdapterParams.init(c, (1,), m, r, seed=int(rng.integers(1 << 31)), mlp_depth=depth)
    return {k.split(".", 1)[1]: v for k, v in _perturbed(p.tensors, rng).items()}


def check_refine(c: int = 8, m: int = 6, r: int = 3, n_queries: int = 12, depth: int = 1,
                 eps: float = 1e-5, n_coords: int = 400, seed: int = 0) -> SuiteResult:
    """Isolated refinement op: d(sum(hat * R)) w.r.t. B, A, both MLPs and the queries."""
    rng = np.random.default_rng(seed)
    params = _layer_params(c, m, r, depth, rng)
    params["queries"] = rng.normal(size=(1, n_queries, c))
    proj = rng.normal(size=(1, n_queries, c))

    def loss(t):
        q = t["queries"]
        out = refine_tensors(q, {k: v for k, v in t.items() if k != "queries"}, depth)
        return ad.sum_all(out["hat"] * proj)

    rep = ad.finite_diff_check(loss, params, eps=eps, n_coords=n_coords, seed=seed)
    # the two-layer MLP variant is a composed op and gets the looser bound
    return SuiteResult(f"refine (depth {depth})", REFINE_TOL if depth == 1 else PIPELINE_TOL, rep)


def check_causal_tune(backend=Backend.DCT, c: int = 8, m: int = 6, r: int = 3, grid: int = 4,
                      eps: float = 1e-5, n_coords: int = 400, seed: int = 0) -> SuiteResult:
    """Delta f of one adapter layer w.r.t. its parameters and the input feature map."""
    backend = Backend.parse(backend)
    rng = np.random.default_rng(seed)
    params = _layer_params(c, m, r, 1, rng)
    params["f"] = rng.normal(size=(1, grid, grid, c))
    proj = rng.normal(size=(1, grid, grid, c))
    gain = build_filter(0.2, 0.7, grid, grid, backend=backend).gain

    def loss(t):
        local = {k: v for k, v in t.items() if k != "f"}
        return ad.sum_all(causal_tune_tensor(t["f"], local, gain, backend) * proj)

    rep = ad.finite_diff_check(loss, params, eps=eps, n_coords=n_coords, seed=seed)
    return SuiteResult(f"causal_tune ({backend.value})", PIPELINE_TOL, rep)


def check_pipeline(cfg: RunConfig | None = None, n_images: int = 2, eps: float = 1e-5,
                   n_coords: int = 400, seed: int = 0) -> SuiteResult:
    """Full model loss on 16x16 scenes w.r.t. every trainable tensor (adapters and head)."""
    cfg = (cfg or RunConfig()).replace(image_size=PIPELINE_IMAGE)
    model = build_model(cfg, use_adapter=True)
    images, labels = scene_batch(range(n_images), PIPELINE_IMAGE)
    rng = np.random.default_rng(seed)
    params = _perturbed(model.trainable(), rng)
    # a small head keeps the loss near ln K, which keeps the difference quotients clean
    params.update(_perturbed(model.head.tensors(), rng, HEAD_SCALE))
    rep = ad.finite_diff_check(lambda t: model.loss(images, labels, t), params,
                               eps=eps, n_coords=n_coords, seed=seed)
    return SuiteResult(f"pipeline ({PIPELINE_IMAGE}x{PIPELINE_IMAGE}, {cfg.backend})", PIPELINE_TOL, rep)


def run_suite(cfg: RunConfig | None = None, eps: float = 1e-5, n_coords: int = 400,
              seed: int = 0) -> list[SuiteResult]:
    out = [check_refine(depth=1, eps=eps, n_coords=n_coords, seed=seed),
           check_refine(depth=2, eps=eps, n_coords=n_coords, seed=seed)]
    out += [check_causal_tune(b, eps=eps, n_coords=n_coords, seed=seed) for b in Backend]
    out.append(check_pipeline(cfg, eps=eps, n_coords=n_coords, seed=seed))
    return out
