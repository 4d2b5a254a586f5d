"""Model construction, training, evaluation and the ablation / cutoff-sweep harnesses."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import cten
from .adapter import AdapterParams
from .backbone import ArtifactInjector, SegHead, ToyBackbone
from .config import RunConfig
from .errors import ConfigError, NumericError
from .filtering import FilterMode, build_filter
from .model import CausalTuneModel
from .spectral import Backend
from .synthbench import BenchmarkReport, evaluate, gen_scene, scene_batch

log = logging.getLogger(__name__)

# scene seeds used only to calibrate the artifact magnitude
_PROBE_SEEDS = range(900_000, 900_004)


def feature_rms(backbone: ToyBackbone, layers, image_size: int) -> float:
    """RMS of clean, unadapted features at ``layers`` over a fixed probe set."""
    images = np.stack([gen_scene(s, image_size).image for s in _PROBE_SEEDS])
    model = CausalTuneModel(backbone, SegHead.zeros(backbone.width, 2, backbone.patch))
    feats = model.forward(images).features
    vals = np.concatenate([feats[i - 1].data.ravel() for i in layers])
    return float(np.sqrt(np.mean(vals**2)))


def build_model(cfg: RunConfig, use_adapter: bool | None = None) -> CausalTuneModel:
    use_adapter = cfg.adapter if use_adapter is None else use_adapter
    bb = ToyBackbone.build(cfg.n_layers, cfg.width, cfg.heads, cfg.ffn, cfg.patch, cfg.backbone_seed)
    grid = bb.grid((cfg.image_size, cfg.image_size))
    injector = None
    if cfg.artifact_scale > 0:
        beta = cfg.artifact_scale * feature_rms(bb, cfg.artifact_layers, cfg.image_size)
        injector = ArtifactInjector.create(grid, cfg.width, beta, cfg.artifact_layers,
                                           cfg.artifact_tokens, seed=cfg.backbone_seed)
    head = SegHead.zeros(cfg.width, cfg.num_classes, cfg.patch)
    adapters = filters = None
    if use_adapter:
        adapters = AdapterParams.init(cfg.width, cfg.adapter_layers, cfg.adapter_m, cfg.adapter_r,
                                      seed=cfg.seed, mlp_depth=cfg.mlp_depth)
        cut = cfg.cutoffs_by_layer()
        filters = {
            i: build_filter(cut[i][0], cut[i][1], grid[0], grid[1], cfg.filter_mode, cfg.backend)
            for i in cfg.adapter_layers
        }
    return CausalTuneModel(bb, head, adapters, filters, injector, cfg.adapter_mode,
                           train_seeds=tuple(cfg.train_seeds()))


@dataclass
class TrainResult:
    model: CausalTuneModel
    initial: CausalTuneModel
    losses: list = field(default_factory=list)

    def write_loss_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "loss"])
            for step, loss in enumerate(self.losses):
                w.writerow([step, repr(loss)])


def _clip(grads: dict, max_norm: float) -> dict:
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total <= max_norm:
        return grads
    return {k: g * (max_norm / total) for k, g in grads.items()}


def train(cfg: RunConfig, use_adapter: bool | None = None, steps: int | None = None,
          model: CausalTuneModel | None = None) -> TrainResult:
    """AdamW on head (+ adapter) parameters; the backbone stays frozen.

    Batches are drawn from a per-epoch seeded permutation of the training
    scenes.  ``losses[t]`` is the batch loss evaluated before update ``t``.
    """
    steps = cfg.steps if steps is None else steps
    model = build_model(cfg, use_adapter) if model is None else model
    initial = model
    if steps == 0:
        return TrainResult(model, initial, [])
    if cfg.n_train_scenes < 1:
        raise ConfigError("training needs at least one scene")
    images, labels = scene_batch(cfg.train_seeds(), cfg.image_size)
    rng = np.random.default_rng([cfg.seed, 11])
    order = np.empty(0, dtype=np.int64)
    params = model.trainable()
    state = ad.AdamWState(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps, cfg.weight_decay)
    losses = []
    for t in range(steps):
        if order.size < cfg.batch_size:
            order = np.concatenate([order, rng.permutation(len(images))])
        idx, order = order[:cfg.batch_size], order[cfg.batch_size:]
        tensors = {k: ad.param(v, k) for k, v in params.items()}
        loss = model.loss(images[idx], labels[idx], tensors)
        value = float(loss.data)
        if not np.isfinite(value):
            raise NumericError(f"non-finite loss at step {t}")
        grads = ad.backward(loss, wrt=list(params))
        if cfg.grad_clip > 0:
            grads = _clip(grads, cfg.grad_clip)
        params, state = ad.adamw_step(params, grads, state)
        losses.append(value)
    return TrainResult(model.with_trainable(params), initial, losses)


def dataset_loss(model: CausalTuneModel, cfg: RunConfig, batch: int = 25) -> float:
    """Mean per-pixel cross-entropy over the full training set."""
    images, labels = scene_batch(cfg.train_seeds(), cfg.image_size)
    total = 0.0
    for lo in range(0, len(images), batch):
        part = model.loss(images[lo:lo + batch], labels[lo:lo + batch])
        total += float(part.data) * len(images[lo:lo + batch])
    return total / len(images)


def run_eval(model: CausalTuneModel, cfg: RunConfig) -> BenchmarkReport:
    return evaluate(model, cfg.suite, cfg.n_eval_scenes, cfg.eval_scene_start)


# checkpoints -----------------------------------------------------------------


def save_checkpoint(path, model: CausalTuneModel) -> None:
    cten.save(path, model.trainable())


def load_checkpoint(path, cfg: RunConfig, use_adapter: bool | None = None) -> CausalTuneModel:
    model = build_model(cfg, use_adapter)
    arrays = cten.load(path)
    expected = model.trainable()
    missing = set(expected) - set(arrays)
    extra = set(arrays) - set(expected)
    if missing or extra:
        raise ConfigError(f"checkpoint does not match config (missing {sorted(missing)}, extra {sorted(extra)})")
    for k, v in expected.items():
        if arrays[k].shape != np.shape(v):
            raise ConfigError(f"checkpoint tensor {k!r} has shape {arrays[k].shape}, expected {np.shape(v)}")
    return model.with_trainable(arrays)


# harnesses -------------------------------------------------------------------


def run_cell(cfg: RunConfig, use_adapter: bool = True) -> BenchmarkReport:
    return run_eval(train(cfg, use_adapter).model, cfg)


def _row(report: BenchmarkReport, suite) -> list:
    return [repr(report.avg_corrupted_miou)] + [repr(report.domains[d].miou) for d in ("clean",) + tuple(suite)]


def ablate(cfg: RunConfig, modes=tuple(FilterMode), backends=tuple(Backend), out=None) -> list[dict]:
    """Train + evaluate one adapter model per (filter mode, backend) pair."""
    modes = [FilterMode.parse(m) for m in modes]
    backends = [Backend.parse(b) for b in backends]
    rows = []
    for mode in modes:
        for backend in backends:
            cell = cfg.replace(filter_mode=mode.value, backend=backend.value)
            log.info("ablate: mode=%s backend=%s", mode.value, backend.value)
            rep = run_cell(cell)
            rows.append({"mode": mode.value, "backend": backend.value, "report": rep})
    rows.sort(key=lambda r: (r["mode"], r["backend"]))
    if out is not None:
        _write_table(out, ["mode", "backend"], rows, cfg.suite)
    return rows


def sweep(cfg: RunConfig, rl_grid, rh_grid, out=None) -> list[dict]:
    """Band-pass cutoff sweep; pairs with R_L >= R_H are skipped with a warning."""
    pairs = []
    for rl in rl_grid:
        for rh in rh_grid:
            if not 0 < rl < rh:
                log.warning("sweep: skipping invalid cutoff pair R_L=%s, R_H=%s", rl, rh)
                continue
            pairs.append((float(rl), float(rh)))
    if not pairs:
        raise ConfigError("cutoff grid contains no valid (R_L < R_H) pair")
    rows = []
    for rl, rh in sorted(pairs):
        cell = cfg.replace(r_low=rl, r_high=rh, filter_mode=FilterMode.BANDPASS.value, layer_cutoffs=())
        log.info("sweep: R_L=%s R_H=%s", rl, rh)
        rows.append({"rl": rl, "rh": rh, "report": run_cell(cell)})
    if out is not None:
        _write_table(out, ["rl", "rh"], rows, cfg.suite)
    return rows


def _write_table(path, keys, rows, suite) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys + ["avg_miou", "clean"] + list(suite))
        for r in rows:
            w.writerow([r[k] if isinstance(r[k], str) else repr(r[k]) for k in keys] + _row(r["report"], suite))
