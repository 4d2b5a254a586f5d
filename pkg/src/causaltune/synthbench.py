"""Synthetic source-domain scenes, label-preserving corruptions and mIoU scoring.

Scenes are 64x64 RGB with K = 4 classes: 0 background (colour gradient),
1 filled circle, 2 rectangle (checker texture), 3 diagonal stripe.  Training
uses clean scenes only; every corruption alters pixels and never labels.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _core
from .errors import ConfigError, ValidationError

NUM_CLASSES = 4
SCENE_SIZE = 64
CLASS_NAMES = ("background", "circle", "rectangle", "stripe")
_CLASS_COLORS = {
    1: (0.85, 0.25, 0.20),
    2: (0.25, 0.75, 0.30),
    3: (0.25, 0.35, 0.85),
}
_KIND_BY_CLASS = {1: "circle", 2: "rectangle", 3: "stripe"}


@dataclass(frozen=True)
class SynthScene:
    image: np.ndarray
    labels: np.ndarray
    seed: int
    shapes: tuple = field(default=(), compare=False)


def _pixel_centers(H: int, W: int):
    py, px = np.meshgrid(np.arange(H) + 0.5, np.arange(W) + 0.5, indexing="ij")
    return py, px


def shape_mask(shape: dict, H: int, W: int) -> np.ndarray:
    py, px = _pixel_centers(H, W)
    kind = shape["kind"]
    if kind == "circle":
        return (px - shape["cx"]) ** 2 + (py - shape["cy"]) ** 2 <= shape["r"] ** 2
    if kind == "rectangle":
        return (px >= shape["x0"]) & (px < shape["x1"]) & (py >= shape["y0"]) & (py < shape["y1"])
    if kind == "stripe":
        return np.abs(px + shape["sign"] * py - shape["offset"]) <= shape["half_width"]
    raise ValidationError(f"unknown shape kind {kind!r}")


def rasterize_labels(shapes, H: int = SCENE_SIZE, W: int = SCENE_SIZE) -> np.ndarray:
    """Paint shapes in order; later shapes cover earlier ones."""
    labels = np.zeros((H, W), dtype=np.int64)
    for s in shapes:
        labels[shape_mask(s, H, W)] = s["cls"]
    return labels


def _random_shape(rng, cls: int, H: int, W: int) -> dict:
    kind = _KIND_BY_CLASS[cls]
    color = tuple(float(np.clip(c + rng.uniform(-0.1, 0.1), 0, 1)) for c in _CLASS_COLORS[cls])
    # lengths are tuned for 64 px scenes and scale with the scene
    s = min(H, W) / SCENE_SIZE
    if kind == "circle":
        return {"kind": kind, "cls": cls, "cx": float(rng.uniform(10 * s, W - 10 * s)),
                "cy": float(rng.uniform(10 * s, H - 10 * s)), "r": float(rng.uniform(7 * s, 15 * s)),
                "color": color}
    if kind == "rectangle":
        w, h = rng.uniform(12 * s, 30 * s, size=2)
        x0, y0 = rng.uniform(0, W - w), rng.uniform(0, H - h)
        return {"kind": kind, "cls": cls, "x0": float(x0), "y0": float(y0), "x1": float(x0 + w),
                "y1": float(y0 + h), "color": color}
    sign = float(rng.choice([-1.0, 1.0]))
    lo, hi = (-W * 0.6, W * 0.6) if sign < 0 else (W * 0.4, W * 1.6)
    return {"kind": kind, "cls": cls, "sign": sign, "offset": float(rng.uniform(lo, hi)),
            "half_width": float(rng.uniform(3 * s, 6 * s)), "color": color}


def _paint(shapes, rng, H: int, W: int) -> np.ndarray:
    py, px = _pixel_centers(H, W)
    theta = rng.uniform(0, 2 * np.pi)
    t = (np.cos(theta) * px + np.sin(theta) * py) / np.hypot(H, W) + 0.5
    c0 = rng.uniform(0.35, 0.65) + rng.uniform(-0.05, 0.05, 3)
    c1 = rng.uniform(0.35, 0.65) + rng.uniform(-0.05, 0.05, 3)
    img = c0 + (c1 - c0) * np.clip(t, 0, 1)[..., None]
    cell = max(1, round(4 * min(H, W) / SCENE_SIZE))
    checker = (((py // cell) + (px // cell)) % 2) * 2 - 1
    for s in shapes:
        m = shape_mask(s, H, W)
        col = np.asarray(s["color"])
        if s["kind"] == "rectangle":
            patch = col + 0.08 * checker[..., None]
        else:
            patch = np.broadcast_to(col, (H, W, 3))
        img[m] = patch[m]
    return np.clip(img, 0.0, 1.0)


def gen_scene(seed: int, size: int = SCENE_SIZE) -> SynthScene:
    """Deterministic scene with 2-4 objects; always shows background and >= 2 classes."""
    for attempt in range(100):
        rng = np.random.default_rng([int(seed), attempt])
        n = int(rng.integers(2, 5))
        shapes = tuple(_random_shape(rng, int(rng.integers(1, NUM_CLASSES)), size, size) for _ in range(n))
        labels = rasterize_labels(shapes, size, size)
        present = np.unique(labels)
        if present[0] == 0 and present.size >= 2:
            return SynthScene(_paint(shapes, rng, size, size), labels, int(seed), shapes)
    raise RuntimeError(f"could not generate a valid scene for seed {seed}")


def scene_batch(seeds, size: int = SCENE_SIZE):
    scenes = [gen_scene(s, size) for s in seeds]
    return np.stack([s.image for s in scenes]), np.stack([s.labels for s in scenes])


# ----------------------------------------------------------------------------
# corruptions

CORRUPTION_KINDS = ("brightness", "noise", "blur", "fog", "rain", "night", "snow", "reflection")

_IDENTITY = {
    "brightness": {"b": 0.0},
    "noise": {"sigma": 0.0},
    "blur": {"k": 1},
    "fog": {"alpha": 0.0},
    "night": {"gamma": 1.0, "scale": 1.0},
    "rain": {"density": 0.0},
    "snow": {"flakes": 0, "lift": 0.0},
    "reflection": {"w": 0.0},
}


@dataclass(frozen=True)
class Corruption:
    kind: str
    params: dict
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_KINDS:
            raise ValidationError(f"unknown corruption kind {self.kind!r}; known: {CORRUPTION_KINDS}")
        unknown = set(self.params) - set(_IDENTITY[self.kind])
        if unknown:
            raise ValidationError(f"unknown {self.kind} parameters {sorted(unknown)}")

    def param(self, name):
        return self.params.get(name, _IDENTITY[self.kind][name])

    @classmethod
    def identity(cls, kind: str) -> "Corruption":
        return cls(kind, dict(_IDENTITY.get(kind, {})))

    @classmethod
    def at_severity(cls, kind: str, severity: float, seed: int = 0) -> "Corruption":
        """Linear ramp from the identity (severity 0) to the harshest setting (severity 1)."""
        s = float(np.clip(severity, 0.0, 1.0))
        params = {
            "brightness": {"b": 0.4 * s},
            "noise": {"sigma": 0.2 * s},
            "blur": {"k": 1 + 2 * int(round(3 * s))},
            "fog": {"alpha": 0.6 * s},
            "night": {"gamma": 1.0 + 1.5 * s, "scale": 1.0 - 0.7 * s},
            "rain": {"density": s},
            "snow": {"flakes": int(round(60 * s)), "lift": 0.25 * s},
            "reflection": {"w": 0.3 * s},
        }
        if kind not in params:
            raise ValidationError(f"unknown corruption kind {kind!r}")
        return cls(kind, params[kind], seed)

    @classmethod
    def sample(cls, kind: str, seed: int) -> "Corruption":
        """Benchmark-strength parameters drawn from each kind's documented range."""
        rng = np.random.default_rng([int(seed), 7])
        table = {
            "brightness": lambda: {"b": float(rng.choice([-1, 1]) * rng.uniform(0.2, 0.4))},
            "noise": lambda: {"sigma": float(rng.uniform(0.02, 0.2))},
            "blur": lambda: {"k": int(rng.choice([3, 5, 7]))},
            "fog": lambda: {"alpha": float(rng.uniform(0.2, 0.6))},
            "night": lambda: {"gamma": float(rng.uniform(1.5, 2.5)), "scale": float(rng.uniform(0.3, 0.6))},
            "rain": lambda: {"density": float(rng.uniform(0.3, 0.8))},
            "snow": lambda: {"flakes": int(rng.integers(20, 61)), "lift": float(rng.uniform(0.1, 0.25))},
            "reflection": lambda: {"w": float(rng.uniform(0.1, 0.3))},
        }
        if kind not in table:
            raise ValidationError(f"unknown corruption kind {kind!r}")
        return cls(kind, table[kind](), int(seed))


def noise_field(shape, sigma: float, seed: int) -> np.ndarray:
    return np.random.default_rng([int(seed), 1]).normal(0.0, sigma, size=shape)


def _box_blur(img: np.ndarray, k: int) -> np.ndarray:
    r = k // 2
    padded = np.pad(img, ((r, r), (r, r), (0, 0)), mode="edge")
    win = np.lib.stride_tricks.sliding_window_view(padded, (k, k), axis=(0, 1))
    return win.mean(axis=(-2, -1))


def _smooth_field(H: int, W: int, seed: int, coarse: int = 5) -> np.ndarray:
    rng = np.random.default_rng([int(seed), 2])
    g = rng.uniform(0.0, 1.0, (coarse, coarse))
    ys = np.linspace(0, coarse - 1, H)
    xs = np.linspace(0, coarse - 1, W)
    rows = np.stack([np.interp(xs, np.arange(coarse), g[i]) for i in range(coarse)])
    return np.stack([np.interp(ys, np.arange(coarse), rows[:, j]) for j in range(W)], axis=1)


def _segment_coverage(py, px, p0, p1, width: float) -> np.ndarray:
    d = p1 - p0
    t = np.clip(((px - p0[0]) * d[0] + (py - p0[1]) * d[1]) / (d @ d), 0.0, 1.0)
    dist = np.hypot(px - (p0[0] + t * d[0]), py - (p0[1] + t * d[1]))
    return np.clip(1.0 - dist / width, 0.0, 1.0)


def corrupt(image, c: Corruption) -> np.ndarray:
    """Apply one corruption; output clipped to [0, 1]."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise ValidationError(f"corrupt expects an H x W x 3 image, got {img.shape}")
    H, W, _ = img.shape
    k = c.kind
    if k == "brightness":
        out = img + c.param("b")
    elif k == "noise":
        sigma = c.param("sigma")
        out = img + noise_field(img.shape, sigma, c.seed) if sigma > 0 else img.copy()
    elif k == "blur":
        size = int(c.param("k"))
        if size < 1 or size % 2 == 0:
            raise ValidationError(f"blur kernel must be a positive odd size, got {size}")
        out = _box_blur(img, size) if size > 1 else img.copy()
    elif k == "fog":
        mean_alpha = c.param("alpha")
        if mean_alpha == 0:
            out = img.copy()
        else:
            alpha = np.clip(mean_alpha * (0.5 + _smooth_field(H, W, c.seed)), 0.0, 1.0)[..., None]
            out = (1.0 - alpha) * img + alpha
    elif k == "night":
        out = np.power(img, c.param("gamma")) * c.param("scale")
    elif k == "rain":
        n = int(round(40 * c.param("density")))
        out = img.copy()
        if n:
            rng = np.random.default_rng([int(c.seed), 3])
            py, px = _pixel_centers(H, W)
            ang = np.deg2rad(75.0)
            streaks = np.zeros((H, W))
            for _ in range(n):
                p0 = np.array([rng.uniform(0, W), rng.uniform(-10, H)])
                length = rng.uniform(8, 14)
                p1 = p0 + length * np.array([np.cos(ang), np.sin(ang)])
                streaks = np.maximum(streaks, _segment_coverage(py, px, p0, p1, 1.0))
            out = out + 0.6 * streaks[..., None]
    elif k == "snow":
        n = int(c.param("flakes"))
        out = img + c.param("lift")
        if n:
            rng = np.random.default_rng([int(c.seed), 4])
            py, px = _pixel_centers(H, W)
            flakes = np.zeros((H, W))
            for _ in range(n):
                cx, cy, r = rng.uniform(0, W), rng.uniform(0, H), rng.uniform(0.8, 2.0)
                flakes = np.maximum(flakes, np.clip(r + 0.5 - np.hypot(px - cx, py - cy), 0.0, 1.0))
            out = out + 0.9 * flakes[..., None]
    else:
        out = img + c.param("w") * img[:, ::-1]
    return np.clip(out, 0.0, 1.0)


def corrupt_scene(scene: SynthScene, c: Corruption) -> SynthScene:
    return SynthScene(corrupt(scene.image, c), scene.labels, scene.seed, scene.shapes)


# ----------------------------------------------------------------------------
# metric


@dataclass(frozen=True)
class EvalReport:
    """Per-class IoU (None where the class never appears in prediction or truth)."""

    iou: tuple
    miou: float
    n_samples: int
    confusion: np.ndarray = field(compare=False, repr=False, default=None)


def report_from_confusion(cm: np.ndarray, n_samples: int) -> EvalReport:
    cm = np.asarray(cm, dtype=np.int64)
    inter = np.diag(cm)
    union = cm.sum(axis=0) + cm.sum(axis=1) - inter
    iou = tuple(float(i / u) if u > 0 else None for i, u in zip(inter, union))
    present = [v for v in iou if v is not None]
    miou = float(np.mean(present)) if present else 0.0
    return EvalReport(iou, miou, n_samples, cm)


def confusion(pred, gt, num_classes: int = NUM_CLASSES) -> np.ndarray:
    """K x K counts, rows = ground truth."""
    try:
        return _core.confusion(pred, gt, num_classes)
    except ValueError as exc:
        raise ValidationError(f"{exc} (labels must lie in 0..{num_classes - 1})") from None


def miou(pred, gt, num_classes: int = NUM_CLASSES) -> EvalReport:
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValidationError(f"prediction shape {pred.shape} differs from ground truth {gt.shape}")
    n = 1 if gt.ndim <= 2 else gt.shape[0]
    return report_from_confusion(confusion(pred, gt, num_classes), n)


@dataclass(frozen=True)
class BenchmarkReport:
    """One EvalReport per domain; ``clean`` is always present."""

    domains: dict
    n_scenes: int

    @property
    def corrupted(self) -> dict:
        return {k: v for k, v in self.domains.items() if k != "clean"}

    @property
    def avg_corrupted_miou(self) -> float:
        vals = [r.miou for r in self.corrupted.values()]
        return float(np.mean(vals)) if vals else float("nan")

    def write_csv(self, outdir) -> tuple[Path, Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        iou_path, miou_path = outdir / "iou.csv", outdir / "miou.csv"
        with open(iou_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["domain", "class", "iou"])
            for dom, rep in self.domains.items():
                for k, v in enumerate(rep.iou):
                    w.writerow([dom, k, "" if v is None else repr(v)])
        with open(miou_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["domain", "miou"])
            for dom, rep in self.domains.items():
                w.writerow([dom, repr(rep.miou)])
        return iou_path, miou_path


def corruption_seed(scene_seed: int, kind: str) -> int:
    return int(scene_seed) * len(CORRUPTION_KINDS) + CORRUPTION_KINDS.index(kind)


def evaluate(model, suite, n_scenes: int = 50, seed: int = 100_000, batch: int = 25) -> BenchmarkReport:
    """Score ``model`` on clean and corrupted held-out scenes ``seed .. seed + n_scenes - 1``.

    ``model`` needs ``predict(images)`` and a ``train_seeds`` attribute.
    Each scene gets its own corruption draw per kind.
    """
    suite = tuple(suite)
    if not suite:
        raise ConfigError("corruption suite is empty")
    for kind in suite:
        if kind not in CORRUPTION_KINDS:
            raise ConfigError(f"unknown corruption kind {kind!r}")
    seeds = list(range(int(seed), int(seed) + int(n_scenes)))
    overlap = set(seeds) & set(getattr(model, "train_seeds", ()) or ())
    if overlap:
        raise ConfigError(f"evaluation seeds overlap the training set ({len(overlap)} shared)")
    scenes = [gen_scene(s) for s in seeds]
    gt = np.stack([s.labels for s in scenes])
    K = model.head.num_classes if hasattr(model, "head") else NUM_CLASSES
    domains = {}
    for dom in ("clean",) + suite:
        if dom == "clean":
            imgs = np.stack([s.image for s in scenes])
        else:
            imgs = np.stack([corrupt(s.image, Corruption.sample(dom, corruption_seed(s.seed, dom))) for s in scenes])
        cm = np.zeros((K, K), dtype=np.int64)
        for lo in range(0, len(seeds), batch):
            pred = model.predict(imgs[lo:lo + batch])
            cm += confusion(pred, gt[lo:lo + batch], K)
        domains[dom] = report_from_confusion(cm, len(seeds))
    return BenchmarkReport(domains, len(seeds))
