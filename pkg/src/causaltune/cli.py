"""Command-line entry point: ``causaltune <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import _core, cten, ppm
from .config import RunConfig
from .errors import CausalTuneError, ConfigError, CtenIOError, NumericError
from .filtering import DEFAULT_R_HIGH, DEFAULT_R_LOW, FilterMode, build_filter, split
from .spectral import Backend, FeatureMap, inverse, transform
from .synthbench import CORRUPTION_KINDS, Corruption, corrupt_scene, gen_scene

log = logging.getLogger("causaltune")

RECON_TOL = 1e-9


def _float_list(text: str) -> list[float]:
    try:
        return [float(s) for s in text.replace(" ", ",").split(",") if s]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [s for s in text.replace(" ", ",").split(",") if s]


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "outdir", None):
        cfg = cfg.replace(outdir=args.outdir)
    return cfg


def _outdir(path) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CtenIOError(f"cannot create output directory {out}: {exc}") from exc
    return out


# decompose -------------------------------------------------------------------


def _read_feature(args) -> np.ndarray:
    if args.input is None:
        scene = gen_scene(args.scene)
        if args.corruption:
            scene = corrupt_scene(scene, Corruption.at_severity(args.corruption, args.severity, seed=args.scene))
        return scene.image
    path = Path(args.input)
    if path.suffix.lower() == ".cten":
        arrays = cten.load(path)
        if args.tensor is not None:
            if args.tensor not in arrays:
                raise CtenIOError(f"{path} has no tensor {args.tensor!r} (has {sorted(arrays)})")
            data = arrays[args.tensor]
        elif len(arrays) == 1:
            data = next(iter(arrays.values()))
        else:
            raise ConfigError(f"{path} holds {len(arrays)} tensors; pick one with --tensor")
        return data[:, :, None] if data.ndim == 2 else data
    return ppm.read(path)


def cmd_decompose(args) -> int:
    f = FeatureMap(_read_feature(args))
    filt = build_filter(args.rl, args.rh, f.height, f.width, args.mode, args.backend)
    parts = split(transform(f, filt.backend), filt)
    causal, noncausal = inverse(parts.causal).data, inverse(parts.noncausal).data
    err = float(np.max(np.abs(causal + noncausal - f.data)))
    energy = float(np.sum(f.data**2))
    out = _outdir(args.outdir)
    cten.save(out / "causal.cten", {"causal": causal})
    cten.save(out / "noncausal.cten", {"noncausal": noncausal})
    filt.write_csv(out / "gain.csv")
    lines = [
        f"shape = {f.height}x{f.width}x{f.channels}",
        f"mode = {filt.mode.value}",
        f"backend = {filt.backend.value}",
        f"r_low = {filt.r_low!r}",
        f"r_high = {filt.r_high!r}",
        f"max_abs_reconstruction_error = {err!r}",
        f"causal_energy_fraction = {float(np.sum(causal**2)) / energy if energy else 0.0!r}",
        f"noncausal_energy_fraction = {float(np.sum(noncausal**2)) / energy if energy else 0.0!r}",
    ]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    if not err <= RECON_TOL:
        raise NumericError(f"causal + noncausal differs from the input by {err:.3e} > {RECON_TOL:.0e}")
    return 0


# training / evaluation -------------------------------------------------------


def cmd_train(args) -> int:
    from .experiments import save_checkpoint, train

    cfg = _load_config(args)
    if args.steps is not None:
        cfg = cfg.replace(steps=args.steps)
    use_adapter = False if args.no_adapter else cfg.adapter
    out = _outdir(cfg.outdir)
    res = train(cfg, use_adapter)
    digest0 = res.initial.backbone.digest()
    digest1 = res.model.backbone.digest()
    if digest0 != digest1:
        raise NumericError("frozen backbone parameters changed during training")
    save_checkpoint(out / "checkpoint.cten", res.model)
    res.write_loss_csv(out / "loss.csv")
    cfg.replace(adapter=use_adapter).save(out / "config.txt")
    last = f"{res.losses[-1]:.6f}" if res.losses else "n/a"
    print(f"trained {cfg.steps} steps, last batch loss {last}, backbone sha256 {digest1}")
    print(f"wrote {out / 'checkpoint.cten'} and {out / 'loss.csv'}")
    return 0


def cmd_eval(args) -> int:
    from .experiments import build_model, load_checkpoint, run_eval

    cfg = _load_config(args)
    if args.checkpoint:
        keys = cten.load(args.checkpoint)
        use_adapter = any(k.startswith("adapter") for k in keys)
        model = load_checkpoint(args.checkpoint, cfg, use_adapter)
    else:
        model = build_model(cfg, False if args.no_adapter else None)
    report = run_eval(model, cfg)
    iou_path, miou_path = report.write_csv(_outdir(cfg.outdir))
    for name, rep in report.domains.items():
        print(f"{name:>12s}  mIoU {rep.miou:.4f}")
    print(f"{'corrupted':>12s}  mIoU {report.avg_corrupted_miou:.4f}")
    print(f"wrote {iou_path} and {miou_path}")
    return 0


def cmd_ablate(args) -> int:
    from .experiments import ablate

    cfg = _load_config(args)
    out = args.out or Path(cfg.outdir) / "ablate.csv"
    _outdir(Path(out).parent)
    rows = ablate(cfg, _str_list(args.filter_modes), _str_list(args.backends), out)
    for r in rows:
        print(f"{r['mode']:>12s} {r['backend']:>5s}  avg corrupted mIoU {r['report'].avg_corrupted_miou:.4f}")
    print(f"wrote {out}")
    return 0


def cmd_sweep(args) -> int:
    from .experiments import sweep

    cfg = _load_config(args)
    out = args.out or Path(cfg.outdir) / "sweep.csv"
    _outdir(Path(out).parent)
    rows = sweep(cfg, _float_list(args.rl_grid), _float_list(args.rh_grid), out)
    for r in rows:
        print(f"R_L={r['rl']:<5g} R_H={r['rh']:<5g}  avg corrupted mIoU {r['report'].avg_corrupted_miou:.4f}")
    print(f"wrote {out}")
    return 0


# checks ----------------------------------------------------------------------


def cmd_gradcheck(args) -> int:
    from .gradsuite import run_suite

    cfg = _load_config(args)
    results = run_suite(cfg, eps=args.eps, n_coords=args.coords, seed=args.seed)
    for r in results:
        print(r.line())
    worst = max(r.report.max_rel_error for r in results)
    print(f"max relative error {worst:.3e}")
    if not all(r.passed for r in results):
        raise NumericError("finite-difference check exceeded tolerance")
    return 0


def cmd_selftest(args) -> int:
    from .selftest import run

    results = run(args.seed)
    for name, ok, err, tol in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {err:.3e} (tol {tol:g})")
    print(f"kernel backend: {_core.KERNEL_BACKEND}")
    failed = [r for r in results if not r[1]]
    if failed:
        raise NumericError(f"{len(failed)} self-test check(s) failed")
    return 0


def cmd_scene(args) -> int:
    scene = gen_scene(args.seed)
    if args.corruption:
        scene = corrupt_scene(scene, Corruption.at_severity(args.corruption, args.severity, seed=args.seed))
    out = Path(args.out)
    _outdir(out.parent)
    if out.suffix.lower() in (".ppm", ".pnm"):
        ppm.write(out, scene.image)
    else:
        cten.save(out, {"image": scene.image, "labels": scene.labels.astype(np.float64)})
    print(f"wrote {out}")
    return 0


def cmd_config(args) -> int:
    sys.stdout.write(_load_config(args).dumps())
    return 0


# parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="causaltune", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def with_config(p):
        p.add_argument("--config", help="key = value run configuration (defaults if omitted)")
        p.add_argument("--outdir", help="override the config's output directory")
        return p

    p = sub.add_parser("decompose", help="split an image or feature map into causal / non-causal parts")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="PPM/PGM image or CTEN tensor (H x W or H x W x c)")
    src.add_argument("--scene", type=int, default=0, help="synthetic scene seed when no --input is given")
    p.add_argument("--tensor", help="tensor name inside a multi-tensor CTEN file")
    p.add_argument("--corruption", choices=CORRUPTION_KINDS, help="corrupt the synthetic scene first")
    p.add_argument("--severity", type=float, default=1.0)
    p.add_argument("--rl", type=float, default=DEFAULT_R_LOW)
    p.add_argument("--rh", type=float, default=DEFAULT_R_HIGH)
    p.add_argument("--mode", default=FilterMode.BANDPASS.value, choices=[m.value for m in FilterMode])
    p.add_argument("--backend", default=Backend.DCT.value, choices=[b.value for b in Backend])
    p.add_argument("--outdir", default="decompose")
    p.set_defaults(func=cmd_decompose)

    p = with_config(sub.add_parser("train", help="train head (+ adapters) on clean synthetic scenes"))
    p.add_argument("--steps", type=int, help="override the number of optimizer steps")
    p.add_argument("--no-adapter", action="store_true", help="train the head only (frozen baseline)")
    p.set_defaults(func=cmd_train)

    p = with_config(sub.add_parser("eval", help="evaluate on clean and corrupted scenes"))
    p.add_argument("--checkpoint", help="checkpoint.cten from train (initialization if omitted)")
    p.add_argument("--no-adapter", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = with_config(sub.add_parser("ablate", help="filter mode x transform backend matrix"))
    p.add_argument("--filter-modes", default=",".join(m.value for m in FilterMode))
    p.add_argument("--backends", default=",".join(b.value for b in Backend))
    p.add_argument("--out", help="CSV path (default <outdir>/ablate.csv)")
    p.set_defaults(func=cmd_ablate)

    p = with_config(sub.add_parser("sweep", help="band-pass cutoff (R_L, R_H) accuracy matrix"))
    p.add_argument("--rl-grid", required=True, help="comma-separated R_L values")
    p.add_argument("--rh-grid", required=True, help="comma-separated R_H values")
    p.add_argument("--out", help="CSV path (default <outdir>/sweep.csv)")
    p.set_defaults(func=cmd_sweep)

    p = with_config(sub.add_parser("gradcheck", help="finite-difference gradient suite"))
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--coords", type=int, default=400, help="sampled coordinates per check")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("selftest", help="run the module invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)

    p = sub.add_parser("scene", help="export a synthetic scene to CTEN (image, labels) or PPM")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corruption", choices=CORRUPTION_KINDS)
    p.add_argument("--severity", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scene)

    p = with_config(sub.add_parser("config", help="print the effective configuration"))
    p.set_defaults(func=cmd_config)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except CausalTuneError as exc:
        print(f"causaltune: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FloatingPointError as exc:
        print(f"causaltune: numeric error: {exc}", file=sys.stderr)
        return NumericError.exit_code
    except OSError as exc:
        print(f"causaltune: I/O error: {exc}", file=sys.stderr)
        return CtenIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
