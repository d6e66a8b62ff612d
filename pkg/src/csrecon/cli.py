"""Command-line entry point.

Subcommands: gen-masks, prepare, train, reconstruct, evaluate, plot.
Exit codes: 0 success, 1 usage or config error, 2 data error, 3 divergence.
"""

import argparse
import hashlib
import json
import shutil
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .data import load_image_dataset, load_image_dir, write_split_manifest
from .exceptions import (
    InvalidInputError,
    MalformedFileError,
    ShapeMismatchError,
    TrainingDivergedError,
    UndefinedMetricError,
)
from .kspace import load_measurement, undersample, zero_fill
from .losses import LossWeights
from .masks import MaskSpec, generate_mask, load_mask, mask_rate, save_mask
from .metrics import evaluate, load_report_rows, save_report
from .networks import NetworkConfig
from .phantom import write_phantom_dir
from .training import (
    TrainConfig,
    load_checkpoint,
    read_history,
    reconstruct,
    save_checkpoint,
    train,
    write_history,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 by default; the contract reserves 2 for
    # data errors, so parse failures must funnel into exit code 1 instead
    def error(self, message):
        raise UsageError(message)


def _usage_check(condition, message):
    if not condition:
        raise UsageError(message)


def cmd_gen_masks(args):
    _usage_check(0.0 < args.rate <= 1.0, f"--rate must be in (0, 1], got {args.rate}")
    _usage_check(args.size >= 8, f"--size must be at least 8, got {args.size}")
    width = args.width if args.width else args.size
    spec = MaskSpec(
        pattern=args.pattern,
        nominal_rate=args.rate,
        height=args.size,
        width=width,
        seed=args.seed,
    )
    mask = generate_mask(spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_mask(mask, out)
    print(f"wrote {out} ({args.pattern}, achieved rate {mask_rate(mask):.4f})")
    return 0


def cmd_prepare(args):
    _usage_check(
        bool(args.input) != bool(args.synthetic),
        "give exactly one of --input or --synthetic",
    )
    out = Path(args.out)
    images_dir = out / "images"
    if args.synthetic:
        write_phantom_dir(images_dir, args.synthetic, args.size, args.seed)
    else:
        src = Path(args.input)
        if not src.is_dir():
            raise InvalidInputError(f"{src}: not a directory")
        images_dir.mkdir(parents=True, exist_ok=True)
        for f in sorted(src.iterdir()):
            if f.suffix.lower() in (".png", ".pgm"):
                shutil.copy(f, images_dir / f.name)
    train_set, test_set = load_image_dir(images_dir, args.split, args.seed)
    write_split_manifest(train_set, test_set, out / "split_manifest.txt")
    print(
        f"prepared {len(train_set)} train / {len(test_set)} test images in {images_dir}"
    )
    return 0


_CONFIG_KEYS = {
    "data_dir": str,
    "split_fraction": float,
    "data_seed": int,
    "out_dir": str,
    "epochs": int,
    "lr0": float,
    "batch_size": int,
    "critic_steps": int,
    "seed": int,
    "checkpoint_interval": int,
    "mask": dict,
    "network": dict,
    "loss": dict,
}
_MASK_KEYS = ("pattern", "rate", "seed")
_NETWORK_KEYS = ("levels", "base_filters", "residual_blocks_per_level", "folds")
_LOSS_KEYS = ("alpha", "gamma", "gp_lambda", "distance")


def _read_run_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    unknown = set(raw) - set(_CONFIG_KEYS)
    _usage_check(not unknown, f"unknown config keys: {sorted(unknown)}")
    for section, allowed in (
        ("mask", _MASK_KEYS),
        ("network", _NETWORK_KEYS),
        ("loss", _LOSS_KEYS),
    ):
        extra = set(raw.get(section, {})) - set(allowed)
        _usage_check(not extra, f"unknown keys in config [{section}]: {sorted(extra)}")
    return raw


def _resolve_run_config(args):
    raw = _read_run_config(args.config)
    for flag in ("data_dir", "out_dir", "epochs", "lr0", "batch_size",
                 "critic_steps", "seed", "checkpoint_interval"):
        value = getattr(args, flag, None)
        if value is not None:
            raw[flag] = value
    _usage_check("data_dir" in raw, "config needs data_dir (or pass --data-dir)")
    _usage_check("out_dir" in raw, "config needs out_dir (or pass --out-dir)")
    raw.setdefault("split_fraction", 0.8)
    raw.setdefault("data_seed", 0)
    raw.setdefault("mask", {})
    raw.setdefault("network", {})
    raw.setdefault("loss", {})
    return raw


def _dir_sha256(path):
    digest = hashlib.sha256()
    for f in sorted(Path(path).iterdir()):
        if f.is_file():
            digest.update(f.name.encode())
            digest.update(f.read_bytes())
    return digest.hexdigest()


def cmd_train(args):
    raw = _resolve_run_config(args)
    train_set, test_set = load_image_dir(
        raw["data_dir"], raw["split_fraction"], raw["data_seed"]
    )
    h, w = train_set.shape
    mask_raw = raw["mask"]
    config = TrainConfig(
        mask_spec=MaskSpec(
            pattern=mask_raw.get("pattern", "radial"),
            nominal_rate=mask_raw.get("rate", 0.3),
            height=h,
            width=w,
            seed=mask_raw.get("seed", 0),
        ),
        net_config=NetworkConfig(**raw["network"]),
        loss_weights=LossWeights(**raw["loss"]),
        **{
            k: raw[k]
            for k in ("epochs", "lr0", "batch_size", "critic_steps", "seed",
                      "checkpoint_interval")
            if k in raw
        },
    )

    out = Path(raw["out_dir"])
    ckpt_dir = out / "checkpoints"
    ckpt_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "version": __version__,
        "config": raw,
        "resolved_train_config": {
            "epochs": config.epochs,
            "lr0": config.lr0,
            "batch_size": config.batch_size,
            "critic_steps": config.critic_steps,
            "seed": config.seed,
            "checkpoint_interval": config.checkpoint_interval,
            "mask_spec": vars(config.mask_spec),
            "net_config": vars(config.net_config),
            "loss_weights": vars(config.loss_weights),
        },
        "data_sha256": _dir_sha256(raw["data_dir"]),
        "train_images": train_set.names,
        "test_images": test_set.names,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")

    interval = config.checkpoint_interval

    def on_epoch_end(state):
        write_history(state.history, out / "history.csv")
        if interval and state.epoch % interval == 0 and state.epoch < config.epochs:
            save_checkpoint(state, ckpt_dir / f"ckpt_epoch_{state.epoch:04d}.npz")

    try:
        state = train(config, train_set, on_epoch_end=on_epoch_end)
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    save_checkpoint(state, ckpt_dir / "ckpt_final.npz")
    write_history(state.history, out / "history.csv")
    print(f"trained {config.epochs} epochs; run directory: {out}")
    return 0


def _write_png(magnitude, path):
    from PIL import Image

    peak = magnitude.max()
    pixels = np.zeros_like(magnitude) if peak == 0 else magnitude / peak
    Image.fromarray(np.round(pixels * 255).astype(np.uint8), mode="L").save(path)


def cmd_reconstruct(args):
    _usage_check(
        bool(args.measurement) != bool(args.image),
        "give exactly one of --measurement or --image (with --mask)",
    )
    if args.measurement:
        m = load_measurement(args.measurement)
    else:
        _usage_check(args.mask, "--image needs --mask")
        from .data import _read_grayscale

        img = _read_grayscale(Path(args.image))
        mask = load_mask(args.mask)
        m = undersample(img.astype(np.complex128), mask)

    state = load_checkpoint(args.checkpoint)
    t0 = time.perf_counter()
    recon = reconstruct(state, m)
    elapsed = time.perf_counter() - t0
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    np.save(out.with_suffix(".npy"), recon)
    _write_png(np.abs(recon), out.with_suffix(".png"))
    if args.zero_fill:
        baseline = zero_fill(m)
        np.save(out.with_name(out.stem + "_zero_fill.npy"), baseline)
        _write_png(np.abs(baseline), out.with_name(out.stem + "_zero_fill.png"))
    print(f"reconstructed {m.shape[0]}x{m.shape[1]} in {elapsed:.3f} s -> {out}.npy/.png")
    return 0


def cmd_evaluate(args):
    _usage_check(0.0 < args.rate <= 1.0, f"--rate must be in (0, 1], got {args.rate}")
    dataset = load_image_dataset(args.data)
    h, w = dataset.shape
    spec = MaskSpec(
        pattern=args.pattern,
        nominal_rate=args.rate,
        height=h,
        width=w,
        seed=args.mask_seed,
    )
    state = None if args.baseline else load_checkpoint(args.checkpoint)
    report = evaluate(state, dataset, spec, fold=args.fold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_report(report, out / "report.csv", out / "summary.txt")
    for metric, stats in report.aggregates.items():
        print(f"{metric}: mean {stats['mean']:.4f} std {stats['std']:.4f}")
    print(f"report written to {out}")
    return 0


def cmd_plot(args):
    _usage_check(
        bool(args.history) != bool(args.report),
        "give exactly one of --history or --report",
    )
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if args.history:
        rows = read_history(args.history)
        steps = [r["step"] for r in rows]
        for metric in ("adv_g", "adv_d", "freq", "imag", "total", "lr"):
            fig, ax = plt.subplots(figsize=(7, 4))
            ax.plot(steps, [r[metric] for r in rows], linewidth=0.8)
            ax.set_xlabel("step")
            ax.set_ylabel(metric)
            ax.set_title(f"training {metric}")
            fig.tight_layout()
            path = out / f"history_{metric}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    else:
        rows = load_report_rows(args.report)
        metrics = [k for k in rows[0] if k != "id"]
        for metric in metrics:
            values = [r[metric] for r in rows]
            fig, ax = plt.subplots(figsize=(5, 4))
            ax.boxplot([values], tick_labels=[metric])
            ax.set_title(f"per-image {metric}")
            fig.tight_layout()
            path = out / f"report_{metric}.png"
            fig.savefig(path, dpi=120)
            plt.close(fig)
            written.append(path)
    print(f"wrote {len(written)} plots to {out}")
    return 0


def _build_parser():
    parser = _Parser(prog="csrecon", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-masks", help="generate an undersampling mask")
    p.add_argument("--pattern", required=True,
                   choices=("radial", "cartesian", "random", "spiral"))
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--width", type=int, default=0,
                   help="mask width when different from --size")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_masks)

    p = sub.add_parser("prepare", help="stage an image directory with a split manifest")
    p.add_argument("--input", help="source directory of PNG/PGM images")
    p.add_argument("--synthetic", type=int, default=0,
                   help="generate this many synthetic phantoms instead")
    p.add_argument("--size", type=int, default=64, help="phantom side length")
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", help="train from a JSON run config")
    p.add_argument("--config", required=True)
    p.add_argument("--data-dir", dest="data_dir")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr0", type=float)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--critic-steps", dest="critic_steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--checkpoint-interval", dest="checkpoint_interval", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="reconstruct one measurement")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--measurement", help="binary k-space measurement file")
    p.add_argument("--image", help="grayscale image to undersample instead")
    p.add_argument("--mask", help="mask file to pair with --image")
    p.add_argument("--zero-fill", action="store_true",
                   help="also write the zero-filling baseline")
    p.add_argument("--out", required=True, help="output prefix (.npy and .png)")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a checkpoint on a test directory")
    p.add_argument("--checkpoint")
    p.add_argument("--baseline", action="store_true",
                   help="score the zero-filling baseline instead of a checkpoint")
    p.add_argument("--data", required=True)
    p.add_argument("--pattern", required=True,
                   choices=("radial", "cartesian", "random", "spiral"))
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--mask-seed", dest="mask_seed", type=int, default=0)
    p.add_argument("--fold", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("plot", help="render training or report curves")
    p.add_argument("--history", help="training history CSV")
    p.add_argument("--report", help="evaluation report CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    if getattr(args, "command", None) == "evaluate" and not args.baseline \
            and not args.checkpoint:
        print("usage error: evaluate needs --checkpoint or --baseline", file=sys.stderr)
        return 1

    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3
    except (MalformedFileError, InvalidInputError, ShapeMismatchError,
            UndefinedMetricError, FileNotFoundError, NotADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
