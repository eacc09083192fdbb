"""Command-line entry points.

Subcommands: ``pretrain``, ``finetune``, ``convert``, ``evaluate``,
``inspect``, ``synth``.  All randomness is behind ``--seed``; commands that
train or evaluate write delimited records plus companion figures into
``--out-dir``.  The env var ``VARDIM3D_CACHE`` sets the default dataset
cache directory.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import data as data_mod
from . import report
from .backbone import (
    BackboneConfig,
    Stride3,
    build_backbone,
    build_reference_2d,
    count_flops,
    count_params,
    infer_shapes,
)
from .checkpoint import load_checkpoint, save_checkpoint
from .convert import ConversionRule, apply_rule
from .errors import Vardim3dError
from .train import ScheduleSpec, TrainConfig, finetune, pretrain

ARCHES_3D = {"resnet3d18": "resnet18", "resnet3d34": "resnet34", "resnet3d50": "resnet50"}
ARCHES_2D = {"resnet18": "resnet18", "resnet34": "resnet34", "resnet50": "resnet50"}


def _parse_shape(text):
    try:
        return tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected like 1x3x224x224")


def _parse_weights(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"bad loss weights {text!r}, expected d,c")
    return float(parts[0]), float(parts[1])


def _cache_dir(args):
    return args.out_dir or os.environ.get("VARDIM3D_CACHE", ".")


def _backbone_config(args, num_classes=None):
    family = ARCHES_3D.get(args.arch)
    if family is None:
        raise Vardim3dError(
            f"unknown 3D architecture {args.arch!r}; choose from {sorted(ARCHES_3D)}"
        )
    strides = None
    if not args.depth_preserve:
        strides = (Stride3(1, 2, 2),) + (Stride3(2, 2, 2),) * 4
    return BackboneConfig(
        family=family,
        stem=args.stem,
        depth_preserve=args.depth_preserve,
        stage_strides=strides,
        in_channels=args.in_channels,
        num_classes=num_classes,
    )


def _schedule(args, total_steps):
    kind = {"cosine": "cosine", "step": "step", "poly": "polynomial"}[args.schedule]
    if kind == "step":
        milestones = tuple(int(m * total_steps) for m in (2 / 3, 11 / 12))
        return ScheduleSpec(kind, args.lr, total_steps, milestones=milestones)
    if kind == "polynomial":
        return ScheduleSpec(kind, args.lr, total_steps, power=0.9, min_lr=args.lr * 1e-3)
    return ScheduleSpec(kind, args.lr, total_steps)


def _add_model_flags(p, depth_preserve_default=True):
    p.add_argument("--arch", default="resnet3d18")
    p.add_argument("--stem", choices=["k7", "v1c"], default="k7")
    p.add_argument("--in-channels", type=int, default=1)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--depth-preserve", dest="depth_preserve", action="store_true")
    group.add_argument("--no-depth-preserve", dest="depth_preserve", action="store_false")
    p.set_defaults(depth_preserve=depth_preserve_default)


def _add_train_flags(p):
    p.add_argument("--schedule", choices=["cosine", "step", "poly"], default="cosine")
    p.add_argument("--lr", type=float, default=0.02)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--eps", type=float, default=0.0, help="label smoothing")
    p.add_argument("--loss-weights", type=_parse_weights, default=(0.5, 1.0))
    p.add_argument("--freeze", choices=["none", "fix-res1"], default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)


def _add_synth_flags(p):
    p.add_argument("--classes", type=int, default=3)
    p.add_argument("--samples", type=int, default=60)
    p.add_argument("--shape", type=_parse_shape, default=(16, 32, 32))
    p.add_argument("--noise", type=float, default=0.2)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vardim3d",
        description="Pseudo-3D pre-training, 3D backbones, and 2D-to-3D weight conversion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="report parameters, FLOPs and per-stage shapes")
    _add_model_flags(p)
    p.add_argument("--input", type=_parse_shape, default=(1, 3, 224, 224))
    p.add_argument("--classes", type=int, default=1000)
    p.add_argument("--manifest", action="store_true", help="also print the parameter manifest")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--kind", choices=["cls3d", "seg3d", "corpus2d"], default="cls3d")
    _add_synth_flags(p)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output container file or image folder")
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("pretrain", help="pre-train a depth-preserving 3D classifier on 2D images")
    _add_model_flags(p, depth_preserve_default=True)
    _add_train_flags(p)
    p.add_argument("--data", default=None, help="image folder; omit for a synthetic corpus")
    p.add_argument("--synth-classes", type=int, default=10)
    p.add_argument("--synth-samples", type=int, default=200)
    p.add_argument("--image-size", type=int, default=32)
    p.add_argument("--out", required=True, help="output checkpoint path")

    p = sub.add_parser("finetune", help="fine-tune a vanilla 3D classifier")
    _add_model_flags(p, depth_preserve_default=False)
    _add_train_flags(p)
    p.add_argument("--data", default=None, help="cached dataset container; omit for synthetic")
    _add_synth_flags(p)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--init", default=None, help="pre-trained checkpoint to transplant")
    p.add_argument("--out", required=True)

    p = sub.add_parser("convert", help="convert a checkpoint between 2D and 3D forms")
    p.add_argument("--rule", choices=["svd", "i3d", "zeropad", "acs"], required=True)
    p.add_argument("--in", dest="input_path", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--scale", choices=["invk", "none"], default="invk")
    _add_model_flags(p, depth_preserve_default=False)

    p = sub.add_parser("evaluate", help="evaluate a 3D classifier checkpoint")
    _add_model_flags(p, depth_preserve_default=False)
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", default=None, help="cached dataset container; omit for synthetic")
    _add_synth_flags(p)
    p.add_argument("--data-seed", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=None)

    return parser


def cmd_inspect(args):
    config = _backbone_config(args, num_classes=args.classes)
    model = build_backbone(config, seed=args.seed)
    shapes = infer_shapes(config, args.input)
    params = count_params(model)
    flops = count_flops(model, args.input)
    print(f"arch\t{args.arch}")
    print(f"params\t{params}")
    print(f"params_million\t{params / 1e6:.2f}")
    print(f"flops\t{flops}")
    print(f"flops_giga\t{flops / 1e9:.2f}")
    for i, s in enumerate(shapes):
        name = "stem" if i == 0 else f"stage{i}"
        print(f"shape_{name}\t{'x'.join(str(v) for v in s)}")
    if args.manifest:
        for name, shape, dtype, offset in model.to_checkpoint().manifest():
            print(f"tensor\t{name}\t{'x'.join(str(v) for v in shape)}\t{dtype}\t{offset}")
    return 0


def cmd_synth(args):
    if args.kind == "corpus2d":
        corpus = data_mod.synth2d_corpus(
            num_classes=args.classes, num_samples=args.samples,
            image_size=args.image_size, noise_level=args.noise, seed=args.seed,
        )
        data_mod.materialize_image_folder(corpus, args.out)
        print(f"wrote\t{len(corpus)} images\t{args.out}")
        return 0
    spec = data_mod.SynthTaskSpec(
        kind=args.kind, num_classes=args.classes, volume_shape=args.shape,
        num_samples=args.samples, noise_level=args.noise, seed=args.seed,
    )
    samples = data_mod.synth3d_task(spec)
    save_checkpoint(data_mod.dataset_to_checkpoint(samples, args.kind), args.out)
    print(f"wrote\t{len(samples)} samples\t{args.out}")
    return 0


def cmd_pretrain(args):
    if args.data:
        dataset = data_mod.load_image_folder(args.data)
        num_classes = 1 + max(s.label for s in dataset)
    else:
        dataset = data_mod.synth2d_corpus(
            num_classes=args.synth_classes, num_samples=args.synth_samples,
            image_size=args.image_size, seed=args.seed,
        )
        num_classes = args.synth_classes
    config = _backbone_config(args, num_classes=max(2, num_classes))
    model = build_backbone(config, seed=args.seed)
    steps_per_epoch = -(-len(dataset) // args.batch_size)
    tcfg = TrainConfig(
        schedule=_schedule(args, max(1, args.epochs * steps_per_epoch)),
        epochs=args.epochs, batch_size=args.batch_size,
        label_smoothing_eps=args.eps, seed=args.seed,
    )
    ckpt, log = pretrain(model, dataset, tcfg)
    save_checkpoint(ckpt, args.out)
    out_dir = _cache_dir(args)
    report.write_train_log(log, out_dir, stem="pretrain_log")
    report.plot_training_curves(log, out_dir, stem="pretrain_curves")
    final = log.epochs[-1] if log.epochs else {"loss": float("nan"), "accuracy": float("nan")}
    print(f"checkpoint\t{args.out}")
    print(f"final_loss\t{final['loss']:.6f}")
    print(f"final_accuracy\t{final['accuracy']:.4f}")
    return 0


def _load_3d_dataset(args):
    if args.data:
        return data_mod.dataset_from_checkpoint(load_checkpoint(args.data))
    spec = data_mod.SynthTaskSpec(
        kind="cls3d", num_classes=args.classes, volume_shape=args.shape,
        num_samples=args.samples, noise_level=args.noise, seed=args.data_seed,
    )
    return data_mod.synth3d_task(spec)


def cmd_finetune(args):
    dataset = _load_3d_dataset(args)
    num_classes = 1 + max(int(s.label) for s in dataset)
    config = _backbone_config(args, num_classes=max(2, num_classes))
    model = build_backbone(config, seed=args.seed)
    init = load_checkpoint(args.init) if args.init else None
    steps_per_epoch = -(-len(dataset) // args.batch_size)
    tcfg = TrainConfig(
        schedule=_schedule(args, max(1, args.epochs * steps_per_epoch)),
        epochs=args.epochs, batch_size=args.batch_size,
        label_smoothing_eps=args.eps, seed=args.seed,
        freeze=args.freeze.replace("-", "_"),
    )
    model, metrics = finetune(model, dataset, tcfg, init=init)
    save_checkpoint(model.to_checkpoint(), args.out)
    out_dir = _cache_dir(args)
    log = metrics.pop("train_log")
    report.write_train_log(log, out_dir, stem="finetune_log")
    report.plot_training_curves(log, out_dir, stem="finetune_curves")
    report.write_metrics(metrics, out_dir, stem="finetune_metrics")
    print(f"checkpoint\t{args.out}")
    for key in ("top1", "accuracy"):
        print(f"{key}\t{metrics[key]:.4f}")
    return 0


def cmd_convert(args):
    source = load_checkpoint(args.input_path)
    kind = {"svd": "svd_transplant", "i3d": "i3d_inflate",
            "zeropad": "zeropad_extend", "acs": "acs_split"}[args.rule]
    options = {}
    if kind in ("i3d_inflate", "zeropad_extend"):
        options = {"k": args.k, "scale": args.scale}
    rule = ConversionRule(kind, options)
    target_config = None
    if kind == "svd_transplant":
        target_config = _backbone_config(args)
    ckpt, rep = apply_rule(rule, source, target_config)
    save_checkpoint(ckpt, args.out)
    summary = rep.summary()
    print(summary)
    with open(args.out + ".report.txt", "w") as f:
        f.write(summary + "\n")
    return 0


def cmd_evaluate(args):
    dataset = _load_3d_dataset(args)
    ckpt = load_checkpoint(args.ckpt)
    num_classes = ckpt.fingerprint.get("num_classes") or (
        1 + max(int(s.label) for s in dataset)
    )
    config = _backbone_config(args, num_classes=max(2, int(num_classes)))
    model = build_backbone(config, seed=args.seed)
    model.load_checkpoint(ckpt, strict=False)
    from .train import evaluate_classification

    metrics = evaluate_classification(model, dataset)
    out_dir = _cache_dir(args)
    report.write_metrics(metrics, out_dir, stem="evaluate_metrics")
    for key, value in metrics.items():
        if isinstance(value, (int, float)):
            print(f"{key}\t{value:.4f}")
    return 0


COMMANDS = {
    "inspect": cmd_inspect,
    "synth": cmd_synth,
    "pretrain": cmd_pretrain,
    "finetune": cmd_finetune,
    "convert": cmd_convert,
    "evaluate": cmd_evaluate,
}


def run_command(argv) -> int:
    """Parse argv (excluding the program name) and execute one subcommand."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code else 0
    try:
        return COMMANDS[args.command](args)
    except Vardim3dError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (OSError, IOError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
