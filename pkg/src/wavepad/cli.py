"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt_io
from .config import ConfigFileError, load_config
from .data import DataError, load_dataset, parse_size, read_image, save_dataset, split_dataset, synth_dataset, write_pgm
from .harness import compare_variants, evaluate_split, fit, format_comparison, write_comparison, write_report
from .metrics import MetricError
from .model import ModelConfigError
from .train import NumericalError, TrainConfig
from .wavelet import dwt2d, get_filter

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("wavepad")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _size(text):
    try:
        return parse_size(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="wavepad", description="Wavelet + residual CNN presentation-attack detection")
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("dwt", help="write the four level-1 subbands of an image")
    s.add_argument("image")
    s.add_argument("--filter", default="haar")
    s.add_argument("--out", required=True)

    s = sub.add_parser("synth", help="generate the synthetic real/fake image set")
    s.add_argument("--n", type=int, default=32, help="images per class")
    s.add_argument("--size", type=_size, default=(64, 64), help="HxW")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--out", required=True)

    s = sub.add_parser("train", help="train a model on a class-per-directory image tree")
    s.add_argument("--data", required=True)
    s.add_argument("--config", help="key = value settings file")
    s.add_argument("--out", required=True, help="checkpoint path")
    s.add_argument("--log", help="training log CSV (default: <out>.log.csv)")

    s = sub.add_parser("eval", help="score a checkpoint: roc.csv, cmc.csv, summary.csv")
    s.add_argument("--ckpt", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--split", default="test", choices=["train", "val", "test", "all"])

    s = sub.add_parser("info", help="print a checkpoint's layer counts and settings")
    s.add_argument("--ckpt", required=True)

    s = sub.add_parser("compare", help="train DWT on/off variants and tabulate accuracy and time")
    s.add_argument("--data", required=True)
    s.add_argument("--config")
    s.add_argument("--out", help="comparison CSV")
    return p


def _settings(path):
    if path is None:
        return {}, TrainConfig()
    return load_config(path)


def _load_for(cfg: TrainConfig, data_dir):
    ds = load_dataset(data_dir, resize_to=cfg.image_size)
    if ds.skipped:
        log.warning("%d unreadable image(s) skipped", ds.skipped)
    return split_dataset(ds, cfg.split, seed=cfg.seed)


def cmd_dwt(args) -> int:
    img = read_image(args.image)
    fp = get_filter(args.filter)
    sub = dwt2d(img, fp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    bands = dict(zip(("ll", "lh", "hl", "hh"), sub.as_tuple()))
    peak = max(float(np.abs(b).max()) for b in bands.values()) or 1.0
    for name, band in bands.items():
        write_pgm(out / f"{name}.pgm", np.abs(band) / peak)
    (out / "subbands.txt").write_text(
        f"filter = {fp.name}\n"
        f"source_shape = {sub.source_shape[0]},{sub.source_shape[1]}\n"
        f"subband_shape = {sub.ll.shape[0]},{sub.ll.shape[1]}\n"
        f"scale = {peak!r}\n"
        "encoding = abs(coefficient) / scale\n")
    print(f"wrote ll/lh/hl/hh to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        ds = synth_dataset(args.n, args.size, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    paths = save_dataset(ds, args.out)
    print(f"wrote {len(paths)} images to {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    model_kw, cfg = _settings(args.config)
    ds = _load_for(cfg, args.data)
    model, tlog = fit(ds, cfg, **model_kw)
    ckpt = ckpt_io.Checkpoint.from_model(model, cfg, tlog.best_val_acc, ds.class_names)
    ckpt_io.save_checkpoint(args.out, ckpt)
    log_path = Path(args.log) if args.log else Path(str(args.out) + ".log.csv")
    tlog.to_csv(log_path)
    print(f"trained {len(tlog.records)} epochs, best val acc {tlog.best_val_acc:.4f} "
          f"(epoch {tlog.best_epoch}); checkpoint {args.out}, log {log_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    ckpt = ckpt_io.load_checkpoint(args.ckpt)
    cfg = ckpt.train_config
    ds = _load_for(cfg, args.data)
    if ds.class_names != ckpt.class_names:
        raise DataError(f"data classes {ds.class_names} differ from checkpoint classes {ckpt.class_names}")
    report = evaluate_split(ckpt.to_model(), ds, cfg, args.split)
    write_report(report, args.out)
    s = report.summary()
    print(f"split={args.split} accuracy={s['accuracy']:.4f} auc={s['auc']:.4f} "
          f"error_rate={s['error_rate']:.4f}")
    return EXIT_OK


def cmd_info(args) -> int:
    ckpt = ckpt_io.load_checkpoint(args.ckpt)
    convs, pools, fcs = ckpt.to_model().count_layers()
    mc = ckpt.model_config
    print(f"convs={convs} pools={pools} fcs={fcs}")
    print(f"input_shape={','.join(map(str, mc.input_shape))} classes={','.join(ckpt.class_names)} "
          f"skip_mode={mc.skip_mode.value} dtype={ckpt.dtype} "
          f"best_val_accuracy={ckpt.best_val_accuracy:.4f}")
    return EXIT_OK


def cmd_compare(args) -> int:
    model_kw, cfg = _settings(args.config)
    ds = _load_for(cfg, args.data)
    results = compare_variants(ds, cfg, **model_kw)
    print(format_comparison(results))
    if args.out:
        write_comparison(results, args.out)
    return EXIT_OK


COMMANDS = {"dwt": cmd_dwt, "synth": cmd_synth, "train": cmd_train, "eval": cmd_eval,
            "info": cmd_info, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"wavepad: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConfigFileError, ModelConfigError) as exc:
        print(f"wavepad: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"wavepad: numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ckpt_io.CheckpointError, MetricError, OSError, ValueError) as exc:
        print(f"wavepad: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
