"""Command-line experiment driver.

    isimed-lab gen-data [--config FILE] [--seed N] [--out DIR]
    isimed-lab train --method isimed|simclr|barlow|reg-isimed [--name NAME]
    isimed-lab train --untrained [--name random]
    isimed-lab eval --checkpoint DIR [--checkpoint DIR ...]
    isimed-lab analyze --checkpoint DIR [--svg]

Everything is written below the configured output directory::

    data/manifest.json, data/subject_XXXX.vol
    runs/<name>/checkpoint/, runs/<name>/loss.csv
    eval/<name>.csv, eval/ttest.csv
    analysis/<name>/quantiles.csv, correlation.csv, scatter.svg
"""

from __future__ import annotations

import argparse
import copy
import json
import logging
import os
import sys

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import IoError, IsimedError, MissingData
from .eval import (
    distance_error_stats,
    embed_dataset,
    kfold_cv,
    pca,
    spatial_correlation,
    summarize,
    write_correlation_csv,
    write_metrics_csv,
    write_quantiles_csv,
    write_scatter_svg,
    write_ttest_csv,
)
from .sampling import pairwise_distances, sample_labeled_patches, sample_patch_batch
from .seeding import derive_seed
from .ssl import METHODS, build_model, train, write_loss_history
from .synthvol import atomic_write_bytes, generate_phantom, preprocess, read_volume, write_volume
from .tensor import load_checkpoint, save_checkpoint

log = logging.getLogger("isimed")

CLI_METHODS = {m.replace("_", "-"): m for m in METHODS}


def _data_dir(cfg: ExperimentConfig):
    return os.path.join(cfg.output_dir, "data")


def cmd_gen_data(cfg: ExperimentConfig):
    """Generate, preprocess and write every subject plus the split manifest."""
    data_dir = _data_dir(cfg)
    split_of = cfg.subject_split()
    manifest = {}
    for i in range(cfg.splits.total):
        vol = preprocess(generate_phantom(cfg.phantom, i))
        try:
            write_volume(vol, os.path.join(data_dir, f"{vol.subject_id}.vol"))
        except OSError as exc:
            raise IoError(f"cannot write {data_dir}: {exc}") from None
        manifest[vol.subject_id] = split_of[i]
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    atomic_write_bytes(os.path.join(data_dir, "manifest.json"), text.encode("utf-8"))
    print(f"wrote {len(manifest)} subjects to {data_dir}")
    return manifest


def load_split(cfg: ExperimentConfig, *splits):
    """Volumes of the requested splits, in subject order."""
    data_dir = _data_dir(cfg)
    path = os.path.join(data_dir, "manifest.json")
    if not os.path.exists(path):
        raise MissingData(f"{path} not found; run gen-data first")
    try:
        with open(path, encoding="utf-8") as fh:
            manifest = json.load(fh)
    except (OSError, ValueError) as exc:
        raise IoError(f"cannot read {path}: {exc}") from None
    volumes = []
    for subject_id in sorted(manifest):
        if manifest[subject_id] not in splits:
            continue
        vol_path = os.path.join(data_dir, f"{subject_id}.vol")
        if not os.path.exists(vol_path):
            raise MissingData(f"{vol_path} not found; run gen-data first")
        volumes.append(read_volume(vol_path))
    if not volumes:
        raise MissingData(f"no {'/'.join(splits)} subjects in {path}")
    return volumes


def cmd_train(cfg: ExperimentConfig, method=None, name=None, untrained=False):
    """Train one method (or store the random-weight initialization) and write its run directory."""
    tcfg = copy.deepcopy(cfg.train)
    if method is not None:
        tcfg.loss.method = method
    if untrained:
        name = name or "random"
        model = build_model(tcfg, name)
        history = []
    else:
        name = name or tcfg.loss.method
        volumes = load_split(cfg, "train")
        result = train(tcfg, volumes, name=name)
        model, history = result.checkpoint, result.history
    run_dir = os.path.join(cfg.output_dir, "runs", name)
    try:
        save_checkpoint(model, os.path.join(run_dir, "checkpoint"))
        write_loss_history(history, os.path.join(run_dir, "loss.csv"))
    except OSError as exc:
        raise IoError(f"cannot write {run_dir}: {exc}") from None
    if history:
        print(f"{name}: final loss {history[-1]['loss']:.6g}")
    else:
        print(f"{name}: saved untrained checkpoint")
    return model, history


def _load(path):
    if not os.path.isdir(path):
        raise MissingData(f"checkpoint {path} not found")
    return load_checkpoint(path)


def eval_pool(cfg: ExperimentConfig):
    """Balanced labeled patches drawn from the validation and test subjects."""
    volumes = load_split(cfg, "val", "test")
    patches = sample_labeled_patches(
        volumes, cfg.train.patch_size, cfg.eval.n_per_class, derive_seed(cfg.master_seed, "eval_patches")
    )
    return patches, [p.label for p in patches]


def cmd_eval(cfg: ExperimentConfig, checkpoints):
    """Linear-probe k-fold CV for each checkpoint; paired t-tests when several are given."""
    patches, labels = eval_pool(cfg)
    ev = cfg.eval
    eval_dir = os.path.join(cfg.output_dir, "eval")
    results = {}
    for path in checkpoints:
        model = _load(path)
        z = embed_dataset(model, patches)
        records = kfold_cv(
            z, labels, ev.k_folds, derive_seed(cfg.master_seed, "folds"), ev.probe_steps, ev.probe_lr, ev.threshold
        )
        if model.name in results:
            raise IoError(f"two checkpoints are named {model.name!r}")
        results[model.name] = records
        write_metrics_csv(os.path.join(eval_dir, f"{model.name}.csv"), model.name, records)
        auc_mean, auc_std = summarize(records)["auc"]
        print(f"{model.name}: AUC {auc_mean:.4f} ± {auc_std:.4f}")
    if len(results) > 1:
        folds = {
            name: {m: [getattr(r, m) for r in recs] for m in ("auc", "accuracy", "f1", "sensitivity", "specificity")}
            for name, recs in results.items()
        }
        write_ttest_csv(os.path.join(eval_dir, "ttest.csv"), folds)
    return results


def analysis_batch(cfg: ExperimentConfig):
    volumes = load_split(cfg, "test")
    return sample_patch_batch(
        volumes,
        cfg.analyze.patches_per_volume,
        cfg.train.patch_size,
        cfg.train.coordinate_mode,
        rng_seed=derive_seed(cfg.master_seed, "analyze"),
    )


def analyze_checkpoint(model, batch, k=3):
    """Distance-error quantiles, PCA and PC/axis correlations of one checkpoint on a batch."""
    z = embed_dataset(model, batch.values())
    stats = distance_error_stats(pairwise_distances(z), pairwise_distances(batch.centers))
    result = pca(z, k)
    corr = spatial_correlation(result.projections, batch.centers)
    return {"quantiles": stats, "pca": result, "correlation": corr}


def cmd_analyze(cfg: ExperimentConfig, checkpoint, svg=None):
    model = _load(checkpoint)
    batch = analysis_batch(cfg)
    out = analyze_checkpoint(model, batch)
    out_dir = os.path.join(cfg.output_dir, "analysis", model.name)
    write_quantiles_csv(os.path.join(out_dir, "quantiles.csv"), out["quantiles"])
    write_correlation_csv(os.path.join(out_dir, "correlation.csv"), out["correlation"])
    if svg if svg is not None else cfg.analyze.svg:
        write_scatter_svg(os.path.join(out_dir, "scatter.svg"), out["pca"].projections, batch.centers)
    best = abs(out["correlation"]).max(axis=0)
    print(f"{model.name}: median |error| {out['quantiles'][50]:.4g}; max |corr| per axis {best.round(3).tolist()}")
    return out


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment config (default: built-in desk config)")
    common.add_argument("--seed", type=_u64, help="override master_seed")
    common.add_argument("--out", help="override output_dir")
    common.add_argument("-v", "--verbose", action="store_true", help="log training progress")

    parser = argparse.ArgumentParser(prog="isimed-lab", description="Synthetic-volume ISImed experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", parents=[common], help="generate and preprocess phantom subjects")

    p = sub.add_parser("train", parents=[common], help="train an encoder")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--method", choices=sorted(CLI_METHODS), help="training objective (default: from config)")
    group.add_argument("--untrained", action="store_true", help="save the random-weight initialization instead")
    p.add_argument("--name", help="run name (default: method, or 'random' with --untrained)")

    p = sub.add_parser("eval", parents=[common], help="linear-probe lesion detection")
    p.add_argument("--checkpoint", action="append", required=True, help="checkpoint directory (repeatable)")

    p = sub.add_parser("analyze", parents=[common], help="distance errors, PCA and spatial correlations")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--svg", action="store_true", default=None, help="also write a PC/axis scatter SVG")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        if args.command == "gen-data":
            cmd_gen_data(cfg)
        elif args.command == "train":
            method = CLI_METHODS[args.method] if args.method else None
            cmd_train(cfg, method, args.name, args.untrained)
        elif args.command == "eval":
            cmd_eval(cfg, args.checkpoint)
        elif args.command == "analyze":
            cmd_analyze(cfg, args.checkpoint, args.svg)
    except IsimedError as exc:
        print(f"error [{exc.component}]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
