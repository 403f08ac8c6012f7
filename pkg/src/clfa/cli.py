"""Command line entry point: clfa train | eval | probe | export | synth | report | study."""

import os
import sys
import json
import logging
import argparse
import tomllib
from typing import Optional, Sequence

from clfa.common import names as N
from clfa.common.config import TrainConfig, load_config
from clfa.common.errors import ClfaError, argument_error, config_error, io_error
from clfa.common.logger import fmsg, setup_logging
from clfa.common.utils import juststem, make_rng, normpath
from clfa.data import (
    ImageDataset,
    load_corruption_levels,
    load_domains,
    load_folder_dataset,
    load_synthetic_spec,
    make_synthetic_splits,
    sample_triple_batch,
    write_folder_dataset,
)
from clfa.evaluation import (
    evaluate,
    export_embeddings,
    export_meta_samples,
    leave_one_domain_out,
    linear_probe,
    report,
    run_synthetic_shift_study,
)
from clfa.evaluation.protocols import VARIANTS
from clfa.model import load_model
from clfa.runs import RUNS
from clfa.training import fit, fit_seeds
from clfa.transforms import TransformBank

logger = logging.getLogger(__name__)

PROBE_ALIASES = { "fc": N.PROBE_FC, "fb": N.PROBE_FB, "full": N.PROBE_FULL, N.PROBE_FC: N.PROBE_FC, N.PROBE_FB: N.PROBE_FB }



# REGION: [Argument parsing helpers]

def parse_list(value: Optional[str], cast=str) -> list:
    if value is None:
        return []
    items = [v.strip() for v in value.split(",") if v.strip()]
    try:
        return [cast(v) for v in items]
    except ValueError:
        raise argument_error(f"Cannot parse '{value}' as a comma list of {cast.__name__}.")


def parse_overrides(pairs: Sequence[str]) -> dict:
    """key=value pairs; values are read as TOML literals and fall back to plain strings."""
    overrides = dict()
    for pair in pairs or []:
        if "=" not in pair:
            raise argument_error(f"Override '{pair}' is not key=value.")
        key, raw = pair.split("=", 1)
        try:
            value = tomllib.loads(f"v = {raw}")["v"]
        except tomllib.TOMLDecodeError:
            value = raw
        overrides[key.strip()] = value
    return overrides


def _write_json(obj: dict):
    sys.stdout.write(json.dumps(obj, default=str) + "\n")


def _config_from_args(args, default_profile: Optional[str] = None) -> TrainConfig:
    overrides = parse_overrides(args.set)
    if getattr(args, "transforms", None):
        overrides["transforms.enabled"] = parse_list(args.transforms)
    if getattr(args, "max_iters", None) is not None:
        overrides["max_iters"] = args.max_iters
    if getattr(args, "log_provenance", False):
        overrides["log_provenance"] = True
    profile = args.profile if args.profile is not None else (default_profile if args.config is None else None)
    return load_config(args.config, profile, overrides)

# ENDREGION: [Argument parsing helpers]



# REGION: [Dataset loading]

def load_training_data(cfg: TrainConfig, data_root: Optional[str], spec_path: Optional[str] = None) -> tuple[ImageDataset, Optional[ImageDataset]]:
    """
    Training and validation sets for one run.

    Without a dataset root a synthetic dataset_tag generates the controllable-factor splits; any
    other tag is a CONFIG error. Folder datasets hold out cfg.data.val_fraction per class for
    validation unless cfg.data.val_root is set.
    """
    root = data_root or cfg.data.root
    validate = cfg.eval_every > 0
    if root is None:
        if cfg.dataset_tag != N.SYNTHETIC:
            raise config_error(f"dataset_tag '{cfg.dataset_tag}' needs a dataset root (--data or data.root).")
        if spec_path is not None:
            spec = load_synthetic_spec(spec_path)
        else:
            spec = load_synthetic_spec(num_classes=cfg.model.num_classes, image_size=cfg.model.image_size, seed=cfg.seed)
        splits = make_synthetic_splits(spec)
        return splits[N.SPLIT_TRAIN], splits[N.SPLIT_VAL] if validate else None

    size = cfg.model.image_size
    if cfg.data.val_root is not None:
        train_ds = load_folder_dataset(root, N.SPLIT_ALL, size)
        return train_ds, load_folder_dataset(cfg.data.val_root, N.SPLIT_ALL, size) if validate else None
    if not validate or cfg.data.val_fraction == 0:
        return load_folder_dataset(root, N.SPLIT_ALL, size), None
    train_ds = load_folder_dataset(root, N.SPLIT_TRAIN, size, cfg.data.val_fraction)
    val_ds = load_folder_dataset(root, N.SPLIT_VAL, size, cfg.data.val_fraction)
    return train_ds, val_ds


def load_targets(dirs: Sequence[str], protocol: str, image_size: int, split: str) -> dict[str, ImageDataset]:
    if len(dirs) == 0:
        raise argument_error("No target directories given.")
    if protocol == N.SEVERITY_SWEEP:
        if len(dirs) != 1:
            raise argument_error("The severity sweep reads one corruption directory.")
        return load_corruption_levels(dirs[0])
    targets = dict()
    for d in dirs:
        name = juststem(normpath(d))
        if name in targets:
            raise argument_error(f"Two targets are named '{name}'.")
        targets[name] = load_folder_dataset(d, split, image_size, domain_tag=name)
    return targets


def _train_config_of(payload: dict) -> Optional[TrainConfig]:
    data = payload.get("train_config")
    if data is None:
        return None
    return TrainConfig.model_validate({ **data, "model": { **data["model"], "pretrained_path": None } })

# ENDREGION: [Dataset loading]



# REGION: [Subcommands]

def cmd_train(args) -> int:
    cfg = _config_from_args(args, default_profile=N.SYNTHETIC)
    seeds = parse_list(args.seeds, int)
    if len(seeds) > 0 and args.resume is not None:
        raise argument_error("--resume applies to a single run, not to --seeds.")
    if args.leave_one_out:
        if args.data is None and cfg.data.root is None:
            raise argument_error("Leave-one-domain-out needs --data pointing at root/<domain>/<class>/.")
        domains = load_domains(args.data or cfg.data.root, image_size=cfg.model.image_size)
        for seed in seeds or [cfg.seed]:
            out = os.path.join(args.out, f"seed_{seed}") if seeds else args.out
            run_cfg = cfg.model_copy(update={ "seed": seed })
            record = leave_one_domain_out(run_cfg, domains, out, val_fraction=cfg.data.val_fraction, progress=not args.quiet)
            _write_json(record.as_anon_dict)
        return 0

    train_ds, val_ds = load_training_data(cfg, args.data, args.spec)
    if len(seeds) > 0:
        fit_seeds(cfg, seeds, train_ds, val_ds, args.out, progress=not args.quiet)
    else:
        fit(cfg, train_ds, val_ds, out=args.out, resume=args.resume, progress=not args.quiet)
    logger.info(fmsg("Run complete", out=normpath(args.out)))
    return 0


def cmd_eval(args) -> int:
    model, payload = load_model(args.checkpoint)
    train_cfg = _train_config_of(payload)
    targets = load_targets(parse_list(args.targets), args.protocol, model.cfg.image_size, args.split)
    record = evaluate(
        model,
        targets,
        protocol = args.protocol,
        seed = train_cfg.seed if train_cfg is not None else None,
        workers = args.workers,
        selection = args.selection
    )
    record.checkpoint_ref = normpath(args.checkpoint)
    RUNS.save_record(args.out_record or os.path.dirname(normpath(args.checkpoint)) or ".", record)
    _write_json(record.as_anon_dict)
    return 0


def cmd_probe(args) -> int:
    if args.target not in PROBE_ALIASES:
        raise argument_error(f"Unknown probe target '{args.target}', expected fc, fb or full.")
    model, _ = load_model(args.checkpoint)
    ds = load_folder_dataset(args.data, args.split, model.cfg.image_size)
    probe = linear_probe(model, ds, PROBE_ALIASES[args.target], seed=args.seed)
    probe.checkpoint_ref = normpath(args.checkpoint)
    if args.out_record is not None:
        RUNS.save_record(args.out_record, probe)
    _write_json(probe.as_anon_dict)
    return 0


def cmd_export(args) -> int:
    model, payload = load_model(args.checkpoint)
    ds = load_folder_dataset(args.data, args.split, model.cfg.image_size)
    written = { "embeddings": export_embeddings(model, ds, args.out) }
    if args.meta_samples > 0:
        train_cfg = _train_config_of(payload) or TrainConfig()
        tb = TransformBank.from_config(train_cfg.transforms)
        triple = sample_triple_batch(ds, 1, make_rng(args.seed), tb, train_cfg.dataset_tag, train_cfg.use_image_transforms)[0]
        meta_out = args.meta_out or os.path.join(os.path.dirname(normpath(args.out)), f"{juststem(args.out)}_meta.csv")
        written["meta_samples"] = export_meta_samples(model, triple, meta_out, n_samples=args.meta_samples, seed=args.seed)
    _write_json(written)
    return 0


def cmd_synth(args) -> int:
    spec = load_synthetic_spec(args.spec, seed=args.seed)
    splits = make_synthetic_splits(spec)
    written = { split: write_folder_dataset(ds, os.path.join(args.out, split)) for split, ds in splits.items() }
    logger.info(fmsg("Synthetic dataset written", out=normpath(args.out), **{ k: len(v) for k, v in splits.items() }))
    _write_json(written)
    return 0


def _expand_run_dirs(dirs: Sequence[str]) -> list[str]:
    """A directory without records stands for its sub-directories that have them (seed_<s>, per-domain runs)."""
    expanded = []
    for d in dirs:
        if os.path.isfile(RUNS.path(d, N.RECORDS_LOG)) or not os.path.isdir(d):
            expanded.append(d)
            continue
        children = sorted(
            os.path.join(d, c) for c in os.listdir(d)
            if os.path.isfile(RUNS.path(os.path.join(d, c), N.RECORDS_LOG))
        )
        expanded.extend(children if children else [d])
    return expanded


def cmd_report(args) -> int:
    artifacts = report(_expand_run_dirs(args.runs), args.out, std_mode=args.std, plot=args.plot)
    _write_json(artifacts)
    return 0


def cmd_study(args) -> int:
    cfg = _config_from_args(args, default_profile=N.SYNTHETIC)
    if args.spec is not None:
        spec = load_synthetic_spec(args.spec)
    else:
        spec = load_synthetic_spec(num_classes=cfg.model.num_classes, image_size=cfg.model.image_size, seed=cfg.seed)
    variants = parse_list(args.variants) or list(VARIANTS)
    seeds = parse_list(args.seeds, int) or [cfg.seed]
    runs = run_synthetic_shift_study(cfg, spec, seeds, args.out, variants=variants, progress=not args.quiet)
    sys.stdout.write(runs.to_string(index=False) + "\n")
    return 0

# ENDREGION: [Subcommands]



def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="TOML configuration file.")
    p.add_argument("--profile", help="Built-in profile: pacs, digits, cifar10, synthetic.")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Dotted-key override, repeatable.")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--transforms", help="Preset name or comma list of strategies.")
    p.add_argument("--seeds", help="Comma list of seeds, one run each.")
    p.add_argument("--quiet", action="store_true", help="No progress bar.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="clfa", description="Causal latent feature augmentation for single-domain generalization.")
    parser.add_argument("--log-level", default=None, help="Overrides CLFA_LOG_LEVEL.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train one run (or one per seed).")
    _add_config_args(p)
    p.add_argument("--data", help="Folder dataset root; omitted with the synthetic tag to generate data.")
    p.add_argument("--spec", help="Synthetic dataset spec (TOML) used when no --data is given.")
    p.add_argument("--out", required=True, help="Run directory.")
    p.add_argument("--resume", help="Checkpoint to resume from.")
    p.add_argument("--log-provenance", action="store_true", dest="log_provenance")
    p.add_argument("--leave-one-out", action="store_true", dest="leave_one_out", help="--data holds one folder per domain.")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="Accuracy of a checkpoint on target datasets.")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--targets", required=True, help="Comma list of target folders (one CIFAR10-C folder for severity_sweep).")
    p.add_argument("--protocol", default=N.SINGLE_DG, choices=[N.SINGLE_DG, N.SEVERITY_SWEEP, N.SYNTHETIC_SHIFT])
    p.add_argument("--split", default=N.SPLIT_ALL, choices=list(N.SPLITS))
    p.add_argument("--selection", default=None, help="Model-selection rule recorded with the result.")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out-record", dest="out_record", help="Run directory receiving the record; defaults to the checkpoint's.")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("probe", help="Linear probe on a frozen feature slice.")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", required=True, help="fc, fb or full.")
    p.add_argument("--split", default=N.SPLIT_ALL, choices=list(N.SPLITS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-record", dest="out_record")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("export", help="Embedding CSV, optionally with meta-knowledge samples.")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="Embedding CSV.")
    p.add_argument("--split", default=N.SPLIT_ALL, choices=list(N.SPLITS))
    p.add_argument("--meta-samples", type=int, default=0, dest="meta_samples", help="Samples per encoder branch for one triple.")
    p.add_argument("--meta-out", dest="meta_out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth", help="Write the synthetic dataset as train/val/test folders.")
    p.add_argument("--spec", help="Synthetic dataset spec (TOML).")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="Accuracy summary over run directories.")
    p.add_argument("--runs", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--plot", action="store_true", help="Also plot loss curves.")
    p.add_argument("--std", default="sample", choices=["sample", "population"])
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("study", help="Baseline / baseline+T / full on the synthetic shift.")
    _add_config_args(p)
    p.add_argument("--spec", help="Synthetic dataset spec (TOML).")
    p.add_argument("--variants", help=f"Comma list out of {','.join(VARIANTS)}.")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_study)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)
    try:
        return args.func(args)
    except ClfaError as e:
        error = e
    except OSError as e:
        # DOC: filesystem failures that escape the loaders and writers still exit as IO
        error = io_error(str(e), errno=e.errno, filename=e.filename)
    sys.stderr.write(f"clfa: error: {error.one_line}\n")
    logger.debug(fmsg("Failure details", **error.as_dict))
    return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
