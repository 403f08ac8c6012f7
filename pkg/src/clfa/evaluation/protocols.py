"""Evaluation protocols built on fit and evaluate: single-DG, severity sweep, leave-one-domain-out and the synthetic-shift study."""

import os
import logging
from typing import Mapping, Optional, Sequence

import pandas as pd

from clfa.common import names as N
from clfa.common.config import TrainConfig
from clfa.common.errors import argument_error, data_error
from clfa.common.logger import fmsg
from clfa.common.utils import atomic_write, make_rng, normpath
from clfa.data.schema import ImageDataset, concat_datasets, holdout_split
from clfa.data.synthetic import SyntheticFactorSpec, make_synthetic_splits
from clfa.evaluation.metrics import ModelSource, evaluate
from clfa.evaluation.probe import linear_probe
from clfa.runs import RUNS
from clfa.runs.run_schema import MetricsRecord
from clfa.training import fit

logger = logging.getLogger(__name__)

SELECTION_TRAINING_DOMAIN = "training-domain validation"
SELECTION_FINAL = "final checkpoint"

BASELINE = "baseline"
BASELINE_T = "baseline_t"
FULL = "full"
VARIANTS = (BASELINE, BASELINE_T, FULL)


def single_dg(source: ModelSource, targets: Mapping[str, ImageDataset], seed: Optional[int] = None, workers: int = 1) -> MetricsRecord:
    """One source domain, every other domain a target."""
    return evaluate(source, targets, protocol=N.SINGLE_DG, seed=seed, workers=workers)


def severity_sweep(source: ModelSource, levels: Mapping[str, ImageDataset], seed: Optional[int] = None, workers: int = 1) -> MetricsRecord:
    """One target per corruption severity level (corruption types pooled within a level)."""
    return evaluate(source, levels, protocol=N.SEVERITY_SWEEP, seed=seed, workers=workers)


def _selected_checkpoint(run_dir: str) -> tuple[str, str]:
    best = RUNS.best_checkpoint(run_dir)
    if best is not None:
        return best, SELECTION_TRAINING_DOMAIN
    return RUNS.final_checkpoint(run_dir), SELECTION_FINAL


def leave_one_domain_out(
    cfg: TrainConfig,
    domains: Mapping[str, ImageDataset],
    out: str,
    val_fraction: float = 0.1,
    progress: bool = True
) -> MetricsRecord:
    """
    Train on the union of all domains but one, test on the held-out one, for every domain.

    Validation is a per-class hold-out of the training union; the checkpoint with the best
    validation accuracy is evaluated. Each held-out run lives in out/<domain> with its own record;
    the combined record (one target per held-out domain) is saved in out.
    """
    if len(domains) < 2:
        raise data_error(f"Leave-one-domain-out needs at least two domains, got {list(domains)}.")
    per_target, selections = dict(), set()
    for held_out in sorted(domains):
        union = concat_datasets([domains[d] for d in sorted(domains) if d != held_out], name=f"without_{held_out}")
        train_ds, val_ds = union, None
        if val_fraction > 0 and cfg.eval_every > 0:
            train_ds, val_ds = holdout_split(union, val_fraction, make_rng(cfg.seed))
        run_dir = os.path.join(out, held_out)
        fit(cfg, train_ds, val_ds if val_ds is not None and len(val_ds) > 0 else None, out=run_dir, progress=progress)
        checkpoint, selection = _selected_checkpoint(run_dir)
        record = evaluate(checkpoint, { held_out: domains[held_out] }, protocol=N.LEAVE_ONE_OUT, seed=cfg.seed, selection=selection)
        RUNS.save_record(run_dir, record)
        per_target[held_out] = record.per_target[held_out]
        selections.add(selection)

    combined = MetricsRecord(
        protocol = N.LEAVE_ONE_OUT,
        per_target = per_target,
        seed = cfg.seed,
        checkpoint_ref = normpath(out),
        selection = ", ".join(sorted(selections))
    )
    RUNS.save_record(out, combined)
    return combined



# REGION: [Synthetic shift study]

def variant_config(cfg: TrainConfig, variant: str, seed: int) -> TrainConfig:
    """baseline: no image transforms and zero α; baseline_t: transforms, zero α; full: cfg as given."""
    if variant not in VARIANTS:
        raise argument_error(f"Unknown variant '{variant}', expected one of {list(VARIANTS)}.")
    data = cfg.model_dump()
    data["seed"] = seed
    if variant in (BASELINE, BASELINE_T):
        data["weights"].update(alpha1=0.0, alpha2=0.0, alpha3=0.0)
    if variant == BASELINE:
        data["use_image_transforms"] = False
    return TrainConfig.model_validate(data)


def run_synthetic_shift_study(
    cfg: TrainConfig,
    spec: SyntheticFactorSpec,
    seeds: Sequence[int],
    out: str,
    variants: Sequence[str] = VARIANTS,
    progress: bool = False
) -> pd.DataFrame:
    """
    Train every variant for every seed on the correlated split and test on the shifted split.

    Each run is saved in out/<variant>/seed_<s> with its MetricsRecord and one ProbeReport per
    feature slice (probes fit on the shifted test split). Returns one row per run and writes
    out/study.csv plus the per-variant mean/std in out/study_summary.csv.
    """
    if len(seeds) == 0:
        raise argument_error("At least one seed is required.")
    splits = make_synthetic_splits(spec)
    test_ds = splits[N.SPLIT_TEST]

    rows = []
    for variant in variants:
        for seed in seeds:
            run_dir = os.path.join(out, variant, f"seed_{seed}")
            vcfg = variant_config(cfg, variant, seed)
            fit(vcfg, splits[N.SPLIT_TRAIN], splits[N.SPLIT_VAL], out=run_dir, progress=progress)
            checkpoint = RUNS.final_checkpoint(run_dir)
            record = evaluate(checkpoint, { "shifted": test_ds }, protocol=N.SYNTHETIC_SHIFT, seed=seed, selection=SELECTION_FINAL)
            RUNS.save_record(run_dir, record)
            row = { "variant": variant, "seed": seed, "run": normpath(run_dir), "shifted_acc": record.average }
            for target in N.PROBE_TARGETS:
                probe = linear_probe(checkpoint, test_ds, target, seed=seed)
                RUNS.save_record(run_dir, probe)
                row[f"probe_{target}"] = probe.heldout_acc
            rows.append(row)
            logger.info(fmsg("Study run", **{ k: v for k, v in row.items() if k != "run" }))

    runs = pd.DataFrame(rows)
    summary = runs.drop(columns=["seed", "run"]).groupby("variant", sort=False).agg(["mean", "std"])
    summary.columns = [f"{column}_{stat}" for column, stat in summary.columns]
    summary = summary.reset_index()
    os.makedirs(out, exist_ok=True)
    atomic_write(os.path.join(out, "study.csv"), lambda tmp: runs.to_csv(tmp, index=False, lineterminator="\n"))
    atomic_write(os.path.join(out, "study_summary.csv"), lambda tmp: summary.to_csv(tmp, index=False, lineterminator="\n"))
    return runs

# ENDREGION: [Synthetic shift study]
