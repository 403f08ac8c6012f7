"""The outer training loop: a fixed iteration budget with periodic validation and checkpoints."""

import os
import logging
from typing import Optional

import torch
from tqdm import tqdm

from clfa.common import names as N
from clfa.common.config import TrainConfig
from clfa.common.errors import config_error
from clfa.common.logger import fmsg
from clfa.common.states import TrainState
from clfa.common.utils import make_rng, make_torch_generator, seed_everything
from clfa.data.schema import ImageDataset
from clfa.data.triples import sample_triple_batch
from clfa.model.checkpoint import read_checkpoint, restore_model, save_checkpoint
from clfa.model.core import build_model
from clfa.model.inference import dataset_accuracy
from clfa.runs import RUNS
from clfa.runs import run_schema as RS
from clfa.training.step import lr_at, train_step
from clfa.transforms import TransformBank

logger = logging.getLogger(__name__)


def check_dataset(cfg: TrainConfig, ds: ImageDataset):
    expected = (cfg.model.image_size, cfg.model.image_size, cfg.model.in_channels)
    if ds.num_classes != cfg.model.num_classes:
        raise config_error(
            f"Dataset '{ds.name}' has {ds.num_classes} classes, the model expects {cfg.model.num_classes}.",
            dataset = ds.name
        )
    if ds.image_shape != expected:
        raise config_error(f"Dataset '{ds.name}' images are {list(ds.image_shape)}, the model expects {list(expected)}.")


def build_state(cfg: TrainConfig) -> TrainState:
    """Seed everything from cfg.seed, then build the model, the optimizer and both random sources."""
    seed_everything(cfg.seed, single_thread=cfg.deterministic)
    model = build_model(cfg.model, dtype=cfg.dtype, device=cfg.device)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr = cfg.base_lr,
        betas = cfg.adam_betas,
        eps = cfg.adam_eps,
        weight_decay = cfg.weight_decay
    )
    return TrainState(
        model = model,
        optimizer = optimizer,
        data_rng = make_rng(cfg.seed),
        torch_rng = make_torch_generator(cfg.seed),
    )


def restore_state(state: TrainState, checkpoint: str) -> TrainState:
    payload = read_checkpoint(checkpoint)
    restore_model(state.model, payload)
    if payload.get("optimizer") is not None:
        state.optimizer.load_state_dict(payload["optimizer"])
    if payload.get("rng") is not None:
        state.restore_rng(payload["rng"])
    state.iteration = int(payload["iteration"])
    state.restore_progress(payload.get("extra", dict()))
    logger.info(fmsg("Resumed", checkpoint=checkpoint, iteration=state.iteration))
    return state


def _save(path: str, state: TrainState, cfg: TrainConfig):
    save_checkpoint(
        path, state.model, state.iteration,
        train_cfg = cfg,
        optimizer_state = state.optimizer.state_dict(),
        rng_state = state.rng_state,
        extra = state.progress
    )


def _validate(state: TrainState, cfg: TrainConfig, val_ds: ImageDataset, out: Optional[str]) -> bool:
    """Record validation accuracy, keep the best checkpoint, return True when patience is exhausted."""
    acc = dataset_accuracy(state.model, val_ds, cfg.eval_batch_size)
    logger.info(fmsg("Validation", iter=state.iteration, val_acc=acc))
    if out is not None:
        RUNS.log_metrics(out, { "iter": state.iteration, "val_acc": acc })
    if state.best_val_acc is None or acc > state.best_val_acc:
        state.best_val_acc, state.best_iteration, state.evals_since_best = acc, state.iteration, 0
        if out is not None:
            _save(RUNS.path(out, RS.Files.BEST), state, cfg)
        return False
    state.evals_since_best += 1
    return cfg.patience is not None and state.evals_since_best >= cfg.patience


def fit(
    cfg: TrainConfig,
    train_ds: ImageDataset,
    val_ds: Optional[ImageDataset] = None,
    out: Optional[str] = None,
    resume: Optional[str] = None,
    progress: bool = True
) -> TrainState:
    """
    Train for cfg.max_iters optimizer steps.

    Args:
        cfg: Training configuration.
        train_ds: Source dataset; only images and labels reach the objective.
        val_ds: Optional validation set, evaluated every cfg.eval_every iterations.
        out: Run directory. None keeps everything in memory.
        resume: Checkpoint to continue from; model, optimizer, random sources and iteration are restored.
        progress: Show a tqdm bar.

    Returns:
        TrainState: the final state; state.loss_history holds one entry per step taken in this call.
    """
    check_dataset(cfg, train_ds)
    if val_ds is not None:
        check_dataset(cfg, val_ds)
        if val_ds.class_names != train_ds.class_names:
            raise config_error(
                f"Validation classes {list(val_ds.class_names)} differ from training classes {list(train_ds.class_names)}.",
                dataset = val_ds.name
            )
    tb = TransformBank.from_config(cfg.transforms)
    state = build_state(cfg)
    state.model.class_names = tuple(train_ds.class_names)
    if resume is not None:
        restore_state(state, resume)
    if out is not None:
        RUNS.create_run(out, cfg)
        if resume is not None:
            RUNS.truncate_metrics(out, state.iteration)

    logger.info(fmsg("Training", max_iters=cfg.max_iters, start=state.iteration, dataset=train_ds.name, samples=len(train_ds)))
    bar = tqdm(total=cfg.max_iters, initial=state.iteration, disable=not progress, desc="train")
    while state.iteration < cfg.max_iters:
        batch = sample_triple_batch(train_ds, cfg.triples_per_class, state.data_rng, tb, cfg.dataset_tag, cfg.use_image_transforms)
        if out is not None and cfg.log_provenance:
            RUNS.log_provenance(out, state.iteration + 1, batch)
        lr = lr_at(state.iteration, cfg)
        state, bundle = train_step(state, batch, cfg)
        entry = { "iter": state.iteration, **bundle.as_dict, "lr": lr }
        state.loss_history.append(entry)
        bar.update(1)
        bar.set_postfix(total=f"{entry[N.LOSS_TOTAL]:.4f}")

        if out is not None and (state.iteration % cfg.log_every == 0 or state.iteration == cfg.max_iters):
            RUNS.log_metrics(out, entry)
        stop = False
        if val_ds is not None and cfg.eval_every > 0 and state.iteration % cfg.eval_every == 0:
            stop = _validate(state, cfg, val_ds, out)
        if out is not None and cfg.checkpoint_every > 0 and state.iteration % cfg.checkpoint_every == 0:
            _save(RUNS.checkpoint_path(out, state.iteration), state, cfg)
        if stop:
            state.stopped_early = True
            logger.info(fmsg("Early stop", iter=state.iteration, best_iteration=state.best_iteration))
            break
    bar.close()

    if out is not None:
        _save(RUNS.path(out, RS.Files.FINAL), state, cfg)
    return state


def fit_seeds(cfg: TrainConfig, seeds: list[int], train_ds: ImageDataset, val_ds: Optional[ImageDataset], out: str, **kwargs) -> dict[int, TrainState]:
    """One sub-run per seed under out/seed_<s>."""
    return {
        seed: fit(cfg.model_copy(update={"seed": seed}), train_ds, val_ds, out=os.path.join(out, f"seed_{seed}"), **kwargs)
        for seed in seeds
    }
