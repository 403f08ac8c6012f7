"""Define the mutable state carried through a training run."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch


# DOC: TrainState is owned by exactly one training loop. Ω lives in model, the optimizer moments in optimizer.


@dataclass
class TrainState:
    """Training state"""
    model: torch.nn.Module
    optimizer: torch.optim.Optimizer
    data_rng: np.random.Generator
    torch_rng: torch.Generator
    iteration: int = 0
    loss_history: list[dict] = field(default_factory=list)
    best_val_acc: Optional[float] = None
    best_iteration: Optional[int] = None
    evals_since_best: int = 0
    stopped_early: bool = False

    @property
    def rng_state(self) -> dict:
        return {
            "numpy": self.data_rng.bit_generator.state,
            "torch": self.torch_rng.get_state(),
        }

    def restore_rng(self, state: dict):
        self.data_rng.bit_generator.state = state["numpy"]
        self.torch_rng.set_state(state["torch"])

    @property
    def progress(self) -> dict:
        return {
            "best_val_acc": self.best_val_acc,
            "best_iteration": self.best_iteration,
            "evals_since_best": self.evals_since_best,
            "stopped_early": self.stopped_early,
        }

    def restore_progress(self, progress: dict):
        self.best_val_acc = progress.get("best_val_acc")
        self.best_iteration = progress.get("best_iteration")
        self.evals_since_best = progress.get("evals_since_best", 0)
        self.stopped_early = progress.get("stopped_early", False)
