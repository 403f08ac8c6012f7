# DOC: Central finite differences against autograd on parameter entries that carry gradient

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import torch

from clfa.common.errors import argument_error


@dataclass
class GradientEntry:
    param_index: int
    entry: int
    analytic: float
    numeric: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.analytic), abs(self.numeric))
        return 0.0 if scale == 0.0 else abs(self.analytic - self.numeric) / scale

    @property
    def as_dict(self):
        return {
            "param_index": self.param_index,
            "entry": self.entry,
            "analytic": self.analytic,
            "numeric": self.numeric,
            "rel_error": self.rel_error,
        }


@dataclass
class FiniteDifferenceReport:
    entries: list[GradientEntry] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max((p.rel_error for p in self.entries), default=0.0)

    def passed(self, tolerance: float = 1e-3, atol: float = 1e-7) -> bool:
        """Every entry agrees within tolerance, or both gradients are below atol in magnitude."""
        return all(
            p.rel_error < tolerance or max(abs(p.analytic), abs(p.numeric)) < atol
            for p in self.entries
        )


def _nonzero_entries(grads: Sequence[Optional[torch.Tensor]]) -> list[tuple[int, torch.Tensor]]:
    """(parameter index, flat indices with a nonzero analytic gradient) for every tensor that has any."""
    candidates = []
    for i, grad in enumerate(grads):
        if grad is None:
            continue
        entries = torch.nonzero(grad.reshape(-1), as_tuple=True)[0]
        if len(entries) > 0:
            candidates.append((i, entries))
    return candidates


def finite_difference_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Sequence[torch.Tensor],
    n_entries: int = 10,
    step: float = 1e-6,
    generator: Optional[torch.Generator] = None
) -> FiniteDifferenceReport:
    """
    Compare autograd with central differences on n_entries parameter entries.

    Entries are taken from those with a nonzero analytic gradient, cycling over the parameter tensors in a
    random order so every tensor with gradient is checked before any is checked twice. Without any nonzero
    gradient the entries are drawn uniformly over all parameters.

    Args:
        loss_fn: Recomputes the scalar loss from the current parameter values; it must be deterministic
            (reseed any random source inside it).
        params: Leaf tensors requiring gradients, float64 recommended.
        n_entries: Number of checked entries.
        step: Finite-difference half step.
        generator: Selects the checked entries.
    """
    params = list(params)
    if len(params) == 0:
        raise argument_error("No parameters to check.")
    if n_entries <= 0:
        raise argument_error(f"n_entries must be positive, got {n_entries}.")
    grads = torch.autograd.grad(loss_fn(), params, allow_unused=True)

    choices = []
    candidates = _nonzero_entries(grads)
    if candidates:
        order = torch.randperm(len(candidates), generator=generator).tolist()
        for k in range(n_entries):
            param_index, entries = candidates[order[k % len(order)]]
            pick = int(torch.randint(len(entries), (1,), generator=generator))
            choices.append((param_index, int(entries[pick])))
    else:
        sizes = torch.tensor([p.numel() for p in params])
        offsets = torch.cumsum(sizes, 0) - sizes
        for flat in torch.randint(int(sizes.sum()), (n_entries,), generator=generator).tolist():
            param_index = int(torch.searchsorted(offsets, torch.tensor(flat), right=True)) - 1
            choices.append((param_index, flat - int(offsets[param_index])))

    report = FiniteDifferenceReport()
    for param_index, entry in choices:
        values = params[param_index].data.view(-1)
        original = values[entry].item()
        with torch.no_grad():
            values[entry] = original + step
            loss_plus = float(loss_fn())
            values[entry] = original - step
            loss_minus = float(loss_fn())
            values[entry] = original
        grad = grads[param_index]
        analytic = 0.0 if grad is None else float(grad.reshape(-1)[entry])
        report.entries.append(GradientEntry(param_index, entry, analytic, (loss_plus - loss_minus) / (2.0 * step)))
    return report
