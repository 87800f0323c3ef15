"""Finite-difference verification of analytic gradients.

Used by the acceptance suite: for a random subset of scalar parameters the
autograd gradient of a loss must match a central finite difference in double
precision."""

from __future__ import annotations

from typing import Callable

import numpy as np
import torch


def finite_difference_check(
    model: torch.nn.Module,
    loss_fn: Callable[[], torch.Tensor],
    n_params: int = 16,
    eps: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central differences over
    `n_params` randomly chosen scalar parameters. The model must already be
    in double precision."""
    params = [p for p in model.parameters() if p.requires_grad and p.numel() > 0]
    rng = np.random.default_rng(seed)

    model.zero_grad(set_to_none=True)
    loss = loss_fn()
    loss.backward()
    grads = [
        p.grad.detach().clone() if p.grad is not None else torch.zeros_like(p)
        for p in params
    ]

    flat_sizes = [p.numel() for p in params]
    total = int(np.sum(flat_sizes))
    picks = rng.choice(total, size=min(n_params, total), replace=False)

    worst = 0.0
    with torch.no_grad():
        for flat_index in picks:
            pi, offset = _locate(flat_sizes, int(flat_index))
            p = params[pi]
            orig = p.view(-1)[offset].item()
            p.view(-1)[offset] = orig + eps
            up = float(loss_fn())
            p.view(-1)[offset] = orig - eps
            down = float(loss_fn())
            p.view(-1)[offset] = orig
            fd = (up - down) / (2.0 * eps)
            analytic = float(grads[pi].view(-1)[offset])
            rel = abs(fd - analytic) / max(abs(fd), abs(analytic), 1e-8)
            worst = max(worst, rel)
    return worst


def _locate(sizes: list[int], flat_index: int) -> tuple[int, int]:
    for i, s in enumerate(sizes):
        if flat_index < s:
            return i, flat_index
        flat_index -= s
    raise IndexError(flat_index)
