"""Finite-difference validation of the autodiff core."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .autodiff import Tensor


def grad_check(
    fn: Callable[[], Tensor],
    params: list[Tensor],
    eps: float = 1e-4,
    max_coords: int = 24,
    rng: np.random.Generator | None = None,
) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    fn must rebuild the scalar loss from the given parameter tensors on
    every call (their .data is perturbed in place). A subset of
    coordinates per tensor is probed to keep large layers cheap.
    """
    rng = rng or np.random.default_rng(0)
    for p in params:
        p.zero_grad()
    loss = fn()
    loss.backward()
    analytic = [None if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        if ga is None:
            continue
        flat = p.data.reshape(-1)
        n = flat.size
        coords = np.arange(n) if n <= max_coords else rng.choice(n, size=max_coords, replace=False)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + eps
            f_plus = float(fn().data)
            flat[idx] = orig - eps
            f_minus = float(fn().data)
            flat[idx] = orig
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(ga.reshape(-1)[idx])
            rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            worst = max(worst, rel)
    return worst
