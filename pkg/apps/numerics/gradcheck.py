"""
Finite-difference gradient verification.

Compares reverse-mode gradients with central differences
(f(x + eps) - f(x - eps)) / (2 eps), coordinate by coordinate.

Usage:
    from apps.numerics.gradcheck import grad_check

    error = grad_check(lambda: loss_fn(model), model.named_parameters())
    assert error <= 1e-4
"""

import logging
from typing import Callable, Iterable

import numpy as np

from apps.numerics.rng import Rng
from apps.numerics.tensor import Param, Tensor

logger = logging.getLogger(__name__)

# Gradients below this magnitude are compared in absolute terms
RELATIVE_FLOOR = 1e-6


def _named(params) -> list[tuple[str, Param]]:
    if isinstance(params, dict):
        return list(params.items())
    named = []
    for i, item in enumerate(params):
        if isinstance(item, tuple):
            named.append(item)
        else:
            named.append((item.name or f'param{i}', item))
    return named


def relative_error(analytic: float, numeric: float, floor: float = RELATIVE_FLOOR) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def gradient_errors(
    f: Callable[[], Tensor],
    params: Iterable,
    eps: float = 1e-5,
    max_coords: int | None = None,
    seed: int = 0,
) -> dict[str, float]:
    """
    Per-parameter maximum relative error between analytic and numeric gradients.

    Args:
        f: Zero-argument function returning a scalar Tensor; must be deterministic
        params: Params, (name, Param) pairs or a name -> Param mapping
        eps: Central-difference step
        max_coords: Check at most this many randomly chosen coordinates per Param
        seed: Seed for the coordinate sample

    Returns:
        Mapping of parameter name to its worst relative error
    """
    named = _named(params)
    for _, param in named:
        param.zero_grad()
    f().backward()
    analytic = {name: param.grad.copy() for name, param in named}

    rng = Rng(seed)
    errors: dict[str, float] = {}
    for name, param in named:
        size = param.data.size
        coords = np.arange(size)
        if max_coords is not None and size > max_coords:
            coords = np.sort(rng.permutation(size)[:max_coords])
        flat = param.data.reshape(-1)
        worst = 0.0
        for coord in coords:
            original = flat[coord]
            flat[coord] = original + eps
            plus = f().item()
            flat[coord] = original - eps
            minus = f().item()
            flat[coord] = original
            numeric = (plus - minus) / (2.0 * eps)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[coord]), numeric))
        errors[name] = worst
    for _, param in named:
        param.zero_grad()
    logger.debug('Gradient check', extra={'params': len(named), 'max_error': max(errors.values(), default=0.0)})
    return errors


def grad_check(f: Callable[[], Tensor], params: Iterable, eps: float = 1e-5, **kwargs) -> float:
    """Maximum relative error over every checked coordinate of every Param."""
    return max(gradient_errors(f, params, eps=eps, **kwargs).values(), default=0.0)
