"""Weight initialization."""

from __future__ import annotations

import numpy as np

from ..errors import DomainError

__all__ = ["glorot_uniform"]


def glorot_uniform(fan_in: int, fan_out: int, shape, rng) -> np.ndarray:
    """Draw a tensor uniformly from [-L, L] with L = sqrt(6 / (fan_in + fan_out)).

    ``rng`` may be an integer seed or a ``numpy.random.Generator``; the
    draw is deterministic given the seed / generator state.
    """
    if fan_in < 1 or fan_out < 1:
        raise DomainError(f"fans must be >= 1, got fan_in={fan_in}, fan_out={fan_out}")
    gen = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=shape).astype(np.float64)
