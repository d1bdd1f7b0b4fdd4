"""Categorical sampling helpers shared by the infill and editor models."""

from __future__ import annotations

import numpy as np


def temperature_scaled(probs: np.ndarray, temperature: float) -> np.ndarray:
    """Renormalize ``probs ** (1/T)`` stably; T=0 collapses to the argmax.

    Ties at T=0 go to the lowest index. Entries that are exactly zero stay
    zero at any temperature.
    """
    p = np.asarray(probs, dtype=np.float64)
    if temperature < 0:
        raise ValueError("temperature must be >= 0")
    if temperature == 0:
        out = np.zeros_like(p)
        out[int(np.argmax(p))] = 1.0
        return out
    if temperature == 1.0:
        return p / p.sum()
    with np.errstate(divide="ignore"):
        logits = np.where(p > 0, np.log(p), -np.inf) / temperature
    logits -= logits.max()
    w = np.exp(logits)
    return w / w.sum()


def draw_categorical(probs: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; consumes exactly one uniform from the stream."""
    u = rng.random()
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u * cdf[-1], side="right"))
    return min(idx, len(probs) - 1)


def argmax_lowest(probs: np.ndarray) -> int:
    """Argmax with ties broken by the lowest index."""
    return int(np.argmax(probs))
