"""Masked perturbation engine: masking strategies plus a count-based infill model.

Perturbations come in two steps: pick a set of mutable positions to blank out
(contiguous spans with truncated-Poisson lengths, or independent per-position
coin flips), then resample the blanks left-to-right from a smoothed
first-order (or zeroth-order) conditional model fit on the unsupervised
corpus. This stands in for mask-and-infill generation with a pretrained
masked language model, at a scale where every piece is exactly testable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Sequence as PySequence

import numpy as np

from .sampling import draw_categorical, temperature_scaled
from .seqs import RegionMask, Sequence

SPAN = "span"
IID = "iid"

# Named mask presets: (span_lambda, span_max).
MASK_PRESETS = {
    "small": (3.0, 6),
    "medium": (4.0, 8),
    "large": (5.0, 10),
    "super-large": (6.0, 12),
}

_RETRY_BOUND = 1000


@dataclass(frozen=True)
class MaskSpec:
    """Masking strategy parameters.

    SPAN draws ``n_spans`` spans, each starting at a uniform mutable position
    with length from Poisson(span_lambda) truncated to [1, span_max], clipped
    to mutable in-range positions. IID includes each mutable position
    independently with probability ``iid_rate``.
    """

    strategy: str = SPAN
    span_lambda: float = 6.0
    span_max: int = 12
    iid_rate: float = 0.8
    n_spans: int = 1

    def __post_init__(self) -> None:
        if self.strategy not in (SPAN, IID):
            raise ValueError(f"unknown mask strategy {self.strategy!r}")
        if self.span_lambda <= 0:
            raise ValueError("span_lambda must be > 0")
        if self.span_max < 1:
            raise ValueError("span_max must be >= 1")
        if not 0 < self.iid_rate <= 1:
            raise ValueError("iid_rate must be in (0, 1]")
        if self.n_spans < 1:
            raise ValueError("n_spans must be >= 1")

    @classmethod
    def preset(cls, name: str, **overrides) -> "MaskSpec":
        lam, mx = MASK_PRESETS[name]
        return replace(cls(span_lambda=lam, span_max=mx), **overrides)


@dataclass(frozen=True, eq=False)
class InfillModel:
    """Laplace-smoothed per-position token model fit on the unsupervised corpus.

    ``order`` 1 conditions on the left-neighbor token (position 0 uses a
    constant conditioning index of 0); order 0 is per-position unconditional.
    ``counts`` has shape (length, alphabet_size, alphabet_size) for order 1
    and (length, alphabet_size) for order 0. ``probs`` is the smoothed
    normalization of ``counts`` along the last axis.
    """

    order: int
    counts: np.ndarray
    smoothing: float

    def __post_init__(self) -> None:
        self.counts.setflags(write=False)
        if self.order not in (0, 1):
            raise ValueError("order must be 0 or 1")
        if self.smoothing <= 0:
            raise ValueError("smoothing must be > 0")
        probs = (self.counts + self.smoothing) / (
            self.counts.sum(axis=-1, keepdims=True) + self.smoothing * self.counts.shape[-1]
        )
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @property
    def length(self) -> int:
        return self.counts.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.counts.shape[-1]

    def conditional(self, position: int, prev_token: int) -> np.ndarray:
        if self.order == 0:
            return self.probs[position]
        return self.probs[position, prev_token]


def fit_infill(
    corpus: PySequence[Sequence],
    smoothing: float,
    order: int = 1,
    alphabet_size: int | None = None,
) -> InfillModel:
    """Tally token counts over the corpus and smooth at normalization.

    ``alphabet_size`` defaults to the largest token seen plus one; pass it
    explicitly when the corpus might not exercise the whole alphabet.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    toks = np.array([s.tokens for s in corpus])
    length = toks.shape[1]
    size = alphabet_size if alphabet_size is not None else max(int(toks.max()) + 1, 2)
    if toks.size and int(toks.max()) >= size:
        raise ValueError("corpus token exceeds alphabet_size")
    pos = np.broadcast_to(np.arange(length), toks.shape)
    if order == 0:
        counts = np.zeros((length, size), dtype=np.float64)
        np.add.at(counts, (pos, toks), 1.0)
    elif order == 1:
        prev = np.concatenate([np.zeros((toks.shape[0], 1), dtype=toks.dtype), toks[:, :-1]], axis=1)
        counts = np.zeros((length, size, size), dtype=np.float64)
        np.add.at(counts, (pos, prev, toks), 1.0)
    else:
        raise ValueError("order must be 0 or 1")
    return InfillModel(order=order, counts=counts, smoothing=smoothing)


def truncated_poisson_length(lam: float, max_len: int, rng: np.random.Generator) -> int:
    """Poisson(lam) conditioned on [1, max_len] by rejection; falls back to
    max_len after a bounded number of retries."""
    for _ in range(_RETRY_BOUND):
        v = int(rng.poisson(lam))
        if 1 <= v <= max_len:
            return v
    return max_len


def mask_positions(
    seq: Sequence,
    spec: MaskSpec,
    mask: RegionMask,
    rng: np.random.Generator,
) -> tuple[int, ...]:
    """Choose a non-empty set of mutable positions to blank out."""
    mutable = mask.mutable_positions
    if not mutable:
        raise ValueError("mask has no mutable positions")
    if spec.strategy == SPAN:
        chosen: set[int] = set()
        for _ in range(spec.n_spans):
            start = mutable[int(rng.integers(len(mutable)))]
            span_len = truncated_poisson_length(spec.span_lambda, spec.span_max, rng)
            for p in range(start, min(start + span_len, len(seq.tokens))):
                if mask.mutable[p]:
                    chosen.add(p)
        return tuple(sorted(chosen))
    # IID: independent coin per mutable position, redraw while empty
    for _ in range(_RETRY_BOUND):
        draws = rng.random(len(mutable)) < spec.iid_rate
        if draws.any():
            return tuple(p for p, d in zip(mutable, draws) if d)
    raise RuntimeError(f"IID masking produced no positions in {_RETRY_BOUND} retries")


def infill(
    model: InfillModel,
    seq: Sequence,
    positions: PySequence[int],
    rng: np.random.Generator,
    temperature: float = 1.0,
) -> Sequence:
    """Resample the given positions left-to-right from the conditional model.

    Conditioning uses the already-resampled left neighbor. Temperature 0 takes
    the argmax with ties going to the lowest token index.
    """
    toks = list(seq.tokens)
    for p in sorted(set(positions)):
        if not 0 <= p < len(toks):
            raise ValueError(f"position {p} out of range")
        prev = toks[p - 1] if p > 0 else 0
        probs = temperature_scaled(model.conditional(p, prev), temperature)
        toks[p] = draw_categorical(probs, rng) if temperature > 0 else int(np.argmax(probs))
    return Sequence(tuple(toks))


def save_infill(model: InfillModel, path: str, meta: dict | None = None) -> None:
    doc = {
        "format": "ice-infill",
        "version": 1,
        "order": model.order,
        "smoothing": model.smoothing,
        "counts": model.counts.tolist(),
    }
    if meta:
        doc.update(meta)
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_infill(path: str) -> InfillModel:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "ice-infill":
        raise ValueError(f"{path} is not an infill model file")
    return InfillModel(
        order=int(doc["order"]),
        counts=np.array(doc["counts"], dtype=np.float64),
        smoothing=float(doc["smoothing"]),
    )
