"""Directed edit-pair synthesis for editor training.

Training-region sequences are perturbed by mask-and-infill; a perturbation is
kept only when the surrogate scorer moves by a nonzero amount smaller than
``delta``. Every kept perturbation yields both directed examples, one tagged
INC (lower-scored to higher-scored) and one tagged DEC, so the emitted corpus
is direction-balanced by construction. All scores here are surrogate scores,
never oracle values.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence as PySequence

import numpy as np

from .landscape import DatasetSplit
from .proposer import InfillModel, MaskSpec, infill, mask_positions
from .scorer import ScorerModel, predict_tokens
from .seqs import Alphabet, RegionMask, Sequence, seq_from_text, seq_to_text


class ControlTag(Enum):
    INC = "inc"
    DEC = "dec"


@dataclass(frozen=True)
class EditPair:
    """Directed training example: edit ``source`` into ``target`` under ``tag``."""

    tag: ControlTag
    source: Sequence
    target: Sequence
    source_score: float
    target_score: float

    def __post_init__(self) -> None:
        if self.source == self.target:
            raise ValueError("source and target must differ")
        if self.tag is ControlTag.INC and not self.target_score > self.source_score:
            raise ValueError("INC pair must have target_score > source_score")
        if self.tag is ControlTag.DEC and not self.target_score < self.source_score:
            raise ValueError("DEC pair must have target_score < source_score")


def label(x_score: float, y_score: float) -> ControlTag | None:
    """Direction tag for editing x into y; None means drop (exact tie)."""
    if y_score > x_score:
        return ControlTag.INC
    if y_score < x_score:
        return ControlTag.DEC
    return None


@dataclass(frozen=True)
class PairGenResult:
    pairs: tuple[EditPair, ...]
    attempts: int
    accepted: int

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0


class PairGenError(RuntimeError):
    def __init__(self, message: str, attempts: int, accepted: int):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted


ATTEMPT_CAP_FACTOR = 100


def make_pairs(
    split: DatasetSplit,
    infill_model: InfillModel,
    spec: MaskSpec,
    scorer: ScorerModel,
    delta: float,
    n_pairs: int,
    rng: np.random.Generator,
    mask: RegionMask,
) -> PairGenResult:
    """Emit ``n_pairs`` directed pairs (both directions per kept perturbation).

    A perturbation x~ of x is kept iff ``0 < |f(x~) - f(x)| < delta`` under the
    surrogate scorer. Stops with PairGenError once ``100 * n_pairs`` attempts
    have been spent, reporting the acceptance rate so far.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    if n_pairs % 2 != 0:
        raise ValueError("n_pairs must be even: each kept perturbation emits both directions")
    sup = split.sup_train
    if not sup:
        raise ValueError("supervised split is empty")
    source_scores = predict_tokens(scorer, np.array([ex.seq.tokens for ex in sup]))
    cap = ATTEMPT_CAP_FACTOR * n_pairs
    pairs: list[EditPair] = []
    attempts = 0
    accepted = 0
    while len(pairs) < n_pairs:
        if attempts >= cap:
            raise PairGenError(
                f"attempt cap {cap} reached with {len(pairs)}/{n_pairs} pairs "
                f"(acceptance rate {accepted / attempts:.4f})",
                attempts=attempts,
                accepted=accepted,
            )
        attempts += 1
        idx = int(rng.integers(len(sup)))
        x = sup[idx].seq
        fx = float(source_scores[idx])
        positions = mask_positions(x, spec, mask, rng)
        y = infill(infill_model, x, positions, rng, temperature=1.0)
        if y == x:
            continue
        fy = float(predict_tokens(scorer, np.array([y.tokens]))[0])
        d = abs(fy - fx)
        if not 0.0 < d < delta:
            continue
        accepted += 1
        if fy > fx:
            lo, hi = (x, fx), (y, fy)
        else:
            lo, hi = (y, fy), (x, fx)
        pairs.append(EditPair(ControlTag.INC, lo[0], hi[0], lo[1], hi[1]))
        pairs.append(EditPair(ControlTag.DEC, hi[0], lo[0], hi[1], lo[1]))
    return PairGenResult(pairs=tuple(pairs), attempts=attempts, accepted=accepted)


def write_pairs(path: str, pairs: PySequence[EditPair], alphabet: Alphabet, comments: PySequence[str] = ()) -> None:
    """Tab-separated ``tag source target source_score target_score`` lines."""
    with open(path, "w") as f:
        for c in comments:
            f.write(f"# {c}\n")
        for p in pairs:
            f.write(
                f"{p.tag.value}\t{seq_to_text(p.source, alphabet)}\t{seq_to_text(p.target, alphabet)}"
                f"\t{p.source_score!r}\t{p.target_score!r}\n"
            )


def read_pairs(path: str, alphabet: Alphabet) -> tuple[EditPair, ...]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            tag, src, tgt, fs, ft = line.split("\t")
            out.append(
                EditPair(
                    tag=ControlTag(tag),
                    source=seq_from_text(src, alphabet),
                    target=seq_from_text(tgt, alphabet),
                    source_score=float(fs),
                    target_score=float(ft),
                )
            )
    return tuple(out)
