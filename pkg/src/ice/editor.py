"""Direction-conditioned local edit model.

The editor is a factorized count model over single-step edits: a distribution
over how many positions change, which positions change, and what each changed
token becomes given the incumbent token, with separate tables per control tag.
It stands in for a fine-tuned sequence-to-sequence model: it trains in
milliseconds, its candidate space is exactly enumerable (so beam search can be
verified against brute force), and it still captures the one property the
editing scheme relies on, direction-conditional edit structure.

A candidate y differing from x at positions {i1..im} has

    log p(y | x, c) = log q_c(m) - log(m!)
                      + sum_i [ log pos_c(i) + log subst_c(y_i | x_i, i) ]

where the ``log(m!)`` term corrects for the unordered position set.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence as PySequence
from weakref import WeakKeyDictionary

import numpy as np

from .pairs import ControlTag, EditPair
from .sampling import draw_categorical, temperature_scaled
from .seqs import RegionMask, Sequence, diff_positions

# Margin added to upper bounds when pruning edit counts in beam search, so
# float summation-order differences can never prune a true top candidate.
_BOUND_EPS = 1e-9


@dataclass(frozen=True, eq=False)
class EditTables:
    """Smoothed count tables for one conditioning value (a tag or a score bin).

    ``position_counts`` is (length,), ``subst_counts`` is (length, size, size)
    indexed [position, old, new] with a zero diagonal, ``edit_count_counts``
    is (max_edits,) indexed by m-1. Normalized probabilities restrict
    positions to the mutable set and substitutions to new != old.
    """

    position_counts: np.ndarray
    subst_counts: np.ndarray
    edit_count_counts: np.ndarray
    mask: RegionMask
    smoothing: float

    def __post_init__(self) -> None:
        length, size = self.subst_counts.shape[0], self.subst_counts.shape[1]
        if self.smoothing <= 0:
            raise ValueError("smoothing must be > 0")
        if self.position_counts.shape != (length,) or len(self.mask) != length:
            raise ValueError("table shape mismatch")
        mut = list(self.mask.mutable_positions)
        if not mut:
            raise ValueError("mask has no mutable positions")
        if any(self.position_counts[i] != 0 for i in self.mask.immutable_positions):
            raise ValueError("position counts on immutable positions")
        diag = np.einsum("iaa->ia", self.subst_counts)
        if np.any(diag != 0):
            raise ValueError("substitution counts on the diagonal (no-op edits)")

        pos_probs = np.zeros(length, dtype=np.float64)
        tot = self.position_counts[mut].sum()
        pos_probs[mut] = (self.position_counts[mut] + self.smoothing) / (
            tot + self.smoothing * len(mut)
        )
        sub_probs = (self.subst_counts + self.smoothing) / (
            self.subst_counts.sum(axis=2, keepdims=True) + self.smoothing * (size - 1)
        )
        sub_probs[:, np.arange(size), np.arange(size)] = 0.0
        cnt = self.edit_count_counts
        cnt_probs = (cnt + self.smoothing) / (cnt.sum() + self.smoothing * len(cnt))
        with np.errstate(divide="ignore"):
            pos_logp = np.log(pos_probs)
            sub_logp = np.log(sub_probs)
            cnt_logp = np.log(cnt_probs)
        for name, arr in (
            ("position_probs", pos_probs),
            ("subst_probs", sub_probs),
            ("edit_count_probs", cnt_probs),
            ("position_logp", pos_logp),
            ("subst_logp", sub_logp),
            ("edit_count_logp", cnt_logp),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for arr in (self.position_counts, self.subst_counts, self.edit_count_counts):
            arr.setflags(write=False)

    @property
    def length(self) -> int:
        return self.subst_counts.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.subst_counts.shape[1]

    @property
    def max_edits(self) -> int:
        return len(self.edit_count_counts)


def accumulate_counts(
    sources: PySequence[Sequence],
    targets: PySequence[Sequence],
    length: int,
    size: int,
    max_edits: int,
    mask: RegionMask,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tally diff positions, substitutions, and diff counts over pair lists."""
    position_counts = np.zeros(length, dtype=np.float64)
    subst_counts = np.zeros((length, size, size), dtype=np.float64)
    edit_count_counts = np.zeros(max_edits, dtype=np.float64)
    if not sources:
        return position_counts, subst_counts, edit_count_counts
    src = np.array([s.tokens for s in sources])
    tgt = np.array([t.tokens for t in targets])
    if src.shape != tgt.shape or src.shape[1] != length:
        raise ValueError("pair shape mismatch")
    neq = src != tgt
    m_per = neq.sum(axis=1)
    if np.any(m_per == 0):
        raise ValueError("pair with zero diffs")
    if np.any(m_per > max_edits):
        raise ValueError(f"pair with {int(m_per.max())} diffs exceeds max_edits={max_edits}")
    rows, cols = np.nonzero(neq)
    immut = np.array([not m for m in mask.mutable])
    if np.any(immut[cols]):
        raise ValueError("pair differs at an immutable position")
    np.add.at(position_counts, cols, 1.0)
    np.add.at(subst_counts, (cols, src[rows, cols], tgt[rows, cols]), 1.0)
    np.add.at(edit_count_counts, m_per - 1, 1.0)
    return position_counts, subst_counts, edit_count_counts


@dataclass(frozen=True, eq=False)
class EditorModel:
    """Per-tag edit tables over a fixed sequence layout."""

    length: int
    alphabet_size: int
    smoothing: float
    max_edits: int
    mask: RegionMask
    inc: EditTables
    dec: EditTables

    def __post_init__(self) -> None:
        if self.max_edits < 1:
            raise ValueError("max_edits must be >= 1")
        if self.max_edits > len(self.mask.mutable_positions):
            raise ValueError("max_edits cannot exceed the number of mutable positions")

    def tables_for(self, tag: ControlTag) -> EditTables:
        return self.inc if tag is ControlTag.INC else self.dec


def fit_editor(
    pairs: PySequence[EditPair],
    smoothing: float,
    max_edits: int,
    mask: RegionMask,
) -> EditorModel:
    """Accumulate per-tag diff statistics and smooth at normalization."""
    if not pairs:
        raise ValueError("no training pairs")
    length = len(pairs[0].source.tokens)
    size = max(max(max(p.source.tokens), max(p.target.tokens)) for p in pairs) + 1
    tables = {}
    for tag in ControlTag:
        tagged = [p for p in pairs if p.tag is tag]
        pc, sc, cc = accumulate_counts(
            [p.source for p in tagged],
            [p.target for p in tagged],
            length,
            size,
            max_edits,
            mask,
        )
        tables[tag] = EditTables(pc, sc, cc, mask=mask, smoothing=smoothing)
    return EditorModel(
        length=length,
        alphabet_size=size,
        smoothing=smoothing,
        max_edits=max_edits,
        mask=mask,
        inc=tables[ControlTag.INC],
        dec=tables[ControlTag.DEC],
    )


def tables_logprob(tables: EditTables, max_edits: int, x: Sequence, y: Sequence) -> float:
    diffs = diff_positions(x, y)
    m = len(diffs)
    if m == 0:
        raise ValueError("candidate equals the input (no-op edits excluded)")
    if m > max_edits:
        raise ValueError(f"candidate has {m} diffs, more than max_edits={max_edits}")
    for i in diffs:
        if not tables.mask.mutable[i]:
            raise ValueError(f"candidate differs at immutable position {i}")
    lp = float(tables.edit_count_logp[m - 1]) - math.lgamma(m + 1)
    for i in diffs:
        lp += float(tables.position_logp[i]) + float(tables.subst_logp[i, x.tokens[i], y.tokens[i]])
    return lp


def candidate_logprob(model: EditorModel, x: Sequence, y: Sequence, tag: ControlTag) -> float:
    """Log probability of the single-step candidate y given x and the tag."""
    if len(x.tokens) != len(y.tokens):
        raise ValueError("length mismatch")
    return tables_logprob(model.tables_for(tag), model.max_edits, x, y)


# ---------------------------------------------------------------------------
# beam search
#
# The enumeration frontier is the top 3*beam_width positions by position
# probability, each expanded with its top 3*beam_width substitutions. Within
# that frontier the top beam_width candidates over all edit counts are found
# exactly: a k-best dynamic program over (frontier position, edit count)
# states, with edit counts whose upper bound cannot reach the current
# beam-width-th best pruned up front. Results are cached per (tables,
# beam_width, incumbent tokens at frontier positions) because the ranking
# only depends on those tokens.

_BEAM_CACHE: "WeakKeyDictionary[EditTables, dict]" = WeakKeyDictionary()


def _frontier(tables: EditTables, limit: int) -> tuple[int, ...]:
    ranked = sorted(tables.mask.mutable_positions, key=lambda i: (-tables.position_logp[i], i))
    return tuple(sorted(ranked[:limit]))


def _beam_edit_sets(
    tables: EditTables,
    max_edits: int,
    beam_width: int,
    x_tokens: tuple[int, ...],
) -> list[tuple[float, tuple[int, ...], tuple[int, ...]]]:
    """Top candidates as (logprob, positions, new_tokens), ranked by
    (logprob desc, positions, new_tokens)."""
    limit = 3 * beam_width
    frontier = _frontier(tables, limit)
    key = (beam_width, max_edits, tuple(x_tokens[i] for i in frontier))
    cache = _BEAM_CACHE.setdefault(tables, {})
    if key in cache:
        return cache[key]

    size = tables.alphabet_size
    options: list[tuple[int, list[tuple[float, int]]]] = []
    for i in frontier:
        a = x_tokens[i]
        row = tables.subst_logp[i, a]
        ranked = sorted(
            ((float(row[b]), b) for b in range(size) if b != a),
            key=lambda gb: (-gb[0], gb[1]),
        )[:limit]
        gains = [(float(tables.position_logp[i]) + lp, b) for lp, b in ranked]
        if gains:
            options.append((i, gains))
    if not options:
        raise ValueError("no valid candidate: every substitution is a no-op")

    max_m = min(max_edits, len(options))
    count_lp = tables.edit_count_logp
    rank_key = lambda c: (-c[0], c[1], c[2])

    # exact single-edit candidates set the pruning threshold
    singles = sorted(
        (
            (float(count_lp[0]) + gain, (i,), (b,))
            for i, gains in options
            for gain, b in gains
        ),
        key=rank_key,
    )
    theta = singles[beam_width - 1][0] if len(singles) >= beam_width else -math.inf

    # upper bound per edit count m: best count term plus the m best
    # per-position gains; counts that cannot reach theta are skipped
    best_per_pos = sorted((max(g for g, _ in gains) for _, gains in options), reverse=True)
    prefix = np.cumsum(best_per_pos)
    m_cap = 1
    for m in range(2, max_m + 1):
        bound = float(count_lp[m - 1]) - math.lgamma(m + 1) + float(prefix[m - 1]) + _BOUND_EPS
        if bound >= theta:
            m_cap = m

    if m_cap == 1:
        result = singles[:beam_width]
    else:
        # k-best DP over (processed positions, edit count): levels[m] keeps
        # the top beam_width partial edit sets of size m seen so far
        levels: list[list[tuple[float, tuple[int, ...], tuple[int, ...]]]] = [
            [(0.0, (), ())]
        ] + [[] for _ in range(m_cap)]
        gain_of = {
            (i, b): gain for i, gains in options for gain, b in gains
        }
        for i, gains in options:
            for m in range(m_cap - 1, -1, -1):
                if not levels[m]:
                    continue
                extended = [
                    (score + gain, poss + (i,), toks + (b,))
                    for score, poss, toks in levels[m]
                    for gain, b in gains
                ]
                merged = levels[m + 1] + extended
                merged.sort(key=rank_key)
                levels[m + 1] = merged[:beam_width]
        # recompute totals with the same accumulation order candidate_logprob
        # uses, so reported scores match it bit for bit
        finals = []
        for m in range(1, m_cap + 1):
            for _, poss, toks in levels[m]:
                total = float(count_lp[m - 1]) - math.lgamma(m + 1)
                for i, b in zip(poss, toks):
                    total += gain_of[(i, b)]
                finals.append((total, poss, toks))
        finals.sort(key=rank_key)
        result = finals[:beam_width]

    cache[key] = result
    return result


def _apply_edit_set(x: Sequence, positions: tuple[int, ...], tokens: tuple[int, ...]) -> Sequence:
    toks = list(x.tokens)
    for i, b in zip(positions, tokens):
        toks[i] = b
    return Sequence(tuple(toks))


def beam_step(
    model: EditorModel,
    x: Sequence,
    tag: ControlTag,
    beam_width: int,
) -> list[tuple[Sequence, float]]:
    """Exact top-beam_width single-step candidates within the enumeration
    frontier, ranked by logprob with lexicographic (positions, tokens)
    tie-breaks."""
    if beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    tables = model.tables_for(tag)
    ranked = _beam_edit_sets(tables, model.max_edits, beam_width, x.tokens)
    return [(_apply_edit_set(x, poss, toks), lp) for lp, poss, toks in ranked]


def sample_one(
    tables: EditTables,
    x: Sequence,
    temperature: float,
    rng: np.random.Generator,
) -> Sequence:
    """One candidate: draw the edit count, then positions without replacement,
    then substitutions, all from temperature-scaled tables."""
    m = draw_categorical(temperature_scaled(tables.edit_count_probs, temperature), rng) + 1
    working = tables.position_probs.copy()
    chosen: list[int] = []
    for _ in range(m):
        p = draw_categorical(temperature_scaled(working, temperature), rng)
        chosen.append(p)
        working[p] = 0.0
    toks = list(x.tokens)
    for p in chosen:
        toks[p] = draw_categorical(temperature_scaled(tables.subst_probs[p, x.tokens[p]], temperature), rng)
    return Sequence(tuple(toks))


def sample_step(
    model: EditorModel,
    x: Sequence,
    tag: ControlTag,
    k: int,
    temperature: float,
    rng: np.random.Generator,
) -> list[Sequence]:
    """k i.i.d. sampled candidates; duplicates allowed."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    tables = model.tables_for(tag)
    return [sample_one(tables, x, temperature, rng) for _ in range(k)]


# ---------------------------------------------------------------------------
# serialization


def _tables_doc(t: EditTables) -> dict:
    return {
        "position_counts": t.position_counts.tolist(),
        "subst_counts": t.subst_counts.tolist(),
        "edit_count_counts": t.edit_count_counts.tolist(),
    }


def _tables_from_doc(doc: dict, mask: RegionMask, smoothing: float) -> EditTables:
    return EditTables(
        position_counts=np.array(doc["position_counts"], dtype=np.float64),
        subst_counts=np.array(doc["subst_counts"], dtype=np.float64),
        edit_count_counts=np.array(doc["edit_count_counts"], dtype=np.float64),
        mask=mask,
        smoothing=smoothing,
    )


def save_editor(model: EditorModel, path: str, meta: dict | None = None) -> None:
    doc = {
        "format": "ice-editor",
        "version": 1,
        "length": model.length,
        "alphabet_size": model.alphabet_size,
        "smoothing": model.smoothing,
        "max_edits": model.max_edits,
        "mutable": [bool(m) for m in model.mask.mutable],
        "inc": _tables_doc(model.inc),
        "dec": _tables_doc(model.dec),
    }
    if meta:
        doc.update(meta)
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_editor(path: str) -> EditorModel:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "ice-editor":
        raise ValueError(f"{path} is not an editor file")
    mask = RegionMask(tuple(bool(m) for m in doc["mutable"]))
    smoothing = float(doc["smoothing"])
    return EditorModel(
        length=int(doc["length"]),
        alphabet_size=int(doc["alphabet_size"]),
        smoothing=smoothing,
        max_edits=int(doc["max_edits"]),
        mask=mask,
        inc=_tables_from_doc(doc["inc"], mask, smoothing),
        dec=_tables_from_doc(doc["dec"], mask, smoothing),
    )
