"""Fixed-length token sequences over a small alphabet.

Sequences are immutable tuples of token indices. A RegionMask marks which
positions may be edited; everything downstream (masking, infilling, editing)
must leave the immutable positions untouched.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

DEFAULT_SYMBOLS = "ABCDEFGH"


@dataclass(frozen=True)
class Alphabet:
    """Ordered collection of distinct single-character symbols.

    The symbol's index in ``symbols`` is its token id, so the mapping between
    symbols and token ids is a bijection by construction.
    """

    symbols: tuple[str, ...] = tuple(DEFAULT_SYMBOLS)

    def __post_init__(self) -> None:
        if len(self.symbols) < 2:
            raise ValueError("alphabet needs at least 2 symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        for s in self.symbols:
            if not (isinstance(s, str) and len(s) == 1):
                raise ValueError(f"alphabet symbols must be single characters, got {s!r}")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index_of(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValueError(f"symbol {symbol!r} not in alphabet") from None

    @classmethod
    def of_size(cls, size: int) -> "Alphabet":
        if not 2 <= size <= 26:
            raise ValueError("default alphabets use uppercase letters, size must be in [2, 26]")
        return cls(tuple(chr(ord("A") + i) for i in range(size)))


@dataclass(frozen=True, order=True)
class Sequence:
    """A fixed-length sequence of token indices.

    Ordering is lexicographic on the token tuple, which is the tie-break
    order used throughout candidate ranking.
    """

    tokens: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.tokens)


def seq_to_text(seq: Sequence, alphabet: Alphabet) -> str:
    return "".join(alphabet.symbols[t] for t in seq.tokens)


def seq_from_text(text: str, alphabet: Alphabet) -> Sequence:
    return Sequence(tuple(alphabet.index_of(ch) for ch in text))


@dataclass(frozen=True)
class RegionMask:
    """Per-position mutability flags.

    Construction allows an all-immutable mask (corpus sampling uses one to
    replicate a reference); operations that need something to edit check for
    at least one mutable position themselves.
    """

    mutable: tuple[bool, ...]

    @cached_property
    def mutable_positions(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.mutable) if m)

    @cached_property
    def immutable_positions(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.mutable) if not m)

    def __len__(self) -> int:
        return len(self.mutable)

    @classmethod
    def all_mutable(cls, length: int) -> "RegionMask":
        return cls((True,) * length)

    @classmethod
    def with_immutable_span(cls, length: int, start: int, stop: int) -> "RegionMask":
        """Mask with one contiguous immutable span [start, stop)."""
        if not (0 <= start <= stop <= length):
            raise ValueError(f"immutable span [{start}, {stop}) out of range for length {length}")
        return cls(tuple(not (start <= i < stop) for i in range(length)))


@dataclass(frozen=True)
class Edit:
    """Substitute ``new_token`` at ``position``; must actually change the token."""

    position: int
    new_token: int


def validate_sequence(seq: Sequence, alphabet: Alphabet, expected_len: int) -> str | None:
    """Return None if valid, else a description naming the first violation."""
    if len(seq.tokens) != expected_len:
        return f"length violation: got {len(seq.tokens)}, expected {expected_len}"
    for i, t in enumerate(seq.tokens):
        if not (0 <= t < alphabet.size):
            return f"range violation at position {i}: token {t} not in [0, {alphabet.size})"
    return None


def apply_edits(seq: Sequence, edits: Iterable[Edit], mask: RegionMask) -> Sequence:
    """Apply substitution edits, leaving the input untouched.

    Raises ValueError on edits at immutable positions, duplicate positions,
    out-of-range positions, or no-op edits.
    """
    tokens = list(seq.tokens)
    seen: set[int] = set()
    for e in edits:
        if not (0 <= e.position < len(tokens)):
            raise ValueError(f"edit position {e.position} out of range")
        if e.position in seen:
            raise ValueError(f"duplicate edit position {e.position}")
        if not mask.mutable[e.position]:
            raise ValueError(f"edit at immutable position {e.position}")
        if e.new_token == tokens[e.position]:
            raise ValueError(f"no-op edit at position {e.position}")
        seen.add(e.position)
        tokens[e.position] = e.new_token
    return Sequence(tuple(tokens))


def diff_positions(a: Sequence, b: Sequence) -> tuple[int, ...]:
    """Positions where two equal-length sequences differ."""
    if len(a.tokens) != len(b.tokens):
        raise ValueError("diff_positions requires equal lengths")
    return tuple(i for i, (x, y) in enumerate(zip(a.tokens, b.tokens)) if x != y)


def hamming(a: Sequence, b: Sequence) -> int:
    return len(diff_positions(a, b))


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance (substitution/insertion/deletion), two-row DP."""
    s, t = a.tokens, b.tokens
    if len(s) < len(t):
        s, t = t, s
    if not t:
        return len(s)
    prev = list(range(len(t) + 1))
    for i, sc in enumerate(s, start=1):
        cur = [i] + [0] * len(t)
        for j, tc in enumerate(t, start=1):
            cost = 0 if sc == tc else 1
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost)
        prev = cur
    return prev[-1]
