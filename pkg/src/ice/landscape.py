"""Seeded synthetic attribute landscapes and region-restricted data splits.

A landscape is an exact, deterministic ground-truth function over fixed-length
token sequences: a per-(position, token) additive table plus pairwise
epistatic tables on a sparse set of position pairs. The epistatic part is what
a one-hot linear surrogate cannot represent, so it controls how unreliable the
surrogate becomes outside the training region.

The landscape plays the role of the evaluation oracle. Supervised splits are
restricted to an attribute-value region [low, high] so that everything trained
downstream only ever sees a slice of the landscape's range.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Iterable, Sequence as PySequence

import numpy as np

from .seeds import make_rng
from .seqs import Alphabet, RegionMask, Sequence, seq_from_text, seq_to_text


@dataclass(frozen=True, eq=False)
class Landscape:
    """Additive + pairwise-epistatic attribute function.

    ``additive`` has shape (length, alphabet_size); ``epistatic`` has shape
    (n_pairs, alphabet_size, alphabet_size) with one table per entry of
    ``pair_sites`` (distinct position pairs, i < j).
    """

    additive: np.ndarray
    pair_sites: tuple[tuple[int, int], ...]
    epistatic: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        self.additive.setflags(write=False)
        self.epistatic.setflags(write=False)
        if not np.all(np.isfinite(self.additive)) or not np.all(np.isfinite(self.epistatic)):
            raise ValueError("landscape weights must be finite")
        for i, j in self.pair_sites:
            if not (0 <= i < j < self.length):
                raise ValueError(f"bad pair site ({i}, {j})")
        if len(set(self.pair_sites)) != len(self.pair_sites):
            raise ValueError("pair sites must be distinct")

    @property
    def length(self) -> int:
        return self.additive.shape[0]

    @property
    def alphabet_size(self) -> int:
        return self.additive.shape[1]


def make_landscape(
    length: int,
    alphabet_size: int,
    n_pairs: int,
    additive_scale: float,
    epistatic_scale: float,
    seed: int,
) -> Landscape:
    """Draw a landscape from zero-mean Gaussians; same seed, same weights.

    Draw order is fixed (additive table, pair-site choice, epistatic tables)
    so the result is a pure function of the arguments.
    """
    if length < 1 or alphabet_size < 2:
        raise ValueError("length must be >= 1 and alphabet_size >= 2")
    max_pairs = length * (length - 1) // 2
    if not 0 <= n_pairs <= max_pairs:
        raise ValueError(f"n_pairs must be in [0, {max_pairs}], got {n_pairs}")
    if additive_scale < 0 or epistatic_scale < 0:
        raise ValueError("scales must be non-negative")
    rng = make_rng(seed)
    additive = rng.normal(0.0, additive_scale, size=(length, alphabet_size)) if additive_scale > 0 else np.zeros((length, alphabet_size))
    all_pairs = [(i, j) for i in range(length) for j in range(i + 1, length)]
    chosen = rng.choice(len(all_pairs), size=n_pairs, replace=False) if n_pairs else np.array([], dtype=int)
    pair_sites = tuple(sorted(all_pairs[int(c)] for c in chosen))
    epistatic = (
        rng.normal(0.0, epistatic_scale, size=(n_pairs, alphabet_size, alphabet_size))
        if n_pairs and epistatic_scale > 0
        else np.zeros((n_pairs, alphabet_size, alphabet_size))
    )
    return Landscape(additive=additive, pair_sites=pair_sites, epistatic=epistatic, seed=seed)


def landscape_checksum(landscape: Landscape) -> str:
    """SHA-256 over the canonical little-endian float64 weight bytes."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(landscape.additive, dtype="<f8").tobytes())
    h.update(json.dumps(landscape.pair_sites).encode())
    h.update(np.ascontiguousarray(landscape.epistatic, dtype="<f8").tobytes())
    return h.hexdigest()


def oracle_scores(landscape: Landscape, tokens: np.ndarray) -> np.ndarray:
    """Exact attribute values for a (n, length) int token matrix."""
    tokens = np.asarray(tokens)
    if tokens.ndim != 2 or tokens.shape[1] != landscape.length:
        raise ValueError(f"token matrix must be (n, {landscape.length})")
    pos = np.arange(landscape.length)
    z = landscape.additive[pos, tokens].sum(axis=1)
    for p, (i, j) in enumerate(landscape.pair_sites):
        z = z + landscape.epistatic[p][tokens[:, i], tokens[:, j]]
    return z


def oracle_score(landscape: Landscape, seq: Sequence) -> float:
    """Exact attribute value of one sequence (bit-identical to the batch path)."""
    if len(seq.tokens) != landscape.length:
        raise ValueError(f"sequence length {len(seq.tokens)} != landscape length {landscape.length}")
    return float(oracle_scores(landscape, np.array([seq.tokens]))[0])


@dataclass(frozen=True)
class Region:
    """Closed attribute-value interval [low, high] covered by supervision."""

    low: float
    high: float

    def __post_init__(self) -> None:
        if not self.low < self.high:
            raise ValueError(f"region needs low < high, got [{self.low}, {self.high}]")

    def contains(self, z: float) -> bool:
        return self.low <= z <= self.high


@dataclass(frozen=True)
class LabeledExample:
    seq: Sequence
    z: float


@dataclass(frozen=True)
class DatasetSplit:
    unsup: tuple[Sequence, ...]
    sup_train: tuple[LabeledExample, ...]
    region: Region


def sample_corpus(
    landscape: Landscape,
    m: int,
    seed: int,
    mask: RegionMask,
    reference: Sequence,
) -> tuple[Sequence, ...]:
    """Draw m sequences: mutable positions i.i.d. uniform, immutables copied
    from the reference."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if len(reference.tokens) != landscape.length or len(mask) != landscape.length:
        raise ValueError("reference/mask length mismatch with landscape")
    rng = make_rng(seed)
    toks = rng.integers(0, landscape.alphabet_size, size=(m, landscape.length), dtype=np.int64)
    for i in mask.immutable_positions:
        toks[:, i] = reference.tokens[i]
    return tuple(Sequence(tuple(int(t) for t in row)) for row in toks)


def build_supervised_split(
    corpus: PySequence[Sequence],
    landscape: Landscape,
    region: Region,
    m_sup: int,
    label_noise_std: float = 0.0,
    noise_seed: int = 0,
) -> DatasetSplit:
    """First m_sup corpus members whose (optionally noised) label is in-region.

    Labels are exact oracle scores by default; with label noise the observed
    label is used both for the region filter and as the stored z, so every
    retained example still satisfies the region bounds.
    """
    if not corpus:
        raise ValueError("corpus is empty")
    if m_sup < 1:
        raise ValueError("m_sup must be >= 1")
    toks = np.array([s.tokens for s in corpus])
    labels = oracle_scores(landscape, toks)
    if label_noise_std > 0:
        labels = labels + make_rng(noise_seed).normal(0.0, label_noise_std, size=len(labels))
    sup: list[LabeledExample] = []
    for seq, z in zip(corpus, labels):
        if region.contains(float(z)):
            sup.append(LabeledExample(seq, float(z)))
            if len(sup) == m_sup:
                break
    if len(sup) < m_sup:
        raise ValueError(
            f"only {len(sup)} in-region sequences available, need {m_sup} "
            f"(region [{region.low}, {region.high}])"
        )
    return DatasetSplit(unsup=tuple(corpus), sup_train=tuple(sup), region=region)


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with ties replaced by the mean rank of the tied run."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        ranks[order[i : j + 1]] = avg
        i = j + 1
    return ranks


def spearman(xs: PySequence[float], ys: PySequence[float]) -> float | None:
    """Rank correlation with average ranks for ties; None if undefined."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError("length mismatch")
    if len(x) < 2:
        raise ValueError("need at least 2 points")
    if np.all(x == x[0]) or np.all(y == y[0]):
        return None
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


# ---------------------------------------------------------------------------
# file formats


def save_landscape(landscape: Landscape, path: str, meta: dict | None = None) -> None:
    doc = {
        "format": "ice-landscape",
        "version": 1,
        "seed": landscape.seed,
        "length": landscape.length,
        "alphabet_size": landscape.alphabet_size,
        "additive": landscape.additive.tolist(),
        "pair_sites": [list(p) for p in landscape.pair_sites],
        "epistatic": landscape.epistatic.tolist(),
    }
    if meta:
        doc.update(meta)
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_landscape(path: str) -> Landscape:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != "ice-landscape":
        raise ValueError(f"{path} is not a landscape file")
    n_pairs = len(doc["pair_sites"])
    epi = np.array(doc["epistatic"], dtype=np.float64)
    if n_pairs == 0:
        epi = np.zeros((0, doc["alphabet_size"], doc["alphabet_size"]))
    return Landscape(
        additive=np.array(doc["additive"], dtype=np.float64),
        pair_sites=tuple((int(i), int(j)) for i, j in doc["pair_sites"]),
        epistatic=epi,
        seed=int(doc["seed"]),
    )


def write_sequences(path: str, seqs: Iterable[Sequence], alphabet: Alphabet, comments: PySequence[str] = ()) -> None:
    """One sequence per line in symbol form; '#' lines carry metadata."""
    with open(path, "w") as f:
        for c in comments:
            f.write(f"# {c}\n")
        for s in seqs:
            f.write(seq_to_text(s, alphabet))
            f.write("\n")


def read_sequences(path: str, alphabet: Alphabet) -> tuple[Sequence, ...]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            out.append(seq_from_text(line, alphabet))
    return tuple(out)


def write_labeled(path: str, examples: Iterable[LabeledExample], alphabet: Alphabet, comments: PySequence[str] = ()) -> None:
    """Tab-separated ``sequence<TAB>score`` lines; scores use repr for exact round-trip."""
    with open(path, "w") as f:
        for c in comments:
            f.write(f"# {c}\n")
        for ex in examples:
            f.write(f"{seq_to_text(ex.seq, alphabet)}\t{ex.z!r}\n")


def read_labeled(path: str, alphabet: Alphabet) -> tuple[LabeledExample, ...]:
    out = []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            text, score = line.split("\t")
            out.append(LabeledExample(seq_from_text(text, alphabet), float(score)))
    return tuple(out)
