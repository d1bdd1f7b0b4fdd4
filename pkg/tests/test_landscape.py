import itertools

import numpy as np
import pytest

from ice.landscape import (
    LabeledExample,
    Landscape,
    Region,
    build_supervised_split,
    landscape_checksum,
    load_landscape,
    make_landscape,
    oracle_score,
    oracle_scores,
    read_labeled,
    read_sequences,
    sample_corpus,
    save_landscape,
    spearman,
    write_labeled,
    write_sequences,
)
from ice.seqs import Alphabet, RegionMask, Sequence

# Pinned on the first run of make_landscape(20, 8, 20, 1.0, 0.5, seed=42);
# any change to the draw order or RNG breaks this on purpose.
GOLDEN_SEED42_CHECKSUM = "66d1f7a84b18b02ec3b4cca8540a9b2a2ad48bc39a1476307549f59cad9c9edb"


def test_zero_scales_score_zero():
    ls = make_landscape(6, 3, 4, 0.0, 0.0, seed=1)
    assert oracle_score(ls, Sequence((0, 1, 2, 0, 1, 2))) == 0.0


def test_same_seed_identical_weights():
    a = make_landscape(8, 4, 5, 1.0, 0.5, seed=9)
    b = make_landscape(8, 4, 5, 1.0, 0.5, seed=9)
    assert np.array_equal(a.additive, b.additive)
    assert a.pair_sites == b.pair_sites
    assert np.array_equal(a.epistatic, b.epistatic)
    c = make_landscape(8, 4, 5, 1.0, 0.5, seed=10)
    assert not np.array_equal(a.additive, c.additive)


def test_golden_seed_checksum_pinned():
    ls = make_landscape(20, 8, 20, 1.0, 0.5, seed=42)
    assert landscape_checksum(ls) == GOLDEN_SEED42_CHECKSUM


def test_invalid_shapes_rejected():
    with pytest.raises(ValueError):
        make_landscape(4, 3, 7, 1.0, 1.0, seed=0)  # > C(4,2)
    with pytest.raises(ValueError):
        make_landscape(0, 3, 0, 1.0, 1.0, seed=0)
    with pytest.raises(ValueError):
        make_landscape(4, 1, 0, 1.0, 1.0, seed=0)


def test_single_additive_weight_forces_score():
    additive = np.zeros((4, 3))
    additive[0, 1] = 1.5
    ls = Landscape(additive=additive, pair_sites=(), epistatic=np.zeros((0, 3, 3)), seed=0)
    assert oracle_score(ls, Sequence((1, 0, 0, 0))) == 1.5
    assert oracle_score(ls, Sequence((0, 0, 0, 0))) == 0.0


def test_oracle_max_matches_full_enumeration():
    ls = make_landscape(4, 3, 3, 1.0, 0.8, seed=5)
    best = max(
        oracle_score(ls, Sequence(t)) for t in itertools.product(range(3), repeat=4)
    )
    toks = np.array(list(itertools.product(range(3), repeat=4)))
    assert np.isclose(oracle_scores(ls, toks).max(), best)
    assert len(toks) == 81


def test_oracle_score_deterministic_and_pure():
    ls = make_landscape(10, 5, 8, 1.0, 0.3, seed=3)
    s = Sequence((0, 1, 2, 3, 4, 0, 1, 2, 3, 4))
    assert oracle_score(ls, s) == oracle_score(ls, s)


def test_oracle_length_mismatch():
    ls = make_landscape(5, 3, 2, 1.0, 0.5, seed=2)
    with pytest.raises(ValueError):
        oracle_score(ls, Sequence((0, 1)))


def test_sample_corpus_all_immutable_returns_reference():
    ls = make_landscape(5, 3, 2, 1.0, 0.5, seed=2)
    ref = Sequence((2, 1, 0, 1, 2))
    mask = RegionMask((False,) * 5)
    corpus = sample_corpus(ls, 1, seed=7, mask=mask, reference=ref)
    assert corpus == (ref,)


def test_sample_corpus_deterministic():
    ls = make_landscape(5, 3, 2, 1.0, 0.5, seed=2)
    ref = Sequence((0, 0, 0, 0, 0))
    mask = RegionMask.all_mutable(5)
    a = sample_corpus(ls, 100, seed=7, mask=mask, reference=ref)
    b = sample_corpus(ls, 100, seed=7, mask=mask, reference=ref)
    assert a == b


def test_sample_corpus_near_uniform_frequencies():
    ls = make_landscape(8, 8, 0, 1.0, 0.0, seed=1)
    ref = Sequence((0,) * 8)
    mask = RegionMask.all_mutable(8)
    corpus = sample_corpus(ls, 1000, seed=11, mask=mask, reference=ref)
    toks = np.array([s.tokens for s in corpus])
    for pos in range(8):
        freqs = np.bincount(toks[:, pos], minlength=8) / 1000
        assert np.all(np.abs(freqs - 1 / 8) < 0.05)


def test_sample_corpus_preserves_immutables():
    ls = make_landscape(6, 4, 3, 1.0, 0.5, seed=4)
    ref = Sequence((3, 2, 1, 0, 3, 2))
    mask = RegionMask.with_immutable_span(6, 1, 4)
    for s in sample_corpus(ls, 200, seed=5, mask=mask, reference=ref):
        assert s.tokens[1:4] == ref.tokens[1:4]


def test_split_wide_region_takes_first_m():
    ls = make_landscape(6, 4, 3, 1.0, 0.5, seed=4)
    ref = Sequence((0,) * 6)
    mask = RegionMask.all_mutable(6)
    corpus = sample_corpus(ls, 50, seed=5, mask=mask, reference=ref)
    split = build_supervised_split(corpus, ls, Region(-1e9, 1e9), 10)
    assert [ex.seq for ex in split.sup_train] == list(corpus[:10])
    for ex in split.sup_train:
        assert ex.z == oracle_score(ls, ex.seq)
    assert split.unsup == corpus


def test_split_percentile_region_labels_verified():
    ls = make_landscape(8, 4, 6, 1.0, 0.5, seed=6)
    ref = Sequence((0,) * 8)
    mask = RegionMask.all_mutable(8)
    corpus = sample_corpus(ls, 400, seed=8, mask=mask, reference=ref)
    scores = oracle_scores(ls, np.array([s.tokens for s in corpus]))
    region = Region(float(np.percentile(scores, 20)), float(np.percentile(scores, 80)))
    split = build_supervised_split(corpus, ls, region, 100)
    for ex in split.sup_train:
        assert region.low <= ex.z <= region.high
        assert ex.z == oracle_score(ls, ex.seq)


def test_split_empty_region_errors():
    ls = make_landscape(6, 4, 3, 1.0, 0.5, seed=4)
    ref = Sequence((0,) * 6)
    corpus = sample_corpus(ls, 20, seed=5, mask=RegionMask.all_mutable(6), reference=ref)
    with pytest.raises(ValueError, match="in-region"):
        build_supervised_split(corpus, ls, Region(1e8, 1e9), 5)


def rank_by_sorting(values):
    """Brute-force average ranks: enumerate sorted slots, average ties."""
    slots = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(slots):
        j = i
        while j + 1 < len(slots) and values[slots[j + 1]] == values[slots[i]]:
            j += 1
        for s in slots[i : j + 1]:
            ranks[s] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def pearson(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a = a - a.mean()
    b = b - b.mean()
    return float((a * b).sum() / np.sqrt((a * a).sum() * (b * b).sum()))


def test_spearman_perfect_and_reversed():
    xs = [3.0, 1.0, 4.0, 1.5, 9.0]
    assert spearman(xs, xs) == pytest.approx(1.0)
    assert spearman(xs, [-v for v in xs]) == pytest.approx(-1.0)


def test_spearman_with_tie_matches_rank_oracle():
    xs = [1.0, 2.0, 2.0, 3.0, 0.5, 7.0, -1.0, 4.0, 4.0, 4.0]
    ys = [0.3, 1.1, 0.9, 2.0, 0.2, 3.5, -0.5, 2.2, 2.1, 5.0]
    expected = pearson(rank_by_sorting(xs), rank_by_sorting(ys))
    assert spearman(xs, ys) == pytest.approx(expected, abs=1e-12)


def test_spearman_errors_and_undefined():
    with pytest.raises(ValueError):
        spearman([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        spearman([1.0], [1.0])
    assert spearman([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None


def test_landscape_file_round_trip(tmp_path):
    ls = make_landscape(7, 4, 5, 1.0, 0.5, seed=13)
    path = tmp_path / "ls.json"
    save_landscape(ls, str(path))
    again = load_landscape(str(path))
    assert np.array_equal(ls.additive, again.additive)
    assert ls.pair_sites == again.pair_sites
    assert np.array_equal(ls.epistatic, again.epistatic)
    assert landscape_checksum(ls) == landscape_checksum(again)


def test_sequence_and_labeled_file_round_trip(tmp_path):
    ab = Alphabet.of_size(4)
    seqs = (Sequence((0, 1, 2, 3)), Sequence((3, 2, 1, 0)))
    write_sequences(str(tmp_path / "s.txt"), seqs, ab, comments=["config_hash=abc"])
    assert read_sequences(str(tmp_path / "s.txt"), ab) == seqs
    examples = (LabeledExample(seqs[0], 1.25), LabeledExample(seqs[1], -0.1 + 0.3))
    write_labeled(str(tmp_path / "l.tsv"), examples, ab)
    back = read_labeled(str(tmp_path / "l.tsv"), ab)
    assert back == examples  # exact float round-trip via repr
