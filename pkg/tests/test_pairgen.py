import numpy as np
import pytest

from ice.landscape import (
    LabeledExample,
    Region,
    build_supervised_split,
    make_landscape,
    oracle_scores,
    sample_corpus,
)
from ice.pairs import (
    ControlTag,
    EditPair,
    PairGenError,
    label,
    make_pairs,
    read_pairs,
    write_pairs,
)
from ice.proposer import MaskSpec, fit_infill
from ice.scorer import fit_ridge, predict
from ice.seeds import make_rng
from ice.seqs import Alphabet, RegionMask, Sequence, diff_positions

# Pinned from the first run of the fixture below (seed 42 everywhere);
# guards the determinism of the whole perturb-filter-emit path.
GOLDEN_ACCEPT_RATE = 0.5847953216374269


@pytest.fixture(scope="module")
def small_campaign():
    ls = make_landscape(12, 6, 10, 1.0, 0.5, seed=42)
    mask = RegionMask.with_immutable_span(12, 4, 7)
    ref = Sequence((0,) * 12)
    corpus = sample_corpus(ls, 3000, seed=42, mask=mask, reference=ref)
    scores = oracle_scores(ls, np.array([s.tokens for s in corpus]))
    region = Region(float(np.percentile(scores, 1)), float(np.percentile(scores, 80)))
    split = build_supervised_split(corpus, ls, region, 800)
    scorer = fit_ridge(split.sup_train, 1.0, alphabet_size=6)
    infill_model = fit_infill(corpus, smoothing=1.0, order=1, alphabet_size=6)
    return ls, mask, split, scorer, infill_model


def test_label_trivial_cases():
    assert label(1.0, 2.0) is ControlTag.INC
    assert label(2.0, 1.0) is ControlTag.DEC
    assert label(1.0, 1.0) is None  # exact ties are dropped


def test_edit_pair_validation():
    a, b = Sequence((0, 1)), Sequence((1, 1))
    with pytest.raises(ValueError):
        EditPair(ControlTag.INC, a, a, 0.0, 1.0)
    with pytest.raises(ValueError):
        EditPair(ControlTag.INC, a, b, 2.0, 1.0)
    with pytest.raises(ValueError):
        EditPair(ControlTag.DEC, a, b, 1.0, 2.0)


def test_make_pairs_delta_zero_hits_cap(small_campaign):
    _, mask, split, scorer, infill_model = small_campaign
    with pytest.raises(PairGenError):
        make_pairs(
            split, infill_model, MaskSpec(span_lambda=3, span_max=4), scorer,
            delta=0.0, n_pairs=4, rng=make_rng(1), mask=mask,
        )


def test_make_pairs_odd_count_rejected(small_campaign):
    _, mask, split, scorer, infill_model = small_campaign
    with pytest.raises(ValueError, match="even"):
        make_pairs(
            split, infill_model, MaskSpec(), scorer,
            delta=1.5, n_pairs=5, rng=make_rng(1), mask=mask,
        )


def test_make_pairs_audit_filter_tags_balance(small_campaign):
    _, mask, split, scorer, infill_model = small_campaign
    delta = 1.5
    spec = MaskSpec(span_lambda=3, span_max=4)
    result = make_pairs(split, infill_model, spec, scorer, delta, 400, make_rng(2), mask)
    pairs = result.pairs
    assert len(pairs) == 400
    inc = [p for p in pairs if p.tag is ControlTag.INC]
    dec = [p for p in pairs if p.tag is ControlTag.DEC]
    assert len(inc) == len(dec) == 200
    for p in pairs:
        gap = abs(p.target_score - p.source_score)
        assert 0.0 < gap < delta
        if p.tag is ControlTag.INC:
            assert p.target_score > p.source_score
        else:
            assert p.target_score < p.source_score
        # stored scores reproduce exactly under the same scorer
        assert predict(scorer, p.source) == p.source_score
        assert predict(scorer, p.target) == p.target_score
        # only mutable positions differ, within the mask budget
        diffs = diff_positions(p.source, p.target)
        assert diffs
        assert len(diffs) <= spec.span_max
        assert all(mask.mutable[i] for i in diffs)


def test_make_pairs_deterministic(small_campaign):
    _, mask, split, scorer, infill_model = small_campaign
    spec = MaskSpec(span_lambda=3, span_max=4)
    r1 = make_pairs(split, infill_model, spec, scorer, 1.5, 100, make_rng(3), mask)
    r2 = make_pairs(split, infill_model, spec, scorer, 1.5, 100, make_rng(3), mask)
    assert r1.pairs == r2.pairs
    assert r1.attempts == r2.attempts


def test_make_pairs_golden_acceptance_rate(small_campaign):
    _, mask, split, scorer, infill_model = small_campaign
    spec = MaskSpec(span_lambda=3, span_max=4)
    result = make_pairs(split, infill_model, spec, scorer, 1.5, 400, make_rng(42), mask)
    assert result.acceptance_rate == GOLDEN_ACCEPT_RATE


def test_pair_file_round_trip(tmp_path, small_campaign):
    _, mask, split, scorer, infill_model = small_campaign
    ab = Alphabet.of_size(6)
    result = make_pairs(
        split, infill_model, MaskSpec(span_lambda=3, span_max=4), scorer, 1.5, 50 * 2,
        make_rng(4), mask,
    )
    path = tmp_path / "pairs.tsv"
    write_pairs(str(path), result.pairs, ab, comments=["config_hash=deadbeef"])
    back = read_pairs(str(path), ab)
    assert back == result.pairs
