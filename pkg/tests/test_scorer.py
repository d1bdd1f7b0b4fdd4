import math

import numpy as np
import pytest

from ice.landscape import (
    DatasetSplit,
    LabeledExample,
    Region,
    build_supervised_split,
    make_landscape,
    oracle_scores,
    sample_corpus,
)
from ice.scorer import (
    RESIDUAL_RTOL,
    ScorerModel,
    correlation_report,
    featurize,
    fit_ridge,
    load_scorer,
    predict,
    predict_tokens,
    save_scorer,
)
from ice.seqs import RegionMask, Sequence


def make_examples(landscape, n, seed, length=None):
    mask = RegionMask.all_mutable(landscape.length)
    ref = Sequence((0,) * landscape.length)
    corpus = sample_corpus(landscape, n, seed=seed, mask=mask, reference=ref)
    scores = oracle_scores(landscape, np.array([s.tokens for s in corpus]))
    return [LabeledExample(s, float(z)) for s, z in zip(corpus, scores)]


def test_featurize_sum_and_layout():
    layout = (5, 4)
    v = featurize(Sequence((0, 1, 2, 3, 0)), layout)
    assert v.sum() == 5 + 1
    assert v.shape == (21,)


def test_featurize_single_diff_two_coordinates():
    layout = (5, 4)
    a = featurize(Sequence((0, 1, 2, 3, 0)), layout)
    b = featurize(Sequence((0, 1, 3, 3, 0)), layout)
    assert int((a != b).sum()) == 2
    assert a[-1] == b[-1] == 1.0


def test_featurize_all_zero_tokens_coordinates():
    layout = (4, 3)
    v = featurize(Sequence((0, 0, 0, 0)), layout)
    on = set(np.nonzero(v)[0])
    assert on == {0, 3, 6, 9, 12}  # i*size for i<4, plus bias at index 12


def test_fit_zero_labels_zero_weights():
    examples = [
        LabeledExample(Sequence((0, 1, 2)), 0.0),
        LabeledExample(Sequence((2, 1, 0)), 0.0),
        LabeledExample(Sequence((1, 1, 1)), 0.0),
    ]
    model = fit_ridge(examples, 1.0, alphabet_size=3)
    assert np.allclose(model.weights, 0.0, atol=1e-12)


def test_fit_additive_landscape_round_trip():
    ls = make_landscape(6, 4, 0, 1.0, 0.0, seed=21)
    examples = make_examples(ls, 600, seed=3)
    model = fit_ridge(examples, 1e-6, alphabet_size=4)
    toks = np.array([ex.seq.tokens for ex in examples])
    preds = predict_tokens(model, toks)
    truth = np.array([ex.z for ex in examples])
    rmse = float(np.sqrt(np.mean((preds - truth) ** 2)))
    assert rmse <= 1e-3


def test_fit_repeated_single_example():
    ex = LabeledExample(Sequence((1, 0, 2)), 5.0)
    model = fit_ridge([ex, ex], 1e-9, alphabet_size=3)
    assert predict(model, ex.seq) == pytest.approx(5.0, abs=1e-6)


def test_predict_matches_independent_dense_solve():
    examples = [
        LabeledExample(Sequence((0, 1)), 1.0),
        LabeledExample(Sequence((1, 0)), 2.0),
        LabeledExample(Sequence((1, 1)), 0.5),
    ]
    lam = 0.7
    model = fit_ridge(examples, lam, alphabet_size=2)
    # independent oracle: dense normal equations via numpy only
    X = np.array([featurize(ex.seq, (2, 2)) for ex in examples])
    y = np.array([ex.z for ex in examples])
    D = np.eye(5)
    D[-1, -1] = 0.0
    w = np.linalg.solve(X.T @ X + lam * D, X.T @ y)
    for ex in examples:
        assert predict(model, ex.seq) == pytest.approx(float(featurize(ex.seq, (2, 2)) @ w), abs=1e-9)


def test_residual_bound_holds_after_fit():
    ls = make_landscape(8, 5, 6, 1.0, 0.5, seed=22)
    examples = make_examples(ls, 500, seed=4)
    lam = 1.0
    model = fit_ridge(examples, lam, alphabet_size=5)
    X = np.array([featurize(ex.seq, (8, 5)) for ex in examples])
    y = np.array([ex.z for ex in examples])
    reg = np.full(X.shape[1], lam)
    reg[-1] = 0.0
    grad = X.T @ (y - X @ model.weights) - reg * model.weights
    assert np.abs(grad).max() <= RESIDUAL_RTOL * max(1.0, np.abs(y).max())


def test_predict_is_sum_of_lookups():
    ls = make_landscape(6, 4, 3, 1.0, 0.5, seed=23)
    examples = make_examples(ls, 200, seed=5)
    model = fit_ridge(examples, 1.0, alphabet_size=4)
    rng = np.random.default_rng(0)
    for _ in range(20):
        seq = Sequence(tuple(int(t) for t in rng.integers(0, 4, size=6)))
        via_featurize = float(featurize(seq, (6, 4)) @ model.weights)
        assert math.isclose(predict(model, seq), via_featurize, rel_tol=1e-12, abs_tol=1e-12)


def test_label_scaling_doubles_weights():
    ls = make_landscape(5, 3, 2, 1.0, 0.5, seed=24)
    examples = make_examples(ls, 120, seed=6)
    doubled = [LabeledExample(ex.seq, 2 * ex.z) for ex in examples]
    m1 = fit_ridge(examples, 1.0, alphabet_size=3)
    m2 = fit_ridge(doubled, 1.0, alphabet_size=3)
    assert np.allclose(2 * m1.weights, m2.weights, atol=1e-8)


def test_fit_requires_two_examples_and_positive_lambda():
    ex = LabeledExample(Sequence((0, 1)), 1.0)
    with pytest.raises(ValueError):
        fit_ridge([ex], 1.0, alphabet_size=2)
    with pytest.raises(ValueError):
        fit_ridge([ex, ex], 0.0, alphabet_size=2)


def test_serialization_exact_round_trip(tmp_path):
    ls = make_landscape(6, 4, 3, 1.0, 0.5, seed=25)
    model = fit_ridge(make_examples(ls, 100, seed=7), 1.0, alphabet_size=4)
    path = tmp_path / "scorer.json"
    save_scorer(model, str(path))
    again = load_scorer(str(path))
    assert np.array_equal(model.weights, again.weights)
    assert again.ridge_lambda == model.ridge_lambda
    s = Sequence((1, 2, 3, 0, 1, 2))
    assert predict(model, s) == predict(again, s)


def _split_from(examples, region):
    return DatasetSplit(unsup=tuple(ex.seq for ex in examples), sup_train=tuple(examples), region=region)


def test_correlation_report_additive_control():
    ls = make_landscape(6, 4, 0, 1.0, 0.0, seed=26)
    examples = make_examples(ls, 400, seed=8)
    model = fit_ridge(examples, 1e-6, alphabet_size=4)
    split = _split_from(examples, Region(-1e9, 1e9))
    train_s, held_s = correlation_report(model, split, examples)
    assert train_s >= 0.99 and held_s >= 0.99


def test_correlation_report_empty_heldout_errors():
    ls = make_landscape(5, 3, 2, 1.0, 0.5, seed=27)
    examples = make_examples(ls, 50, seed=9)
    model = fit_ridge(examples, 1.0, alphabet_size=3)
    with pytest.raises(ValueError):
        correlation_report(model, _split_from(examples, Region(-1e9, 1e9)), [])


def test_correlation_report_constant_predictions_undefined():
    examples = [
        LabeledExample(Sequence((0, 1)), 0.0),
        LabeledExample(Sequence((1, 0)), 0.0),
        LabeledExample(Sequence((1, 1)), 0.0),
    ]
    model = fit_ridge(examples, 1.0, alphabet_size=2)
    train_s, _ = correlation_report(model, _split_from(examples, Region(-1, 1)), examples)
    assert train_s is None


def test_epistatic_strictly_below_additive_control():
    """Control condition: a pure additive landscape is exactly representable,
    the default epistatic one must not be."""
    m_sup = 10 * 8 * 4  # 10 * length * alphabet_size
    region = Region(-1e9, 1e9)

    def heldout_corr(epistatic_scale, seed):
        ls = make_landscape(8, 4, 8, 1.0, epistatic_scale, seed=seed)
        train = make_examples(ls, m_sup, seed=100 + seed)
        held = make_examples(ls, 500, seed=200 + seed)
        model = fit_ridge(train, 1.0, alphabet_size=4)
        _, held_s = correlation_report(model, _split_from(train, region), held)
        return held_s

    control = heldout_corr(0.0, seed=31)
    epistatic = heldout_corr(0.5, seed=31)
    assert control >= 0.99
    assert epistatic < control
