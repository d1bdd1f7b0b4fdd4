import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ice.seqs import (
    Alphabet,
    Edit,
    RegionMask,
    Sequence,
    apply_edits,
    diff_positions,
    hamming,
    levenshtein,
    seq_from_text,
    seq_to_text,
    validate_sequence,
)


def lev_oracle(a, b):
    """Full-matrix DP, written independently of the implementation."""
    n, m = len(a), len(b)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
                d[i - 1][j - 1] + (0 if a[i - 1] == b[j - 1] else 1),
            )
    return d[n][m]


tokens8 = st.integers(min_value=0, max_value=7)


def test_alphabet_rejects_duplicates_and_tiny():
    with pytest.raises(ValueError):
        Alphabet(("A", "A", "B"))
    with pytest.raises(ValueError):
        Alphabet(("A",))


def test_alphabet_round_trip():
    ab = Alphabet.of_size(8)
    s = Sequence((0, 7, 3))
    assert seq_from_text(seq_to_text(s, ab), ab) == s


def test_validate_sequence_ok():
    ab = Alphabet.of_size(8)
    assert validate_sequence(Sequence((0,) * 20), ab, 20) is None


def test_validate_sequence_length_violation():
    ab = Alphabet.of_size(8)
    msg = validate_sequence(Sequence((0,) * 19), ab, 20)
    assert msg is not None and "length" in msg


def test_validate_sequence_range_violation():
    ab = Alphabet.of_size(8)
    msg = validate_sequence(Sequence((0, 8, 0)), ab, 3)
    assert msg is not None and "position 1" in msg


def test_apply_edits_empty_is_identity():
    mask = RegionMask.all_mutable(4)
    s = Sequence((1, 2, 3, 0))
    assert apply_edits(s, [], mask) == s


def test_apply_edits_single_edit():
    mask = RegionMask.all_mutable(5)
    s = Sequence((0, 0, 0, 0, 0))
    out = apply_edits(s, [Edit(3, 2)], mask)
    assert out.tokens == (0, 0, 0, 2, 0)
    assert hamming(s, out) == 1
    assert s.tokens == (0, 0, 0, 0, 0)  # input untouched


def test_apply_edits_immutable_position_rejected():
    mask = RegionMask.with_immutable_span(5, 1, 3)
    with pytest.raises(ValueError, match="immutable"):
        apply_edits(Sequence((0,) * 5), [Edit(2, 1)], mask)


def test_apply_edits_duplicate_and_noop_rejected():
    mask = RegionMask.all_mutable(3)
    with pytest.raises(ValueError, match="duplicate"):
        apply_edits(Sequence((0, 0, 0)), [Edit(1, 2), Edit(1, 1)], mask)
    with pytest.raises(ValueError, match="no-op"):
        apply_edits(Sequence((0, 0, 0)), [Edit(1, 0)], mask)


def test_region_mask_span_helper():
    mask = RegionMask.with_immutable_span(6, 2, 4)
    assert mask.mutable_positions == (0, 1, 4, 5)
    assert mask.immutable_positions == (2, 3)


def test_levenshtein_trivial():
    x = Sequence((1, 2, 3))
    assert levenshtein(x, x) == 0
    assert levenshtein(Sequence((1, 2)), Sequence((1, 3))) == 1


@given(st.lists(tokens8, min_size=8, max_size=8), st.lists(tokens8, min_size=8, max_size=8))
def test_levenshtein_matches_dp_oracle(a, b):
    assert levenshtein(Sequence(tuple(a)), Sequence(tuple(b))) == lev_oracle(a, b)


@given(
    st.lists(tokens8, min_size=0, max_size=6),
    st.lists(tokens8, min_size=0, max_size=6),
    st.lists(tokens8, min_size=0, max_size=6),
)
def test_levenshtein_symmetry_and_triangle(a, b, c):
    sa, sb, sc = Sequence(tuple(a)), Sequence(tuple(b)), Sequence(tuple(c))
    assert levenshtein(sa, sb) == levenshtein(sb, sa)
    assert levenshtein(sa, sc) <= levenshtein(sa, sb) + levenshtein(sb, sc)
    assert (levenshtein(sa, sb) == 0) == (sa == sb)


@st.composite
def seq_and_edits(draw):
    n = draw(st.integers(min_value=2, max_value=10))
    toks = tuple(draw(st.lists(tokens8, min_size=n, max_size=n)))
    mutable = tuple(draw(st.lists(st.booleans(), min_size=n, max_size=n)))
    if not any(mutable):
        mutable = mutable[:-1] + (True,)
    positions = draw(
        st.lists(
            st.sampled_from([i for i, m in enumerate(mutable) if m]),
            unique=True,
            max_size=n,
        )
    )
    edits = []
    for p in positions:
        new = draw(st.integers(min_value=0, max_value=7).filter(lambda v, old=toks[p]: v != old))
        edits.append(Edit(p, new))
    return Sequence(toks), edits, RegionMask(mutable)


@given(seq_and_edits())
@settings(max_examples=200)
def test_apply_edits_reversible_and_respects_mask(case):
    seq, edits, mask = case
    out = apply_edits(seq, edits, mask)
    for i in mask.immutable_positions:
        assert out.tokens[i] == seq.tokens[i]
    assert set(diff_positions(seq, out)) == {e.position for e in edits}
    reverse = [Edit(e.position, seq.tokens[e.position]) for e in edits]
    assert apply_edits(out, reverse, mask) == seq
