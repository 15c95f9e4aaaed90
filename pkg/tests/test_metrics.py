import functools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightbeam import MetricError, rtf, wer


def brute_force_edits(ref: tuple[str, ...], hyp: tuple[str, ...]) -> int:
    """Plain recursive minimal edit distance, memoized; the reference."""

    @functools.lru_cache(maxsize=None)
    def go(i: int, j: int) -> int:
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        best = go(i + 1, j + 1) + (ref[i] != hyp[j])
        best = min(best, go(i, j + 1) + 1, go(i + 1, j) + 1)
        return best

    return go(0, 0)


def test_identity():
    assert wer("the cat sat".split(), "the cat sat".split()).wer == 0.0


def test_single_deletion():
    out = wer("the cat sat".split(), "the cat".split())
    assert (out.substitutions, out.insertions, out.deletions) == (0, 0, 1)
    assert out.wer == pytest.approx(1 / 3)


def test_sub_plus_insert():
    out = wer("a b c d".split(), "a x c d e".split())
    assert (out.substitutions, out.insertions, out.deletions) == (1, 1, 0)
    assert out.wer == pytest.approx(0.5)
    assert brute_force_edits(("a", "b", "c", "d"), ("a", "x", "c", "d", "e")) == 2


def test_empty_hypothesis():
    out = wer(["a", "b", "c"], [])
    assert out.wer == 1.0
    assert out.deletions == 3


def test_empty_reference_rejected():
    with pytest.raises(MetricError):
        wer([], ["a"])


def test_case_insensitive_and_final_punct():
    out = wer(["The", "Cat", "sat."], ["the", "cat", "sat?"])
    assert out.wer == 0.0
    kept = wer(["sat."], ["sat?"], keep_punct=True)
    assert kept.wer == 1.0


def test_wer_can_exceed_one():
    out = wer(["a"], ["x", "y", "z"])
    assert out.wer == pytest.approx(3.0)  # 1 sub + 2 insertions over 1 ref word


@settings(max_examples=200, deadline=None)
@given(
    ref=st.lists(st.sampled_from("abcx"), min_size=1, max_size=6),
    hyp=st.lists(st.sampled_from("abcx"), max_size=6),
)
def test_matches_brute_force(ref, hyp):
    out = wer(list(ref), list(hyp), keep_punct=True)
    expected = brute_force_edits(tuple(ref), tuple(hyp))
    assert out.substitutions + out.insertions + out.deletions == expected
    assert out.wer == pytest.approx(expected / len(ref))


@settings(max_examples=100, deadline=None)
@given(
    ref=st.lists(st.sampled_from("abcx"), min_size=1, max_size=6),
    hyp=st.lists(st.sampled_from("abcx"), min_size=1, max_size=6),
)
def test_total_edits_symmetric_with_roles_swapped(ref, hyp):
    fwd = wer(list(ref), list(hyp), keep_punct=True)
    rev = wer(list(hyp), list(ref), keep_punct=True)
    assert (
        fwd.substitutions + fwd.insertions + fwd.deletions
        == rev.substitutions + rev.deletions + rev.insertions
    )


def test_rtf_definition():
    sample = rtf(2.0, 100, 100.0)
    assert sample.utterance_duration_s == 10.0
    assert sample.rtf == 0.2
    assert rtf(2.0, 10, 1000.0).rtf == 0.2


def test_rtf_zero_duration_rejected():
    with pytest.raises(MetricError):
        rtf(1.0, 0, 100.0)
