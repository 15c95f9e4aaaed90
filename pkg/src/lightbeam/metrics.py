"""Word error rate and real-time-factor computation."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MetricError

_TRAILING_PUNCT = ".?!"


@dataclass(frozen=True)
class WerBreakdown:
    substitutions: int
    insertions: int
    deletions: int
    reference_words: int
    wer: float


@dataclass(frozen=True)
class RtfSample:
    processing_time_s: float
    utterance_duration_s: float
    rtf: float


def normalize_words(words: list[str], keep_punct: bool = False) -> list[str]:
    """Lowercase; unless ``keep_punct``, strip trailing .?! from the last word."""
    out = [w.lower() for w in words if w]
    if out and not keep_punct:
        out[-1] = out[-1].rstrip(_TRAILING_PUNCT)
        if not out[-1]:
            out.pop()
    return out


def wer(reference: list[str], hypothesis: list[str], keep_punct: bool = False) -> WerBreakdown:
    """Minimal-edit WER with deterministic error attribution.

    Comparison is case-insensitive and, by default, ignores sentence
    punctuation on the final word. On equal-cost alignments,
    substitution is preferred over insertion over deletion.
    """
    ref = normalize_words(reference, keep_punct)
    hyp = normalize_words(hypothesis, keep_punct)
    if not ref:
        raise MetricError("reference must contain at least one word")

    n, m = len(ref), len(hyp)
    # dp[i][j] = (cost, S, I, D) aligning ref[:i] with hyp[:j]
    dp = [[(0, 0, 0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dp[i][0] = (i, 0, 0, i)
    for j in range(1, m + 1):
        dp[0][j] = (j, 0, j, 0)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            diag_cost, ds, di, dd = dp[i - 1][j - 1]
            if ref[i - 1] == hyp[j - 1]:
                dp[i][j] = (diag_cost, ds, di, dd)
                continue
            sub = (diag_cost + 1, ds + 1, di, dd)
            ic, is_, ii, id_ = dp[i][j - 1]
            ins = (ic + 1, is_, ii + 1, id_)
            dc, dss, dii, ddd = dp[i - 1][j]
            dele = (dc + 1, dss, dii, ddd + 1)
            dp[i][j] = min(sub, ins, dele, key=lambda c: c[0])  # tie order: S, I, D
    cost, subs, ins_count, dels = dp[n][m]
    return WerBreakdown(
        substitutions=subs,
        insertions=ins_count,
        deletions=dels,
        reference_words=n,
        wer=cost / n,
    )


def rtf(processing_time_s: float, frame_count: int, frame_duration_ms: float) -> RtfSample:
    """Processing time divided by utterance duration (frames x frame length)."""
    duration_s = frame_count * frame_duration_ms / 1000.0
    if duration_s <= 0:
        raise MetricError("utterance duration must be positive")
    return RtfSample(
        processing_time_s=processing_time_s,
        utterance_duration_s=duration_s,
        rtf=processing_time_s / duration_s,
    )
