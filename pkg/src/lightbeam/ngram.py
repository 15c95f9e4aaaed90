"""ARPA backoff n-gram model with an integer state registry and score cache.

ARPA files store log10 quantities; everything here is converted to
natural log at load time so the decoder mixes n-gram and neural-LM
scores in a single base.
"""

from __future__ import annotations

import gzip
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

LN10 = math.log(10.0)

# Finite stand-in for log(0); kept finite so downstream additions never
# produce NaNs. Anything at or below NEG_INF_GUARD is treated as pruned.
NEG_INF = -1.0e30
NEG_INF_GUARD = -1.0e29

_NGRAM_HEADER_RE = re.compile(r"^ngram (\d+)=(\d+)$")
_SECTION_RE = re.compile(r"^\\(\d+)-grams:$")


@dataclass
class NGramModel:
    """Parsed ARPA model; probabilities and backoffs in natural log."""

    order: int
    probs: dict[tuple[str, ...], float]
    backoffs: dict[tuple[str, ...], float]
    unk_present: bool
    # Diagnostic: incremented on every probs-map lookup, used by tests to
    # show the transition cache short-circuits repeated queries.
    prob_lookups: int = 0

    def vocabulary(self) -> list[str]:
        return sorted(w for (w,) in (k for k in self.probs if len(k) == 1))


@dataclass
class LmStateRegistry:
    """Stable integer ids for n-gram histories within one decode session.

    State 0 is always the begin-of-sentence history ``(<s>,)``.
    """

    histories: list[tuple[str, ...]] = field(default_factory=lambda: [(BOS,)])
    index: dict[tuple[str, ...], int] = field(default_factory=lambda: {(BOS,): 0})

    def state_of(self, history: tuple[str, ...]) -> int:
        state = self.index.get(history)
        if state is None:
            state = len(self.histories)
            self.histories.append(history)
            self.index[history] = state
        return state

    def history(self, state: int) -> tuple[str, ...]:
        if not (0 <= state < len(self.histories)):
            raise IndexError(f"unregistered LM state id {state}")
        return self.histories[state]


# (state id, word) -> (natural-log score, successor state id)
TransitionCache = dict[tuple[int, str], tuple[float, int]]


@dataclass
class LmSession:
    """Per-decode bundle of model plus mutable registry/cache state."""

    model: NGramModel
    registry: LmStateRegistry = field(default_factory=LmStateRegistry)
    cache: TransitionCache = field(default_factory=dict)

    @property
    def bos_state(self) -> int:
        return 0


def load_arpa(path: str | Path) -> NGramModel:
    """Parse a (possibly gzip-compressed) ARPA text file.

    Section counts declared under ``\\data\\`` must match the entries
    actually present; the model order is the highest section with at
    least one entry.
    """
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    lines = raw.decode("utf-8").splitlines()

    declared: dict[int, int] = {}
    probs: dict[tuple[str, ...], float] = {}
    backoffs: dict[tuple[str, ...], float] = {}
    counts: dict[int, int] = {}
    section = None  # None | "data" | int n
    saw_data = False
    saw_end = False

    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        if line == "\\data\\":
            saw_data = True
            section = "data"
            continue
        m = _SECTION_RE.match(line)
        if m:
            section = int(m.group(1))
            if section not in declared:
                raise FormatError(f"{path}:{lineno}: section \\{section}-grams: not declared")
            continue
        if line == "\\end\\":
            saw_end = True
            section = None
            continue
        if section == "data":
            m = _NGRAM_HEADER_RE.match(line)
            if not m:
                raise FormatError(f"{path}:{lineno}: bad count line {line!r}")
            declared[int(m.group(1))] = int(m.group(2))
            continue
        if isinstance(section, int):
            parts = line.split()
            n = section
            if len(parts) not in (n + 1, n + 2):
                raise FormatError(f"{path}:{lineno}: malformed {n}-gram line {line!r}")
            try:
                logp = float(parts[0])
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad probability {parts[0]!r}") from None
            gram = tuple(parts[1 : n + 1])
            probs[gram] = logp * LN10
            if len(parts) == n + 2:
                try:
                    backoffs[gram] = float(parts[n + 1]) * LN10
                except ValueError:
                    raise FormatError(f"{path}:{lineno}: bad backoff {parts[n+1]!r}") from None
            counts[n] = counts.get(n, 0) + 1
            continue
        if not saw_data:
            # Free-form preamble before \data\ is allowed.
            continue
        raise FormatError(f"{path}:{lineno}: unexpected line outside any section: {line!r}")

    if not saw_data:
        raise FormatError(f"{path}: missing \\data\\ section")
    if not saw_end:
        raise FormatError(f"{path}: missing \\end\\ marker")
    for n, want in declared.items():
        have = counts.get(n, 0)
        if want != have:
            raise FormatError(f"{path}: declared {want} {n}-grams but found {have}")
    entries_orders = [n for n, c in counts.items() if c > 0]
    if not entries_orders:
        raise FormatError(f"{path}: no n-gram entries")
    return NGramModel(
        order=max(entries_orders),
        probs=probs,
        backoffs=backoffs,
        unk_present=(UNK,) in probs,
    )


def _lookup(model: NGramModel, gram: tuple[str, ...]) -> float | None:
    model.prob_lookups += 1
    return model.probs.get(gram)


def _contains(model: NGramModel, gram: tuple[str, ...]) -> bool:
    model.prob_lookups += 1
    return gram in model.probs


def _backoff_score(model: NGramModel, history: tuple[str, ...], word: str) -> float:
    """Standard recursion: P(w|h) falls back to shorter histories,
    accumulating the backoff weight of each history it abandons."""
    p = _lookup(model, history + (word,))
    if p is not None:
        return p
    if not history:
        return NEG_INF
    return model.backoffs.get(history, 0.0) + _backoff_score(model, history[1:], word)


def _successor_history(
    model: NGramModel, history: tuple[str, ...], word: str
) -> tuple[str, ...]:
    """Longest suffix of history+word that is a known context, capped at N-1."""
    hist = (history + (word,))[-(model.order - 1) :] if model.order > 1 else ()
    while hist and not _contains(model, hist):
        hist = hist[1:]
    return hist


def score_word(
    model: NGramModel,
    registry: LmStateRegistry,
    cache: TransitionCache,
    state: int,
    word: str,
) -> tuple[float, int]:
    """Natural-log probability of ``word`` given the registered history.

    Unknown words are scored as ``<unk>`` when the model has one and as
    ``NEG_INF`` (hard prune) otherwise. Results are memoized in the
    transition cache keyed by (state, word).
    """
    hit = cache.get((state, word))
    if hit is not None:
        return hit
    history = registry.history(state)
    effective = word
    if not _contains(model, (word,)):
        if not model.unk_present:
            result = (NEG_INF, registry.state_of(()))
            cache[(state, word)] = result
            return result
        effective = UNK
    score = _backoff_score(model, history, effective)
    succ = registry.state_of(_successor_history(model, history, effective))
    result = (score, succ)
    cache[(state, word)] = result
    return result


def score_sequence(model: NGramModel, words: list[str], include_eos: bool = False) -> float:
    """Sum of incremental word scores from begin-of-sentence; test oracle."""
    session = LmSession(model)
    state = session.bos_state
    total = 0.0
    for word in words:
        inc, state = score_word(model, session.registry, session.cache, state, word)
        total += inc
    if include_eos:
        inc, _ = score_word(model, session.registry, session.cache, state, EOS)
        total += inc
    return total
