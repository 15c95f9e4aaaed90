"""Brute-force reference decoder and test fixture builders.

``exhaustive_decode`` explores every frame-level token path (no beam
limit, no thresholds) with plain nested loops and explicit sequence
storage, consolidating paths that decode to the same emitted label
sequence by keeping the highest-scoring one. It shares no code with the
beam decoder except the n-gram query and the scorer functions, so it
independently cross-checks masking, bonuses, pruning, recombination and
fusion bookkeeping on tiny instances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .config import DecodeConfig
from .errors import BuilderError, EmptyBeamError, InstanceTooLargeError
from .lexicon import TransitionTable
from .logits import LogProbMatrix
from .ngram import NEG_INF_GUARD, LmSession, score_word
from .scorer import score_eos, score_texts

MAX_PATHS = 10_000_000


def collapse_ctc(path: list[int], blank_id: int) -> list[int]:
    """Standard CTC collapse: merge repeat runs first, then delete blanks."""
    merged = [tok for tok, _ in itertools.groupby(path)]
    return [tok for tok in merged if tok != blank_id]


# Oracle-side word hypothesis: (lm_total, lm_state, words, punct).
_OrthoTuple = tuple[float, int, tuple[str, ...], str]


@dataclass
class _Hyp:
    total: float  # acoustic + bonuses + best LM total
    ab: float  # acoustic + bonuses only
    last: int
    lex_state: int
    ortho: list[_OrthoTuple]


def _dedup_surfaces(tt: TransitionTable, completion_ids: tuple[int, ...]) -> list[str]:
    out: list[str] = []
    for eid in completion_ids:
        surface = tt.entries[eid].surface
        if surface not in out:
            out.append(surface)
    return out


def _expand_boundary(
    ortho: list[_OrthoTuple],
    surfaces: list[str],
    lm: LmSession,
    config: DecodeConfig,
) -> list[_OrthoTuple] | None:
    candidates: list[_OrthoTuple] = []
    for lm_total, lm_state, words, _punct in ortho:
        for surface in surfaces:
            inc, succ = score_word(lm.model, lm.registry, lm.cache, lm_state, surface)
            if inc <= NEG_INF_GUARD:
                continue
            candidates.append(
                (lm_total + config.ngram_weight * inc, succ, words + (surface,), "")
            )
    if not candidates:
        return None
    candidates.sort(key=lambda c: -c[0])  # stable: creation order breaks ties
    candidates = candidates[: config.ortho_beams]
    best = candidates[0][0]
    return [c for c in candidates if c[0] >= best - config.homophone_prune_threshold]


def _rescore_all(
    hyps: dict[tuple[int, ...], _Hyp],
    scorer,
    config: DecodeConfig,
    final: bool,
) -> None:
    texts: list[str] = []
    for seq in sorted(hyps):
        for _total, _state, words, _punct in hyps[seq].ortho:
            text = " ".join(words)
            if text and text not in texts:
                texts.append(text)
    if final:
        table = dict(zip(texts, score_eos(scorer, texts, config.llm_chunk_size)))
    else:
        table = {t: ("", s) for t, s in zip(texts, score_texts(scorer, texts, config.llm_chunk_size))}

    for hyp in hyps.values():
        rescored: list[_OrthoTuple] = []
        for _total, state, words, punct in hyp.ortho:
            text = " ".join(words)
            if not text:
                rescored.append((0.0, state, words, ""))
            else:
                new_punct, score = table[text]
                rescored.append(
                    (config.llm_weight * score, state, words, new_punct if final else punct)
                )
        rescored.sort(key=lambda c: -c[0])
        hyp.ortho = rescored
        hyp.total = hyp.ab + rescored[0][0]


def exhaustive_decode(
    d: LogProbMatrix,
    config: DecodeConfig,
    tt: TransitionTable,
    lm: LmSession,
    scorer,
    final_llm_only: bool = False,
) -> tuple[str, float]:
    """Reference (text, score) by full enumeration; tiny instances only."""
    num_frames, v = d.num_frames, tt.vocab_size
    if v**num_frames > MAX_PATHS:
        raise InstanceTooLargeError(
            f"{v}^{num_frames} paths exceeds the {MAX_PATHS} enumeration bound"
        )
    blank, space, root, sink = tt.blank_id, tt.space_id, tt.root, tt.sink
    beta = config.token_insertion_bonus
    gamma = config.word_boundary_bonus

    hyps: dict[tuple[int, ...], _Hyp] = {
        (): _Hyp(total=0.0, ab=0.0, last=blank, lex_state=root, ortho=[(0.0, 0, (), "")])
    }

    for t in range(num_frames):
        row = d.frames[t]
        new_hyps: dict[tuple[int, ...], _Hyp] = {}
        for seq in sorted(hyps, key=lambda s: (-hyps[s].total, s)):
            hyp = hyps[seq]
            for tok in range(v):
                advanced = tt.advance(hyp.lex_state, tok)
                if tok != blank and tok != hyp.last and advanced == sink:
                    continue
                ab = hyp.ab + float(row[tok])
                emit = tok != blank and tok != hyp.last
                if emit and tok != space:
                    ab += beta
                if tok == space and hyp.last != space:
                    ab += gamma
                ortho = hyp.ortho
                if emit and tok == space:
                    ortho = _expand_boundary(
                        ortho, _dedup_surfaces(tt, tt.completions_at(hyp.lex_state)), lm, config
                    )
                    if ortho is None:
                        continue
                nseq = seq + (tok,) if emit else seq
                cand = _Hyp(
                    total=ab + ortho[0][0],
                    ab=ab,
                    last=hyp.last if tok == blank else tok,
                    lex_state=advanced if emit else hyp.lex_state,
                    ortho=ortho,
                )
                incumbent = new_hyps.get(nseq)
                if incumbent is None or cand.total > incumbent.total:
                    new_hyps[nseq] = cand
        if not new_hyps:
            raise EmptyBeamError(f"oracle: every path invalid at frame {t}")
        hyps = new_hyps
        if t > 0 and t % config.llm_rescore_interval == 0 and not final_llm_only:
            _rescore_all(hyps, scorer, config, final=False)

    closed: dict[tuple[int, ...], _Hyp] = {}
    for seq in sorted(hyps, key=lambda s: (-hyps[s].total, s)):
        hyp = hyps[seq]
        if hyp.lex_state != root:
            ids = tt.completions_at(hyp.lex_state)
            if not ids:
                continue
            ortho = _expand_boundary(hyp.ortho, _dedup_surfaces(tt, ids), lm, config)
            if ortho is None:
                continue
            hyp = _Hyp(
                total=hyp.ab + ortho[0][0], ab=hyp.ab, last=hyp.last, lex_state=root, ortho=ortho
            )
        closed[seq] = hyp
    if not closed:
        raise EmptyBeamError("oracle: no path survived end-of-utterance closure")

    _rescore_all(closed, scorer, config, final=True)
    best_seq = min(closed, key=lambda s: (-closed[s].total, s))
    best = closed[best_seq]
    _total, _state, words, punct = best.ortho[0]
    return " ".join(words) + punct, best.total


def build_toy_arpa(spec: list[tuple]) -> str:
    """Render a well-formed ARPA string from (words, logprob[, backoff]) rows.

    ``words`` is a tuple/list of word strings; probabilities and
    backoffs are log10 values echoed verbatim. Histories of higher-order
    entries must themselves be present, as ARPA requires.
    """
    by_order: dict[int, list[tuple[tuple[str, ...], float, float | None]]] = {}
    grams: set[tuple[str, ...]] = set()
    for row in spec:
        if len(row) == 2:
            words, prob = row
            backoff = None
        elif len(row) == 3:
            words, prob, backoff = row
        else:
            raise BuilderError(f"spec rows need 2 or 3 fields, got {row!r}")
        words = tuple(words)
        if not words:
            raise BuilderError("empty n-gram in spec")
        if words in grams:
            raise BuilderError(f"duplicate n-gram {words!r}")
        grams.add(words)
        by_order.setdefault(len(words), []).append((words, prob, backoff))
    for order, rows in by_order.items():
        if order < 2:
            continue
        for words, _prob, _backoff in rows:
            if words[:-1] not in grams:
                raise BuilderError(f"history {words[:-1]!r} of {words!r} missing from spec")

    def fmt(value) -> str:
        return value if isinstance(value, str) else repr(float(value))

    lines = ["\\data\\"]
    for order in sorted(by_order):
        lines.append(f"ngram {order}={len(by_order[order])}")
    lines.append("")
    for order in sorted(by_order):
        lines.append(f"\\{order}-grams:")
        for words, prob, backoff in by_order[order]:
            row = f"{fmt(prob)}\t{' '.join(words)}"
            if backoff is not None:
                row += f"\t{fmt(backoff)}"
            lines.append(row)
        lines.append("")
    lines.append("\\end\\")
    return "\n".join(lines) + "\n"
