"""Frame-synchronous lexicon-constrained CTC beam search.

Per frame, every active hypothesis fans out over the whole vocabulary,
receives extension bonuses, is masked against the lexicon transition
table, and the global top-k candidates survive threshold pruning. A
token extends the decoded sequence only when it is neither the blank
nor a repeat of the hypothesis' most recent non-blank token; only such
emissions advance the lexicon prefix state and the rolling hash. New
word-boundary emissions trigger n-gram fusion over the word spellings
completing at the prefix, and at fixed frame intervals (plus once at
end of utterance) an external scorer replaces the accumulated LM totals
of the word-level sub-hypotheses.

Score bookkeeping: each word-level sub-hypothesis ("ortho entry")
carries a single weighted LM total, and every fusion event updates the
beam score by the change of its best entry's total. A beam score is
therefore always (acoustic path sum) + (bonuses) + (best LM total).
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .config import DecodeConfig
from .errors import DataValueError, EmptyBeamError
from .lexicon import TransitionTable
from .logits import LogProbMatrix
from .ngram import NEG_INF, NEG_INF_GUARD, LmSession, score_word
from .scorer import score_eos, score_texts

# Rolling-hash constants: two independent 64-bit polynomial lanes with
# wraparound arithmetic, update h <- h * MULT + (token + 1). Fixed here
# so serialized hashes are reproducible across runs and machines.
HASH_INIT_1 = np.uint64(0xCBF29CE484222325)
HASH_INIT_2 = np.uint64(0x9AE16A3B2F90404F)
HASH_MULT_1 = np.uint64(0x9E3779B97F4A7C15)
HASH_MULT_2 = np.uint64(0xC2B2AE3D27D4EB4F)


class OrthoEntry(NamedTuple):
    """One word-level spelling hypothesis nested under an acoustic beam."""

    lm_total: float  # weighted running LM total
    lm_state: int  # n-gram registry state id
    node: int  # backpointer into the shared WordHistory
    seq: int  # creation order, breaks lm_total ties
    punct: str = ""  # end-of-sentence punctuation, set by the final rescore


class WordHistory:
    """Append-only trie of word sequences shared by all beams.

    Node 0 is the empty history; every other node is (parent, word).
    Texts are memoized: reconstruction cost is paid once per node.
    """

    def __init__(self):
        self.parents: list[int] = [-1]
        self.words: list[str] = [""]
        self._texts: dict[int, str] = {0: ""}

    def append(self, parent: int, word: str) -> int:
        self.parents.append(parent)
        self.words.append(word)
        return len(self.parents) - 1

    def words_of(self, node: int) -> tuple[str, ...]:
        out = []
        while node > 0:
            out.append(self.words[node])
            node = self.parents[node]
        return tuple(reversed(out))

    def text(self, node: int) -> str:
        cached = self._texts.get(node)
        if cached is None:
            cached = " ".join(self.words_of(node))
            self._texts[node] = cached
        return cached


@dataclass
class DecodeResult:
    text: str
    score: float
    nbest: list[tuple[str, float]]
    frame_count: int
    wall_time_s: float
    llm_events: int  # non-final rescore events that fired


class BeamSet:
    """Active hypotheses as parallel arrays plus per-beam ortho sets.

    Labels and parent pointers are stored column-wise (one array per
    frame); a hypothesis' full token path is recovered by walking parent
    pointers backwards through the columns.
    """

    def __init__(self, config: DecodeConfig, tt: TransitionTable, registry):
        self.config = config
        self.table = tt
        self.blank_id = tt.blank_id
        self.space_id = tt.space_id
        v = tt.vocab_size
        self._token_ids = np.arange(v, dtype=np.int32)
        self._is_phoneme = np.ones(v, dtype=bool)
        self._is_phoneme[[tt.blank_id, tt.space_id]] = False

        self.scores = np.zeros(1, dtype=np.float64)
        self.last_tokens = np.array([tt.blank_id], dtype=np.int32)
        self.hash1 = np.array([HASH_INIT_1], dtype=np.uint64)
        self.hash2 = np.array([HASH_INIT_2], dtype=np.uint64)
        self.prefix_states = np.array([tt.root], dtype=np.int32)
        self.history = WordHistory()
        # registry state 0 is always the begin-of-sentence history
        self.ortho: list[tuple[OrthoEntry, ...]] = [(OrthoEntry(0.0, 0, 0, 0),)]
        self.labels: list[np.ndarray] = []
        self.parents: list[np.ndarray] = []
        self._next_seq = 1
        self.last_premerge: list[tuple[int, int, float]] | None = None

    @property
    def size(self) -> int:
        return len(self.scores)

    def next_seq(self) -> int:
        seq = self._next_seq
        self._next_seq += 1
        return seq

    def reconstruct_path(self, beam: int) -> list[int]:
        """Raw frame-level token path of one beam via the pointer buffers."""
        tokens = []
        idx = beam
        for t in range(len(self.labels) - 1, -1, -1):
            tokens.append(int(self.labels[t][idx]))
            idx = int(self.parents[t][idx])
        tokens.reverse()
        return tokens

    def hash_key(self, beam: int) -> tuple[int, int]:
        return int(self.hash1[beam]), int(self.hash2[beam])


def collapse_emissions(path: list[int], blank_id: int) -> list[int]:
    """Emitted label sequence of a raw path under the decoder's rules.

    Blanks never emit, and a token equal to the most recent non-blank
    token is a repeat even when blanks intervene; equivalently: delete
    blanks, then merge adjacent duplicates.
    """
    out: list[int] = []
    for tok in path:
        if tok == blank_id:
            continue
        if out and out[-1] == tok:
            continue
        out.append(tok)
    return out


def sequence_hash(labels: list[int]) -> tuple[int, int]:
    """Reference rolling hash of an emitted label sequence."""
    h1, h2 = int(HASH_INIT_1), int(HASH_INIT_2)
    mask = (1 << 64) - 1
    for tok in labels:
        h1 = (h1 * int(HASH_MULT_1) + tok + 1) & mask
        h2 = (h2 * int(HASH_MULT_2) + tok + 1) & mask
    return h1, h2


def init_beams(config: DecodeConfig, tt: TransitionTable, registry) -> BeamSet:
    """Single root hypothesis: score 0, last token blank, empty history."""
    return BeamSet(config, tt, registry)


def apply_ngram(
    beams: BeamSet,
    beam: int,
    completion_ids: tuple[int, ...],
    lm: LmSession,
    config: DecodeConfig,
) -> None:
    """Expand one beam's ortho set with the words completing at its prefix.

    Every (entry, candidate word) pair scores the word in the entry's
    n-gram context; unscorable candidates are dropped, the top-o kept,
    entries further than the homophone threshold below the best pruned,
    and the beam score moves by the change of the best entry's total.
    If every candidate is unscorable the beam is killed.
    """
    entries = beams.ortho[beam]
    best_prev = entries[0].lm_total

    surfaces: list[str] = []
    seen = set()
    for eid in completion_ids:
        surface = beams.table.entries[eid].surface
        if surface not in seen:
            seen.add(surface)
            surfaces.append(surface)

    candidates: list[tuple[float, int, int, int, str]] = []
    for entry in entries:
        for surface in surfaces:
            inc, succ = score_word(lm.model, lm.registry, lm.cache, entry.lm_state, surface)
            if inc <= NEG_INF_GUARD:
                continue
            candidates.append(
                (
                    entry.lm_total + config.ngram_weight * inc,
                    succ,
                    entry.node,
                    beams.next_seq(),
                    surface,
                )
            )
    if not candidates:
        beams.scores[beam] = NEG_INF
        return

    candidates.sort(key=lambda c: (-c[0], c[3]))
    candidates = candidates[: config.ortho_beams]
    best = candidates[0][0]
    candidates = [c for c in candidates if c[0] >= best - config.homophone_prune_threshold]
    beams.ortho[beam] = tuple(
        OrthoEntry(total, succ, beams.history.append(node, surface), seq)
        for total, succ, node, seq, surface in candidates
    )
    beams.scores[beam] += best - best_prev


def step(
    beams: BeamSet,
    d_row: np.ndarray,
    t: int,
    config: DecodeConfig,
    tt: TransitionTable,
    lm: LmSession,
    collect_premerge: bool = False,
) -> BeamSet:
    """Advance all beams by one frame of scaled log-probabilities."""
    v = d_row.shape[0]
    blank, space = beams.blank_id, beams.space_id
    last = beams.last_tokens

    # 1-2) fan out and add extension bonuses
    cand = beams.scores[:, None] + d_row[None, :]
    nonrepeat = beams._token_ids[None, :] != last[:, None]
    cand += config.token_insertion_bonus * (beams._is_phoneme[None, :] & nonrepeat)
    cand[:, space] += config.word_boundary_bonus * (last != space)

    # 3) lexicon mask
    mask = tt.valid_mask(beams.prefix_states, last)
    cand[~mask] = NEG_INF

    # 4-5) global top-k then threshold pruning; stable sort on the flat
    # index realizes the (score, parent, token) tie-break.
    flat = cand.ravel()
    order = np.argsort(-flat, kind="stable")[: min(config.beam_size, flat.size)]
    sel = flat[order]
    if sel[0] <= NEG_INF_GUARD:
        raise EmptyBeamError(f"all candidates pruned at frame {t}")
    keep = (sel >= sel[0] - config.beam_prune_threshold) & (sel > NEG_INF_GUARD)
    order, sel = order[keep], sel[keep]

    # 6) materialize survivors
    parents = (order // v).astype(np.int64)
    tokens = (order % v).astype(np.int32)
    parent_last = last[parents]
    parent_prefix = beams.prefix_states[parents]
    is_blank = tokens == blank
    is_emit = ~is_blank & (tokens != parent_last)
    new_scores = sel.astype(np.float64)
    new_last = np.where(is_blank, parent_last, tokens)
    tok_u = tokens.astype(np.uint64) + np.uint64(1)
    h1p, h2p = beams.hash1[parents], beams.hash2[parents]
    new_h1 = np.where(is_emit, h1p * HASH_MULT_1 + tok_u, h1p)
    new_h2 = np.where(is_emit, h2p * HASH_MULT_2 + tok_u, h2p)
    new_prefix = np.where(is_emit, tt.table[parent_prefix, tokens], parent_prefix).astype(
        np.int32
    )
    new_ortho = [beams.ortho[p] for p in parents]

    beams.scores = new_scores
    beams.ortho = new_ortho

    # 7) n-gram fusion for beams that emitted a new word boundary
    for j in np.flatnonzero((tokens == space) & is_emit):
        apply_ngram(beams, int(j), tt.completions_at(int(parent_prefix[j])), lm, config)

    # 8) recombine equal-hash beams, keeping the highest post-fusion score
    n = len(order)
    rank = np.lexsort((np.arange(n), -beams.scores))
    if collect_premerge:
        beams.last_premerge = [
            (int(new_h1[j]), int(new_h2[j]), float(beams.scores[j])) for j in range(n)
        ]
    seen_hash: set[tuple[int, int]] = set()
    keep_idx: list[int] = []
    for j in rank:
        if beams.scores[j] <= NEG_INF_GUARD:
            continue
        key = (int(new_h1[j]), int(new_h2[j]))
        if key in seen_hash:
            continue
        seen_hash.add(key)
        keep_idx.append(int(j))
    if not keep_idx:
        raise EmptyBeamError(f"all hypotheses pruned at frame {t}")

    idx = np.array(keep_idx, dtype=np.int64)
    beams.scores = beams.scores[idx]
    beams.last_tokens = new_last[idx].astype(np.int32)
    beams.hash1 = new_h1[idx]
    beams.hash2 = new_h2[idx]
    beams.prefix_states = new_prefix[idx]
    beams.ortho = [beams.ortho[j] for j in keep_idx]
    beams.labels.append(tokens[idx])
    beams.parents.append(parents[idx])
    return beams


def apply_llm(beams: BeamSet, scorer, config: DecodeConfig, final: bool = False) -> BeamSet:
    """Replace every ortho entry's LM total with the external scorer's.

    Texts are gathered across all beams, deduplicated, and scored in
    chunks; each entry's total becomes ``llm_weight * score`` (0 for
    empty histories). The final pass also selects end-of-sentence
    punctuation per text and stores it on the entries. Each beam's
    score moves by the change of its best entry's total.
    """
    texts: list[str] = []
    seen: set[str] = set()
    for entries in beams.ortho:
        for entry in entries:
            text = beams.history.text(entry.node)
            if text and text not in seen:
                seen.add(text)
                texts.append(text)

    if final:
        results = score_eos(scorer, texts, config.llm_chunk_size)
        table = {t: r for t, r in zip(texts, results)}
    else:
        results = score_texts(scorer, texts, config.llm_chunk_size)
        table = {t: ("", s) for t, s in zip(texts, results)}

    for i, entries in enumerate(beams.ortho):
        best_prev = entries[0].lm_total
        rescored = []
        for entry in entries:
            text = beams.history.text(entry.node)
            if not text:
                rescored.append(entry._replace(lm_total=0.0, punct=""))
            else:
                punct, score = table[text]
                rescored.append(
                    entry._replace(
                        lm_total=config.llm_weight * score,
                        punct=punct if final else entry.punct,
                    )
                )
        rescored.sort(key=lambda e: (-e.lm_total, e.seq))
        beams.ortho[i] = tuple(rescored)
        beams.scores[i] += rescored[0].lm_total - best_prev
    return beams


def _close_utterance(beams: BeamSet, tt: TransitionTable, lm: LmSession, config: DecodeConfig):
    """End-of-utterance closure for beams stopped mid-word.

    A beam whose prefix completes at least one word gets an implicit
    word boundary (n-gram scored, no bonuses); a beam stranded on a
    proper prefix is pruned.
    """
    for i in range(beams.size):
        state = int(beams.prefix_states[i])
        if state == tt.root:
            continue
        ids = tt.completions_at(state)
        if ids:
            apply_ngram(beams, i, ids, lm, config)
            beams.prefix_states[i] = tt.root
        else:
            beams.scores[i] = NEG_INF

    alive = np.flatnonzero(beams.scores > NEG_INF_GUARD)
    if len(alive) == 0:
        raise EmptyBeamError("no hypothesis survived end-of-utterance closure")
    if len(alive) < beams.size:
        beams.scores = beams.scores[alive]
        beams.last_tokens = beams.last_tokens[alive]
        beams.hash1 = beams.hash1[alive]
        beams.hash2 = beams.hash2[alive]
        beams.prefix_states = beams.prefix_states[alive]
        beams.ortho = [beams.ortho[j] for j in alive]
        if beams.labels:
            beams.labels[-1] = beams.labels[-1][alive]
            beams.parents[-1] = beams.parents[-1][alive]


def decode(
    d: LogProbMatrix,
    config: DecodeConfig,
    tt: TransitionTable,
    lm: LmSession,
    scorer,
    final_llm_only: bool = False,
) -> DecodeResult:
    """Run the full search over a scaled log-probability matrix.

    ``final_llm_only`` disables the interval rescore events while
    keeping the mandatory end-of-utterance rescore, for ablations.
    """
    if d.num_frames == 0:
        raise DataValueError("cannot decode an empty log-probability matrix")
    start = time.perf_counter()
    beams = init_beams(config, tt, lm.registry)
    llm_events = 0
    for t in range(d.num_frames):
        step(beams, d.frames[t], t, config, tt, lm)
        if t > 0 and t % config.llm_rescore_interval == 0 and not final_llm_only:
            apply_llm(beams, scorer, config, final=False)
            llm_events += 1
    _close_utterance(beams, tt, lm, config)
    apply_llm(beams, scorer, config, final=True)

    ranked = np.lexsort((np.arange(beams.size), -beams.scores))
    nbest: list[tuple[str, float]] = []
    nbest_seen: set[str] = set()
    for i in ranked:
        entries = beams.ortho[i]
        best_lm = entries[0].lm_total
        for entry in entries:
            text = beams.history.text(entry.node) + entry.punct
            score = float(beams.scores[i] - best_lm + entry.lm_total)
            nbest.append((text, score))
    nbest.sort(key=lambda pair: -pair[1])
    deduped = []
    for text, score in nbest:
        if text not in nbest_seen:
            nbest_seen.add(text)
            deduped.append((text, score))

    best = int(ranked[0])
    top_entry = beams.ortho[best][0]
    return DecodeResult(
        text=beams.history.text(top_entry.node) + top_entry.punct,
        score=float(beams.scores[best]),
        nbest=deduped,
        frame_count=d.num_frames,
        wall_time_s=time.perf_counter() - start,
        llm_events=llm_events,
    )
