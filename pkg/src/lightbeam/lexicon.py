"""Pronunciation lexicon and its dense state-transition-table compilation.

The lexicon's prefix trie is flattened into an ``(S, V)`` integer matrix:
row = prefix state, column = token, entry = successor state, with an
absorbing sink row for invalid transitions. Word-boundary gating is part
of the table: the space column points back to the root exactly at states
where at least one word completes, and to the sink everywhere else. The
blank column always points to the sink; blank validity is handled by the
decoder's unconditional rule and never consults the table.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .vocab import Vocabulary

LBTT_MAGIC = b"LBTT"
LBTT_VERSION = 1

_VARIANT_RE = re.compile(r"\((\d+)\)$")


def strip_variant(lexicon_key: str) -> str:
    """Drop one trailing parenthesized integer, e.g. ``read(2) -> read``."""
    return _VARIANT_RE.sub("", lexicon_key)


@dataclass(frozen=True)
class LexiconEntry:
    key: str
    surface: str
    phonemes: tuple[int, ...]


@dataclass(frozen=True)
class Lexicon:
    entries: tuple[LexiconEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def surfaces(self) -> set[str]:
        return {e.surface for e in self.entries}


def load_lexicon(path: str | Path, vocab: Vocabulary) -> Lexicon:
    """Parse a CMU-style lexicon: one ``key PH ON EMES`` entry per line.

    Keys are lowercased; pronunciation variants use ``word(2)``-style
    keys and share the stripped surface form. Unknown phoneme tokens and
    duplicate keys are format errors.
    """
    entries: list[LexiconEntry] = []
    seen_keys: set[str] = set()
    token_ids = {tok: i for i, tok in enumerate(vocab.tokens)}
    reserved = {vocab.blank_id, vocab.space_id}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise FormatError(f"{path}:{lineno}: entry needs a key and at least one phoneme")
        key = parts[0].lower()
        if key in seen_keys:
            raise FormatError(f"{path}:{lineno}: duplicate lexicon key {key!r}")
        seen_keys.add(key)
        ids = []
        for tok in parts[1:]:
            tid = token_ids.get(tok)
            if tid is None or tid in reserved:
                raise FormatError(f"{path}:{lineno}: unknown phoneme token {tok!r}")
            ids.append(tid)
        entries.append(LexiconEntry(key=key, surface=strip_variant(key), phonemes=tuple(ids)))
    return Lexicon(entries=tuple(entries))


class TransitionTable:
    """Dense lexicon automaton with per-state word completions."""

    def __init__(
        self,
        table: np.ndarray,
        sink: int,
        completions: dict[int, tuple[int, ...]],
        entries: tuple[LexiconEntry, ...],
        blank_id: int,
        space_id: int,
    ):
        self.table = table  # (S, V) int32
        self.root = 0
        self.sink = sink
        self.blank_id = blank_id
        self.space_id = space_id
        self._completions = completions
        self.entries = entries

    @property
    def num_states(self) -> int:
        return self.table.shape[0]

    @property
    def vocab_size(self) -> int:
        return self.table.shape[1]

    def advance(self, state: int, token: int) -> int:
        """Successor state for one (state, token) pair; pure table lookup."""
        if not (0 <= state < self.num_states):
            raise IndexError(f"state {state} out of range [0, {self.num_states})")
        if not (0 <= token < self.vocab_size):
            raise IndexError(f"token {token} out of range [0, {self.vocab_size})")
        return int(self.table[state, token])

    def advance_many(self, states: np.ndarray, tokens: np.ndarray) -> np.ndarray:
        return self.table[states, tokens]

    def valid_mask(self, states: np.ndarray, last_tokens: np.ndarray) -> np.ndarray:
        """(K, V) boolean mask of permitted extensions per hypothesis.

        A token is valid if it is the blank, a repeat of the hypothesis'
        most recent non-blank token, or advances to a non-sink state.
        """
        states = np.asarray(states)
        last_tokens = np.asarray(last_tokens)
        if states.shape != last_tokens.shape:
            raise ValueError("states and last_tokens must have equal length")
        mask = self.table[states] != self.sink
        mask[:, self.blank_id] = True
        mask[np.arange(len(states)), last_tokens] = True
        return mask

    def completions_at(self, state: int) -> tuple[int, ...]:
        """Entry ids of lexicon words whose full pronunciation ends at ``state``."""
        if not (0 <= state < self.num_states):
            raise IndexError(f"state {state} out of range [0, {self.num_states})")
        return self._completions.get(state, ())

    def completion_states(self) -> list[int]:
        return sorted(self._completions)


def build_transition_table(lex: Lexicon, vocab: Vocabulary) -> TransitionTable:
    """Compile the lexicon trie into a dense transition table.

    States are numbered in breadth-first order (children visited in
    ascending token id), root = 0, sink = S - 1, so repeated builds of
    the same lexicon are bit-identical.
    """
    if not lex.entries:
        raise FormatError("cannot build a transition table from an empty lexicon")

    # Trie as a flat dict keyed by (state, token); keeps peak memory low
    # for six-figure lexicons.
    children: dict[tuple[int, int], int] = {}
    terminal: dict[int, list[int]] = {}
    next_tmp = 1
    for entry_id, entry in enumerate(lex.entries):
        state = 0
        for tok in entry.phonemes:
            nxt = children.get((state, tok))
            if nxt is None:
                nxt = next_tmp
                next_tmp += 1
                children[(state, tok)] = nxt
            state = nxt
        terminal.setdefault(state, []).append(entry_id)

    # Renumber breadth-first for a stable layout.
    order = {0: 0}
    by_parent: dict[int, list[tuple[int, int]]] = {}
    for (parent, tok), child in children.items():
        by_parent.setdefault(parent, []).append((tok, child))
    queue = [0]
    while queue:
        nxt_queue = []
        for parent in queue:
            for tok, child in sorted(by_parent.get(parent, ())):
                order[child] = len(order)
                nxt_queue.append(child)
        queue = nxt_queue

    num_states = len(order) + 1
    sink = num_states - 1
    table = np.full((num_states, len(vocab)), sink, dtype=np.int32)
    for (parent, tok), child in children.items():
        table[order[parent], tok] = order[child]
    completions = {
        order[state]: tuple(ids) for state, ids in terminal.items()
    }
    table[:, vocab.space_id] = sink
    if completions:
        table[np.fromiter(completions, dtype=np.int64), vocab.space_id] = 0
    table[:, vocab.blank_id] = sink
    table[sink, :] = sink
    return TransitionTable(
        table=table,
        sink=sink,
        completions=completions,
        entries=lex.entries,
        blank_id=vocab.blank_id,
        space_id=vocab.space_id,
    )


def save_table(path: str | Path, tt: TransitionTable) -> None:
    """Serialize in the LBTT binary format.

    Layout: magic, u32 version, u32 S, u32 V, u32 sink, S*V u32 state
    ids (row-major), u32 completion-record count, records of (u32 state,
    u32 count, count * u32 entry ids), then the entry string table as
    u32 entry count followed by length-prefixed UTF-8 lexicon keys.
    """
    with open(path, "wb") as fh:
        fh.write(LBTT_MAGIC)
        fh.write(struct.pack("<IIII", LBTT_VERSION, tt.num_states, tt.vocab_size, tt.sink))
        fh.write(np.ascontiguousarray(tt.table, dtype="<u4").tobytes())
        states = tt.completion_states()
        fh.write(struct.pack("<I", len(states)))
        for state in states:
            ids = tt.completions_at(state)
            fh.write(struct.pack(f"<II{len(ids)}I", state, len(ids), *ids))
        fh.write(struct.pack("<I", len(tt.entries)))
        for entry in tt.entries:
            raw = entry.key.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def load_table(path: str | Path, vocab: Vocabulary) -> TransitionTable:
    data = Path(path).read_bytes()
    if data[:4] != LBTT_MAGIC:
        raise FormatError(f"{path}: bad magic, not an LBTT file")
    version, s, v, sink = struct.unpack_from("<IIII", data, 4)
    if version != LBTT_VERSION:
        raise FormatError(f"{path}: unsupported LBTT version {version}")
    if v != len(vocab):
        raise FormatError(f"{path}: table vocabulary size {v} != expected {len(vocab)}")
    off = 20
    need = 4 * s * v
    if len(data) < off + need:
        raise FormatError(f"{path}: truncated state table")
    table = np.frombuffer(data, dtype="<u4", count=s * v, offset=off).reshape(s, v)
    table = table.astype(np.int32)
    off += need
    (n_records,) = struct.unpack_from("<I", data, off)
    off += 4
    completions: dict[int, tuple[int, ...]] = {}
    for _ in range(n_records):
        state, count = struct.unpack_from("<II", data, off)
        off += 8
        ids = struct.unpack_from(f"<{count}I", data, off)
        off += 4 * count
        completions[state] = tuple(ids)
    (n_entries,) = struct.unpack_from("<I", data, off)
    off += 4
    entries = []
    for _ in range(n_entries):
        (ln,) = struct.unpack_from("<I", data, off)
        off += 4
        key = data[off : off + ln].decode("utf-8")
        off += ln
        entries.append(LexiconEntry(key=key, surface=strip_variant(key), phonemes=()))
    return TransitionTable(
        table=table,
        sink=sink,
        completions=completions,
        entries=tuple(entries),
        blank_id=vocab.blank_id,
        space_id=vocab.space_id,
    )
