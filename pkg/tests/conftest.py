"""Shared fixtures: tiny vocabularies, lexicons, and toy LM builders."""

from __future__ import annotations

import numpy as np
import pytest

_acceptance_results: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        _acceptance_results[report.nodeid.split("::")[-1]] = report.outcome
    elif report.when == "setup" and report.outcome == "skipped" \
            and "test_acceptance.py" in report.nodeid:
        _acceptance_results[report.nodeid.split("::")[-1]] = "skipped"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        mark = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{mark}] {name}")

from lightbeam import (
    Lexicon,
    LexiconEntry,
    RawLogits,
    Vocabulary,
    build_toy_arpa,
    build_transition_table,
    load_arpa,
    scale_log_softmax,
)

# Tiny five-token inventory: blank, three phonemes, space.
AE, N, T_, SP = 1, 2, 3, 4
BLANK = 0


@pytest.fixture
def tiny_vocab() -> Vocabulary:
    return Vocabulary(tokens=("<blank>", "AE", "N", "T", "<sp>"), blank_id=0, space_id=4)


@pytest.fixture
def ant_lexicon(tiny_vocab) -> Lexicon:
    return Lexicon(
        entries=(
            LexiconEntry(key="ant", surface="ant", phonemes=(AE, N, T_)),
            LexiconEntry(key="aunt", surface="aunt", phonemes=(AE, N, T_)),
            LexiconEntry(key="at", surface="at", phonemes=(AE, T_)),
            LexiconEntry(key="an", surface="an", phonemes=(AE, N)),
        )
    )


@pytest.fixture
def ant_table(ant_lexicon, tiny_vocab):
    return build_transition_table(ant_lexicon, tiny_vocab)


# Trigram toy model exercising direct hits, single/double backoff and <unk>.
TRIGRAM_SPEC = [
    (("<s>",), -99.0, -0.30103),
    (("</s>",), -0.60206),
    (("a",), -0.47712, -0.30103),
    (("b",), -0.60206, -0.17609),
    (("<unk>",), -1.0),
    (("<s>", "a"), -0.30103, -0.09691),
    (("a", "b"), -0.52288, -0.22185),
    (("b", "a"), -0.39794, -0.15490),
    (("a", "</s>"), -0.30103),
    (("<s>", "a", "b"), -0.15490),
    (("a", "b", "a"), -0.45593),
]


@pytest.fixture
def trigram_model(tmp_path):
    path = tmp_path / "trigram.arpa"
    path.write_text(build_toy_arpa(TRIGRAM_SPEC))
    return load_arpa(path)


def sentence_bigram_spec(surfaces: list[str], seed: int = 0, include_unk: bool = True):
    """Deterministic bigram spec over the given word surfaces."""
    rng = np.random.default_rng(seed)
    spec = [(("<s>",), -99.0, round(float(rng.uniform(-0.4, -0.05)), 5)),
            (("</s>",), round(float(rng.uniform(-1.2, -0.4)), 5))]
    if include_unk:
        spec.append((("<unk>",), round(float(rng.uniform(-2.5, -1.5)), 5)))
    for word in surfaces:
        spec.append(
            ((word,), round(float(rng.uniform(-1.2, -0.3)), 5),
             round(float(rng.uniform(-0.4, -0.05)), 5))
        )
    contexts = ["<s>"] + list(surfaces)
    nexts = list(surfaces) + ["</s>"]
    for ctx in contexts:
        for nxt in nexts:
            if rng.uniform() < 0.5:
                spec.append(((ctx, nxt), round(float(rng.uniform(-1.0, -0.1)), 5)))
    return spec


def one_hot_logits(token_path: list[int], vocab_size: int, peak: float = 40.0,
                   frame_duration_ms: float = 100.0) -> RawLogits:
    frames = np.full((len(token_path), vocab_size), -peak, dtype=np.float32)
    for t, tok in enumerate(token_path):
        frames[t, tok] = peak
    return RawLogits(frames=frames, frame_duration_ms=frame_duration_ms)


def scaled(raw: RawLogits, alpha: float):
    return scale_log_softmax(raw, alpha)


def write_vocab(path, tokens=("<blank>", "AE", "N", "T", "<sp>")):
    path.write_text("\n".join(tokens) + "\n")
    return path


def random_instance(seed: int, *, exhaustive_safe: bool = True, t_max: int = 6):
    """Deterministic random decode instance over the five-token inventory.

    With ``exhaustive_safe`` the lexicon has at most three distinct
    two-phoneme pronunciations (plus one homophone pair), which keeps
    the number of simultaneously valid candidates well under 256 at
    every frame, so a k=256 beam provably never prunes a valid path.
    """
    import itertools

    from lightbeam import StubScorer, build_transition_table, load_arpa

    rng = np.random.default_rng(seed)
    vocab = Vocabulary(tokens=("<blank>", "AE", "N", "T", "<sp>"), blank_id=0, space_id=4)

    if exhaustive_safe:
        all_seqs = [tuple(p) for p in itertools.product([AE, N, T_], repeat=2)]
        picks = rng.choice(len(all_seqs), size=3, replace=False)
        seqs = [all_seqs[i] for i in picks]
        entries = [LexiconEntry(f"w{i}", f"w{i}", seq) for i, seq in enumerate(seqs)]
        entries.append(LexiconEntry("w0(2)", "w0x", seqs[0]))  # homophone pair
    else:
        entries = []
        used = set()
        for i in range(int(rng.integers(2, 6))):
            length = int(rng.integers(1, 4))
            seq = tuple(int(rng.choice([AE, N, T_])) for _ in range(length))
            key = f"w{i}"
            entries.append(LexiconEntry(key, key, seq))
            used.add(seq)
        if rng.uniform() < 0.5:  # sometimes add a homophone of the first word
            entries.append(LexiconEntry("w0(2)", "w0x", entries[0].phonemes))
    lexicon = Lexicon(entries=tuple(entries))
    table = build_transition_table(lexicon, vocab)

    surfaces = sorted({e.surface for e in lexicon.entries})
    include_unk = bool(rng.uniform() < 0.7)
    spec = sentence_bigram_spec(surfaces, seed=seed + 1, include_unk=include_unk)
    import os
    import tempfile

    fd, arpa_path = tempfile.mkstemp(suffix=".arpa")
    with os.fdopen(fd, "w") as fh:
        fh.write(build_toy_arpa(spec))
    model = load_arpa(arpa_path)
    os.unlink(arpa_path)

    stub_table = {}
    for one in surfaces:
        stub_table[one] = round(float(rng.uniform(-4, -0.5)), 4)
        for punct in ".?!":
            stub_table[one + punct] = round(float(rng.uniform(-4, -0.5)), 4)
        for two in surfaces:
            text = f"{one} {two}"
            stub_table[text] = round(float(rng.uniform(-6, -1)), 4)
            for punct in ".?!":
                stub_table[text + punct] = round(float(rng.uniform(-6, -1)), 4)
    scorer = StubScorer(table=stub_table)

    t = int(rng.integers(1, t_max + 1))
    raw = RawLogits(
        frames=rng.normal(scale=2.0, size=(t, 5)).astype(np.float32),
        frame_duration_ms=100.0,
    )
    d = scale_log_softmax(raw, 0.6)
    return d, table, model, scorer

