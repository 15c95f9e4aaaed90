"""Component loading and per-utterance orchestration for the service/CLI."""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from pathlib import Path

from .config import DecodeConfig, config_from_dict, load_config
from .decoder import DecodeResult, decode
from .errors import ConfigError
from .lexicon import TransitionTable, build_transition_table, load_lexicon, load_table
from .logits import LogProbMatrix, RawLogits, load_logits, scale_log_softmax
from .metrics import rtf
from .ngram import LmSession, NGramModel, load_arpa
from .scorer import StubScorer, SubprocessScorer, TcpScorer
from .vocab import Vocabulary, load_vocab


def sha256_of(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def peak_rss_bytes() -> int | None:
    """Best-effort peak resident set size of this process."""
    try:
        import resource

        kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
        return int(kb) * 1024  # Linux reports KiB
    except Exception:
        return None


@dataclass
class ScorerSpec:
    """How to construct the external scorer for an engine."""

    kind: str  # "stub_table" | "stub_ngram" | "subprocess" | "tcp"
    table: dict[str, float] | None = None
    table_path: str | None = None
    scale: float = 1.0
    delay_per_text_s: float = 0.0
    command: list[str] | None = None
    address: str | None = None
    timeout_s: float | None = None

    def build(self, ngram_model: NGramModel):
        if self.kind == "stub_table":
            table = self.table
            if table is None and self.table_path:
                table = json.loads(Path(self.table_path).read_text(encoding="utf-8"))
            if table is None:
                table = {}
            return StubScorer(table=dict(table), scale=self.scale,
                              delay_per_text_s=self.delay_per_text_s)
        if self.kind == "stub_ngram":
            return StubScorer(ngram_model=ngram_model, scale=self.scale,
                              delay_per_text_s=self.delay_per_text_s)
        if self.kind == "subprocess":
            if not self.command:
                raise ConfigError("subprocess scorer needs a command")
            return SubprocessScorer(self.command, timeout_s=self.timeout_s)
        if self.kind == "tcp":
            if not self.address:
                raise ConfigError("tcp scorer needs an address")
            return TcpScorer(self.address, timeout_s=self.timeout_s)
        raise ConfigError(f"unknown scorer kind {self.kind!r}")


@dataclass
class UtteranceRecord:
    input: str
    transcript: str | None
    score: float | None
    frames: int | None
    wall_time_s: float | None
    rtf: float | None
    error: str | None = None


class Engine:
    """A loaded component set ready to decode utterances.

    The vocabulary, transition table, n-gram model and config are
    immutable after construction and shared by concurrent decode
    sessions; each utterance gets a fresh LM registry/cache. The scorer
    connection is serial, guarded by its own lock.
    """

    def __init__(
        self,
        vocab: Vocabulary,
        table: TransitionTable,
        ngram_model: NGramModel,
        config: DecodeConfig,
        scorer,
        components: dict[str, dict],
    ):
        self.vocab = vocab
        self.table = table
        self.ngram_model = ngram_model
        self.config = config
        self.scorer = scorer
        self.components = components  # name -> {"path":…, "sha256":…}

    def decode_matrix(self, d: LogProbMatrix, final_llm_only: bool = False) -> DecodeResult:
        lm = LmSession(self.ngram_model)
        return decode(d, self.config, self.table, lm, self.scorer, final_llm_only=final_llm_only)

    def decode_raw(self, raw: RawLogits, final_llm_only: bool = False):
        d = scale_log_softmax(raw, self.config.acoustic_scale)
        result = self.decode_matrix(d, final_llm_only=final_llm_only)
        sample = rtf(result.wall_time_s, result.frame_count, raw.frame_duration_ms)
        return result, sample

    def decode_path(self, path: str | Path, final_llm_only: bool = False):
        raw = load_logits(path, self.vocab)
        return self.decode_raw(raw, final_llm_only=final_llm_only)

    def close(self):
        if hasattr(self.scorer, "close"):
            self.scorer.close()


def build_engine(
    vocab_path: str | Path,
    arpa_path: str | Path,
    scorer_spec: ScorerSpec,
    lexicon_path: str | Path | None = None,
    table_path: str | Path | None = None,
    config: DecodeConfig | None = None,
    config_path: str | Path | None = None,
    config_overrides: dict | None = None,
) -> Engine:
    if (lexicon_path is None) == (table_path is None):
        raise ConfigError("provide exactly one of lexicon_path or table_path")
    if config is None:
        if config_path is not None:
            config = load_config(config_path)
        elif config_overrides is not None:
            config = config_from_dict(config_overrides)
        else:
            raise ConfigError("no decoding config given")
    elif config_overrides:
        config = config.replace(**config_overrides)

    vocab = load_vocab(vocab_path)
    components = {"vocab": {"path": str(vocab_path), "sha256": sha256_of(vocab_path)}}
    if lexicon_path is not None:
        table = build_transition_table(load_lexicon(lexicon_path, vocab), vocab)
        components["lexicon"] = {"path": str(lexicon_path), "sha256": sha256_of(lexicon_path)}
    else:
        table = load_table(table_path, vocab)
        components["table"] = {"path": str(table_path), "sha256": sha256_of(table_path)}
    ngram_model = load_arpa(arpa_path)
    components["arpa"] = {"path": str(arpa_path), "sha256": sha256_of(arpa_path)}
    if scorer_spec.table_path:
        components["stub_table"] = {
            "path": str(scorer_spec.table_path),
            "sha256": sha256_of(scorer_spec.table_path),
        }
    scorer = scorer_spec.build(ngram_model)
    return Engine(
        vocab=vocab,
        table=table,
        ngram_model=ngram_model,
        config=config,
        scorer=scorer,
        components=components,
    )


class EngineRegistry:
    """Named engines held by a service process; ids are sequential."""

    def __init__(self):
        self._engines: dict[str, Engine] = {}
        self._lock = threading.Lock()
        self._counter = 0

    def add(self, engine: Engine) -> str:
        with self._lock:
            self._counter += 1
            engine_id = f"eng-{self._counter}"
            self._engines[engine_id] = engine
            return engine_id

    def get(self, engine_id: str) -> Engine | None:
        with self._lock:
            return self._engines.get(engine_id)

    def remove(self, engine_id: str) -> bool:
        with self._lock:
            engine = self._engines.pop(engine_id, None)
        if engine is None:
            return False
        engine.close()
        return True

    def list_ids(self) -> list[str]:
        with self._lock:
            return sorted(self._engines, key=lambda k: int(k.split("-")[1]))
