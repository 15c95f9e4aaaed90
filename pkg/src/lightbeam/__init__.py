"""Lexicon-constrained CTC beam-search decoding with staged LM fusion."""

__version__ = "0.1.0"

from .config import PROFILES, DecodeConfig, config_from_dict, load_config
from .decoder import BeamSet, DecodeResult, apply_llm, apply_ngram, decode, init_beams, step
from .errors import (
    BuilderError,
    ConfigError,
    DataValueError,
    EmptyBeamError,
    FormatError,
    InstanceTooLargeError,
    LightBeamError,
    MetricError,
    ScorerError,
    ShapeError,
)
from .lexicon import (
    Lexicon,
    LexiconEntry,
    TransitionTable,
    build_transition_table,
    load_lexicon,
    load_table,
    save_table,
    strip_variant,
)
from .logits import LogProbMatrix, RawLogits, load_logits, save_logits, scale_log_softmax
from .metrics import RtfSample, WerBreakdown, rtf, wer
from .ngram import (
    LmSession,
    LmStateRegistry,
    NGramModel,
    load_arpa,
    score_sequence,
    score_word,
)
from .oracle import build_toy_arpa, collapse_ctc, exhaustive_decode
from .scorer import (
    ScoreRequest,
    ScoreResponse,
    StubScorer,
    SubprocessScorer,
    TcpScorer,
    score_eos,
    score_texts,
)
from .vocab import Vocabulary, load_vocab, save_vocab

__all__ = [name for name in dir() if not name.startswith("_")]
