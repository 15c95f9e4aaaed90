"""Pydantic request/response models for the decoding service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    name: str
    version: str


class ScorerSpecModel(BaseModel):
    kind: Literal["stub_table", "stub_ngram", "subprocess", "tcp"]
    table: Optional[dict[str, float]] = None
    table_path: Optional[str] = None
    scale: float = 1.0
    delay_per_text_s: float = 0.0
    command: Optional[list[str]] = None
    address: Optional[str] = None
    timeout_s: Optional[float] = None


class EngineCreateRequest(BaseModel):
    vocab_path: str
    arpa_path: str
    lexicon_path: Optional[str] = None
    table_path: Optional[str] = None
    config: Optional[dict] = None  # field names or {"profile": "b2t24", ...overrides}
    config_path: Optional[str] = None
    scorer: ScorerSpecModel


class ComponentDigest(BaseModel):
    path: str
    sha256: str


class EngineInfo(BaseModel):
    engine_id: str
    config: dict
    components: dict[str, ComponentDigest]
    lexicon_entries: int
    table_states: int


class EngineList(BaseModel):
    engines: list[str]


class InlineLogits(BaseModel):
    frame_duration_ms: float
    logits: list[list[float]]


class DecodeRequest(BaseModel):
    logits_path: Optional[str] = None
    logits: Optional[InlineLogits] = None
    final_llm_only: bool = False


class NBestItem(BaseModel):
    text: str
    score: float


class DecodeResponse(BaseModel):
    text: str
    score: float
    nbest: list[NBestItem]
    frames: int
    wall_time_s: float
    duration_s: float
    rtf: float
    llm_events: int


class TableBuildRequest(BaseModel):
    lexicon_path: str
    vocab_path: str
    out_path: str


class TableBuildResponse(BaseModel):
    out_path: str
    states: int
    sink: int
    entries: int
    sha256: str


class WerRequest(BaseModel):
    reference: str
    hypothesis: str
    keep_punct: bool = False


class WerResponse(BaseModel):
    substitutions: int
    insertions: int
    deletions: int
    reference_words: int
    wer: float


class EvalUtterance(WerResponse):
    index: int
    reference: str
    hypothesis: str


class EvalRequest(BaseModel):
    ref_path: str
    hyp_path: str
    keep_punct: bool = False


class EvalResponse(BaseModel):
    utterances: list[EvalUtterance]
    mean_wer: float
    aggregate_wer: float = Field(description="total edits over total reference words")
    total_substitutions: int
    total_insertions: int
    total_deletions: int
    total_reference_words: int


class ProfilesResponse(BaseModel):
    profiles: dict[str, dict]


class ErrorResponse(BaseModel):
    error: str
    detail: str
