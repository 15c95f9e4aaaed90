"""FastAPI service wrapping the decoding engine.

Components (vocabulary, lexicon table, n-gram model, scorer, config)
are loaded once into a named engine; decode requests then reference the
engine id and either a server-local logits path or an inline matrix.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import PROFILES
from ..engine import Engine, EngineRegistry, ScorerSpec, build_engine, sha256_of
from ..errors import (
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
from ..lexicon import build_transition_table, load_lexicon, save_table
from ..logits import RawLogits
from ..metrics import wer
from ..vocab import load_vocab
from . import schemas

import numpy as np

_BAD_REQUEST = (
    FormatError,
    ShapeError,
    DataValueError,
    ConfigError,
    MetricError,
    BuilderError,
    InstanceTooLargeError,
)


def _engine_info(engine_id: str, engine: Engine) -> schemas.EngineInfo:
    return schemas.EngineInfo(
        engine_id=engine_id,
        config=engine.config.as_dict(),
        components={
            name: schemas.ComponentDigest(**digest) for name, digest in engine.components.items()
        },
        lexicon_entries=len(engine.table.entries),
        table_states=engine.table.num_states,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="lightbeam", version=__version__)
    registry = EngineRegistry()
    app.state.engines = registry

    @app.exception_handler(LightBeamError)
    async def lightbeam_error_handler(request: Request, exc: LightBeamError):
        if isinstance(exc, _BAD_REQUEST):
            status = 400
        elif isinstance(exc, EmptyBeamError):
            status = 422
        elif isinstance(exc, ScorerError):
            status = 502
        else:
            status = 500
        return JSONResponse(
            status_code=status,
            content=schemas.ErrorResponse(
                error=type(exc).__name__, detail=str(exc)
            ).model_dump(),
        )

    @app.exception_handler(FileNotFoundError)
    async def missing_file_handler(request: Request, exc: FileNotFoundError):
        return JSONResponse(
            status_code=400,
            content=schemas.ErrorResponse(error="FileNotFoundError", detail=str(exc)).model_dump(),
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", name="lightbeam", version=__version__)

    @app.get("/profiles", response_model=schemas.ProfilesResponse)
    def profiles():
        return schemas.ProfilesResponse(
            profiles={name: cfg.as_dict() for name, cfg in PROFILES.items()}
        )

    @app.post("/engines", response_model=schemas.EngineInfo)
    def create_engine(req: schemas.EngineCreateRequest):
        spec = ScorerSpec(**req.scorer.model_dump())
        engine = build_engine(
            vocab_path=req.vocab_path,
            arpa_path=req.arpa_path,
            scorer_spec=spec,
            lexicon_path=req.lexicon_path,
            table_path=req.table_path,
            config_path=req.config_path,
            config_overrides=req.config,
        )
        engine_id = registry.add(engine)
        return _engine_info(engine_id, engine)

    @app.get("/engines", response_model=schemas.EngineList)
    def list_engines():
        return schemas.EngineList(engines=registry.list_ids())

    @app.get("/engines/{engine_id}", response_model=schemas.EngineInfo)
    def get_engine(engine_id: str):
        engine = registry.get(engine_id)
        if engine is None:
            return JSONResponse(
                status_code=404,
                content=schemas.ErrorResponse(
                    error="NotFound", detail=f"no engine {engine_id!r}"
                ).model_dump(),
            )
        return _engine_info(engine_id, engine)

    @app.delete("/engines/{engine_id}")
    def delete_engine(engine_id: str):
        if not registry.remove(engine_id):
            return JSONResponse(
                status_code=404,
                content=schemas.ErrorResponse(
                    error="NotFound", detail=f"no engine {engine_id!r}"
                ).model_dump(),
            )
        return {"deleted": engine_id}

    @app.post("/engines/{engine_id}/decode", response_model=schemas.DecodeResponse)
    def decode_utterance(engine_id: str, req: schemas.DecodeRequest):
        engine = registry.get(engine_id)
        if engine is None:
            return JSONResponse(
                status_code=404,
                content=schemas.ErrorResponse(
                    error="NotFound", detail=f"no engine {engine_id!r}"
                ).model_dump(),
            )
        if (req.logits_path is None) == (req.logits is None):
            raise ConfigError("provide exactly one of logits_path or logits")
        if req.logits_path is not None:
            result, sample = engine.decode_path(req.logits_path, final_llm_only=req.final_llm_only)
        else:
            raw = RawLogits(
                frames=np.asarray(req.logits.logits, dtype=np.float32),
                frame_duration_ms=req.logits.frame_duration_ms,
            )
            result, sample = engine.decode_raw(raw, final_llm_only=req.final_llm_only)
        return schemas.DecodeResponse(
            text=result.text,
            score=result.score,
            nbest=[schemas.NBestItem(text=t, score=s) for t, s in result.nbest],
            frames=result.frame_count,
            wall_time_s=result.wall_time_s,
            duration_s=sample.utterance_duration_s,
            rtf=sample.rtf,
            llm_events=result.llm_events,
        )

    @app.post("/tables", response_model=schemas.TableBuildResponse)
    def build_table(req: schemas.TableBuildRequest):
        vocab = load_vocab(req.vocab_path)
        table = build_transition_table(load_lexicon(req.lexicon_path, vocab), vocab)
        save_table(req.out_path, table)
        return schemas.TableBuildResponse(
            out_path=req.out_path,
            states=table.num_states,
            sink=table.sink,
            entries=len(table.entries),
            sha256=sha256_of(req.out_path),
        )

    @app.post("/wer", response_model=schemas.WerResponse)
    def compute_wer(req: schemas.WerRequest):
        breakdown = wer(req.reference.split(), req.hypothesis.split(), keep_punct=req.keep_punct)
        return schemas.WerResponse(
            substitutions=breakdown.substitutions,
            insertions=breakdown.insertions,
            deletions=breakdown.deletions,
            reference_words=breakdown.reference_words,
            wer=breakdown.wer,
        )

    @app.post("/eval", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        refs = Path(req.ref_path).read_text(encoding="utf-8").splitlines()
        hyps = Path(req.hyp_path).read_text(encoding="utf-8").splitlines()
        if len(refs) != len(hyps):
            raise MetricError(
                f"reference has {len(refs)} lines but hypothesis has {len(hyps)}"
            )
        utterances = []
        totals = {"s": 0, "i": 0, "d": 0, "n": 0}
        for idx, (ref, hyp) in enumerate(zip(refs, hyps)):
            breakdown = wer(ref.split(), hyp.split(), keep_punct=req.keep_punct)
            totals["s"] += breakdown.substitutions
            totals["i"] += breakdown.insertions
            totals["d"] += breakdown.deletions
            totals["n"] += breakdown.reference_words
            utterances.append(
                schemas.EvalUtterance(
                    index=idx,
                    reference=ref,
                    hypothesis=hyp,
                    substitutions=breakdown.substitutions,
                    insertions=breakdown.insertions,
                    deletions=breakdown.deletions,
                    reference_words=breakdown.reference_words,
                    wer=breakdown.wer,
                )
            )
        return schemas.EvalResponse(
            utterances=utterances,
            mean_wer=sum(u.wer for u in utterances) / len(utterances) if utterances else 0.0,
            aggregate_wer=(totals["s"] + totals["i"] + totals["d"]) / totals["n"]
            if totals["n"]
            else 0.0,
            total_substitutions=totals["s"],
            total_insertions=totals["i"],
            total_deletions=totals["d"],
            total_reference_words=totals["n"],
        )

    return app


app = create_app()
