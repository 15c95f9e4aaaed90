"""External sentence-scorer contract used for interval LM rescoring.

The wire protocol is newline-delimited JSON over a sidecar's
stdin/stdout or a TCP socket, one request and one response object per
line, matched by ``id``:

    {"id": 7, "kind": "score", "texts": ["how are you", ...]}
    {"id": 7, "scores": [-8.13, ...]}

``score_eos`` requests additionally return the chosen end-of-sentence
punctuation per text. Requests are strictly serial per connection.
"""

from __future__ import annotations

import itertools
import json
import os
import queue
import socket
import subprocess
import threading
import time
from dataclasses import dataclass

from .errors import ScorerError
from .ngram import NGramModel, score_sequence

PUNCTS = (".", "?", "!")
DEFAULT_TIMEOUT_S = 60.0
TIMEOUT_ENV_VAR = "LIGHTBEAM_SCORER_TIMEOUT_S"


@dataclass(frozen=True)
class ScoreRequest:
    id: int
    kind: str  # "score" | "score_eos"
    texts: tuple[str, ...]


@dataclass(frozen=True)
class ScoreResponse:
    id: int
    scores: tuple[float, ...]
    puncts: tuple[str, ...] | None = None


def encode_request(req: ScoreRequest) -> str:
    return json.dumps({"id": req.id, "kind": req.kind, "texts": list(req.texts)})


def decode_request(line: str) -> ScoreRequest:
    obj = json.loads(line)
    return ScoreRequest(id=int(obj["id"]), kind=str(obj["kind"]), texts=tuple(obj["texts"]))


def encode_response(resp: ScoreResponse) -> str:
    obj: dict = {"id": resp.id, "scores": list(resp.scores)}
    if resp.puncts is not None:
        obj["puncts"] = list(resp.puncts)
    return json.dumps(obj)


def decode_response(line: str, expect_id: int | None = None) -> ScoreResponse:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ScorerError(f"malformed scorer reply: {exc}", expect_id) from exc
    if "error" in obj:
        raise ScorerError(f"scorer error: {obj['error']}", obj.get("id", expect_id))
    if "id" not in obj or "scores" not in obj:
        raise ScorerError("scorer reply missing id/scores", expect_id)
    resp = ScoreResponse(
        id=int(obj["id"]),
        scores=tuple(float(s) for s in obj["scores"]),
        puncts=tuple(obj["puncts"]) if "puncts" in obj else None,
    )
    if expect_id is not None and resp.id != expect_id:
        raise ScorerError(f"scorer reply id {resp.id} != request id {expect_id}", expect_id)
    return resp


def default_timeout_s() -> float:
    value = os.environ.get(TIMEOUT_ENV_VAR)
    if value:
        try:
            return float(value)
        except ValueError:
            pass
    return DEFAULT_TIMEOUT_S


class StubScorer:
    """Deterministic in-process scorer used in tests and offline runs.

    Backed either by a literal text -> score table (missing keys score
    ``-1.0 * word count``) or by an n-gram model, whose eos variants are
    scored with the end-of-sentence symbol appended. ``scale``
    multiplies every returned score; ``delay_per_text_s`` simulates
    per-text evaluation cost for benchmarking runs.
    """

    def __init__(
        self,
        table: dict[str, float] | None = None,
        ngram_model: NGramModel | None = None,
        scale: float = 1.0,
        delay_per_text_s: float = 0.0,
    ):
        if (table is None) == (ngram_model is None):
            raise ValueError("provide exactly one of table or ngram_model")
        self.table = table
        self.ngram_model = ngram_model
        self.scale = scale
        self.delay_per_text_s = delay_per_text_s
        self.evaluations = 0  # texts actually scored, for dedup tests
        self._request_ids = itertools.count(1)

    def next_request_id(self) -> int:
        return next(self._request_ids)

    def _score_one(self, text: str) -> float:
        if self.table is not None:
            if text in self.table:
                return self.scale * self.table[text]
            return self.scale * (-1.0 * len(text.split()))
        return self.scale * score_sequence(self.ngram_model, text.split())

    def _score_eos_one(self, text: str) -> tuple[str, float]:
        if self.table is not None:
            best_punct, best = PUNCTS[0], None
            for punct in PUNCTS:
                cand = text + punct
                s = self.scale * self.table[cand] if cand in self.table else self.scale * (
                    -1.0 * len(cand.split())
                )
                if best is None or s > best:
                    best_punct, best = punct, s
            return best_punct, best
        # The n-gram stub has no punctuation notion: all variants score
        # the sequence with </s>, so the tie-break picks ".".
        score = self.scale * score_sequence(self.ngram_model, text.split(), include_eos=True)
        return PUNCTS[0], score

    def submit(self, request: ScoreRequest) -> ScoreResponse:
        if self.delay_per_text_s > 0:
            time.sleep(self.delay_per_text_s * len(request.texts))
        self.evaluations += len(request.texts)
        if request.kind == "score":
            return ScoreResponse(
                id=request.id, scores=tuple(self._score_one(t) for t in request.texts)
            )
        if request.kind == "score_eos":
            pairs = [self._score_eos_one(t) for t in request.texts]
            return ScoreResponse(
                id=request.id,
                scores=tuple(s for _, s in pairs),
                puncts=tuple(p for p, _ in pairs),
            )
        raise ScorerError(f"unknown request kind {request.kind!r}", request.id)

    def close(self):
        pass


class _LineTransportScorer:
    """Shared JSONL framing for subprocess and TCP scorers."""

    def __init__(self, timeout_s: float | None):
        self.timeout_s = timeout_s if timeout_s is not None else default_timeout_s()
        self._lock = threading.Lock()
        self._request_ids = itertools.count(1)

    def next_request_id(self) -> int:
        return next(self._request_ids)

    def _send_line(self, line: str) -> None:
        raise NotImplementedError

    def _recv_line(self) -> str:
        raise NotImplementedError

    def submit(self, request: ScoreRequest) -> ScoreResponse:
        with self._lock:  # one in-flight request per connection
            try:
                self._send_line(encode_request(request))
                line = self._recv_line()
            except ScorerError:
                raise
            except OSError as exc:
                raise ScorerError(f"scorer transport failure: {exc}", request.id) from exc
            return decode_response(line, expect_id=request.id)


class SubprocessScorer(_LineTransportScorer):
    """Launches the scorer as a child process speaking JSONL on stdio."""

    def __init__(self, command: list[str], timeout_s: float | None = None):
        super().__init__(timeout_s)
        self.proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._reader = threading.Thread(target=self._pump, daemon=True)
        self._reader.start()

    def _pump(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _send_line(self, line: str) -> None:
        if self.proc.poll() is not None:
            raise ScorerError("scorer process has exited")
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()

    def _recv_line(self) -> str:
        try:
            line = self._lines.get(timeout=self.timeout_s)
        except queue.Empty:
            raise ScorerError(f"scorer timed out after {self.timeout_s}s") from None
        if line is None:
            raise ScorerError("scorer process closed its output")
        return line

    def close(self):
        if self.proc.poll() is None:
            self.proc.stdin.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()


class TcpScorer(_LineTransportScorer):
    """Connects to a scorer listening on host:port with identical framing."""

    def __init__(self, address: str, timeout_s: float | None = None):
        super().__init__(timeout_s)
        host, _, port = address.rpartition(":")
        if not host or not port.isdigit():
            raise ScorerError(f"bad scorer address {address!r}, expected host:port")
        self.sock = socket.create_connection((host, int(port)), timeout=self.timeout_s)
        self.sock.settimeout(self.timeout_s)
        self._rfile = self.sock.makefile("r", encoding="utf-8")

    def _send_line(self, line: str) -> None:
        self.sock.sendall((line + "\n").encode("utf-8"))

    def _recv_line(self) -> str:
        try:
            line = self._rfile.readline()
        except socket.timeout:
            raise ScorerError(f"scorer timed out after {self.timeout_s}s") from None
        if not line:
            raise ScorerError("scorer connection closed")
        return line

    def close(self):
        self._rfile.close()
        self.sock.close()


def _batched_unique(texts: list[str], chunk_size: int) -> tuple[list[str], list[int]]:
    unique: list[str] = []
    index: dict[str, int] = {}
    positions = []
    for text in texts:
        pos = index.get(text)
        if pos is None:
            pos = len(unique)
            index[text] = pos
            unique.append(text)
        positions.append(pos)
    if chunk_size < 1:
        raise ValueError("chunk_size must be >= 1")
    return unique, positions


def score_texts(scorer, texts: list[str], chunk_size: int) -> list[float]:
    """Score texts via the scorer, deduplicating and chunking requests.

    Order-preserving: result[i] corresponds to texts[i]; identical
    inputs share a single evaluation.
    """
    if not texts:
        return []
    unique, positions = _batched_unique(texts, chunk_size)
    scores: list[float] = []
    for start in range(0, len(unique), chunk_size):
        chunk = unique[start : start + chunk_size]
        resp = scorer.submit(
            ScoreRequest(id=scorer.next_request_id(), kind="score", texts=tuple(chunk))
        )
        if len(resp.scores) != len(chunk):
            raise ScorerError(
                f"scorer returned {len(resp.scores)} scores for {len(chunk)} texts", resp.id
            )
        scores.extend(resp.scores)
    return [scores[p] for p in positions]


def score_eos(scorer, texts: list[str], chunk_size: int = 256) -> list[tuple[str, float]]:
    """End-of-sentence variant: (chosen punctuation, score) per text."""
    if not texts:
        return []
    unique, positions = _batched_unique(texts, chunk_size)
    results: list[tuple[str, float]] = []
    for start in range(0, len(unique), chunk_size):
        chunk = unique[start : start + chunk_size]
        resp = scorer.submit(
            ScoreRequest(id=scorer.next_request_id(), kind="score_eos", texts=tuple(chunk))
        )
        if resp.puncts is None or len(resp.scores) != len(chunk) or len(resp.puncts) != len(chunk):
            raise ScorerError("score_eos reply missing puncts or wrong length", resp.id)
        for punct, score in zip(resp.puncts, resp.scores):
            if punct not in PUNCTS:
                raise ScorerError(f"scorer chose invalid punctuation {punct!r}", resp.id)
            results.append((punct, score))
    return [results[p] for p in positions]
