import json
import socket
import sys
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lightbeam import (
    ScoreRequest,
    ScoreResponse,
    ScorerError,
    StubScorer,
    SubprocessScorer,
    TcpScorer,
    build_toy_arpa,
    load_arpa,
    score_eos,
    score_sequence,
    score_texts,
)
from lightbeam.scorer import decode_request, decode_response, encode_request, encode_response

from conftest import TRIGRAM_SPEC

# Minimal protocol-conformant scorer: score = -len(words), eos prefers "?".
ECHO_SCORER = r"""
import json, sys
for line in sys.stdin:
    req = json.loads(line)
    texts = req["texts"]
    if req["kind"] == "score":
        out = {"id": req["id"], "scores": [-float(len(t.split())) for t in texts]}
    else:
        out = {"id": req["id"],
               "scores": [-float(len(t.split())) - 0.5 for t in texts],
               "puncts": ["?" for t in texts]}
    sys.stdout.write(json.dumps(out) + "\n")
    sys.stdout.flush()
"""


def test_protocol_roundtrip():
    req = ScoreRequest(id=7, kind="score", texts=("a b", "c"))
    assert decode_request(encode_request(req)) == req
    resp = ScoreResponse(id=7, scores=(-1.5, -2.0))
    assert decode_response(encode_response(resp), expect_id=7) == resp
    eos = ScoreResponse(id=8, scores=(-1.0,), puncts=("?",))
    assert decode_response(encode_response(eos), expect_id=8) == eos


@settings(max_examples=50, deadline=None)
@given(
    req_id=st.integers(0, 2**53 - 1),
    kind=st.sampled_from(["score", "score_eos"]),
    texts=st.lists(st.text(alphabet=st.characters(codec="utf-8"), max_size=20), max_size=5),
    scores=st.lists(st.floats(allow_nan=False, allow_infinity=False, width=32), max_size=5),
)
def test_protocol_roundtrip_property(req_id, kind, texts, scores):
    req = ScoreRequest(id=req_id, kind=kind, texts=tuple(texts))
    assert decode_request(encode_request(req)) == req
    resp = ScoreResponse(id=req_id, scores=tuple(float(s) for s in scores))
    assert decode_response(encode_response(resp), expect_id=req_id) == resp


def test_protocol_errors():
    with pytest.raises(ScorerError, match="id 9 != request id 8"):
        decode_response(json.dumps({"id": 9, "scores": []}), expect_id=8)
    with pytest.raises(ScorerError, match="malformed"):
        decode_response("not json", expect_id=1)
    with pytest.raises(ScorerError, match="boom"):
        decode_response(json.dumps({"id": 1, "error": "boom"}), expect_id=1)


def test_stub_table_lookup_and_fallback():
    stub = StubScorer(table={"a b": -1.0})
    assert score_texts(stub, ["a b"], 16) == [-1.0]
    assert score_texts(stub, ["x y z"], 16) == [-3.0]
    assert score_texts(stub, [""], 16) == [0.0]


def test_stub_dedup_single_evaluation():
    stub = StubScorer(table={"a b": -1.0})
    scores = score_texts(stub, ["a b", "a b"], 16)
    assert scores == [-1.0, -1.0]
    assert stub.evaluations == 1


def test_chunking_batch_count():
    stub = StubScorer(table={})
    texts = [f"t {i}" for i in range(600)]
    calls = []
    original = stub.submit

    def counting_submit(req):
        calls.append(len(req.texts))
        return original(req)

    stub.submit = counting_submit
    score_texts(stub, texts, 256)
    assert len(calls) == 3
    assert calls == [256, 256, 88]


@settings(max_examples=25, deadline=None)
@given(
    texts=st.lists(st.sampled_from(["a", "b b", "c", "a", "long text here"]), min_size=1,
                   max_size=30),
)
def test_chunking_invariance(texts):
    reference = None
    for chunk in (1, 7, 256):
        stub = StubScorer(table={"a": -0.5, "c": -2.5})
        got = score_texts(stub, list(texts), chunk)
        if reference is None:
            reference = got
        assert got == reference
        assert stub.evaluations <= len(set(texts))


def test_score_eos_tie_breaks_to_period():
    stub = StubScorer(table={})  # all three puncts tie via fallback
    assert score_eos(stub, ["hello there"]) == [(".", -2.0)]


def test_score_eos_prefers_table_winner():
    table = {"how are you.": -5.0, "how are you?": -1.0, "how are you!": -4.0}
    stub = StubScorer(table=table)
    assert score_eos(stub, ["how are you"]) == [("?", -1.0)]


def test_score_eos_broadcast_identical():
    stub = StubScorer(table={"a.": -0.1})
    out = score_eos(stub, ["a", "a", "a"])
    assert out[0] == out[1] == out[2] == (".", -0.1)
    assert stub.evaluations == 1


def test_ngram_backed_stub_matches_score_sequence(tmp_path):
    path = tmp_path / "m.arpa"
    path.write_text(build_toy_arpa(TRIGRAM_SPEC))
    model = load_arpa(path)
    stub = StubScorer(ngram_model=model)
    import random

    rng = random.Random(3)
    for _ in range(50):
        words = [rng.choice(["a", "b", "zzz"]) for _ in range(rng.randint(1, 5))]
        text = " ".join(words)
        assert score_texts(stub, [text], 8) == [pytest.approx(score_sequence(model, words))]
    # eos variants run through </s> and tie-break to "."
    punct, score = score_eos(stub, ["a b"])[0]
    assert punct == "."
    assert score == pytest.approx(score_sequence(model, ["a", "b"], include_eos=True))


def test_stub_scale():
    stub = StubScorer(table={"a": -2.0}, scale=0.5)
    assert score_texts(stub, ["a"], 4) == [-1.0]


def test_stub_requires_exactly_one_backend():
    with pytest.raises(ValueError):
        StubScorer()


def test_subprocess_scorer_end_to_end():
    scorer = SubprocessScorer([sys.executable, "-u", "-c", ECHO_SCORER], timeout_s=20)
    try:
        assert score_texts(scorer, ["a b c", "d"], 2) == [-3.0, -1.0]
        assert score_eos(scorer, ["a b"]) == [("?", -2.5)]
    finally:
        scorer.close()


def test_subprocess_scorer_timeout():
    scorer = SubprocessScorer(
        [sys.executable, "-u", "-c", "import time\ntime.sleep(60)"], timeout_s=0.3
    )
    try:
        with pytest.raises(ScorerError, match="timed out"):
            score_texts(scorer, ["a"], 4)
    finally:
        scorer.proc.kill()


def _serve_tcp_once(server_sock):
    conn, _ = server_sock.accept()
    with conn, conn.makefile("rw", encoding="utf-8") as fh:
        for line in fh:
            req = json.loads(line)
            out = {"id": req["id"], "scores": [-1.0] * len(req["texts"])}
            fh.write(json.dumps(out) + "\n")
            fh.flush()


def test_tcp_scorer():
    server = socket.create_server(("127.0.0.1", 0))
    port = server.getsockname()[1]
    thread = threading.Thread(target=_serve_tcp_once, args=(server,), daemon=True)
    thread.start()
    scorer = TcpScorer(f"127.0.0.1:{port}", timeout_s=10)
    try:
        assert score_texts(scorer, ["x", "y"], 8) == [-1.0, -1.0]
    finally:
        scorer.close()
        server.close()


def test_timeout_env_override(monkeypatch):
    from lightbeam.scorer import default_timeout_s

    monkeypatch.setenv("LIGHTBEAM_SCORER_TIMEOUT_S", "3.5")
    assert default_timeout_s() == 3.5
    monkeypatch.delenv("LIGHTBEAM_SCORER_TIMEOUT_S")
    assert default_timeout_s() == 60.0
