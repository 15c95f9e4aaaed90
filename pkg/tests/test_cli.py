import csv
import json
from pathlib import Path

import pytest

from lightbeam import build_toy_arpa, save_logits
from lightbeam.cli import main

from conftest import AE, N, SP, T_, one_hot_logits, sentence_bigram_spec

VOLATILE_RECORD_FIELDS = {"wall_time_s", "rtf"}


@pytest.fixture
def corpus(tmp_path):
    vocab = tmp_path / "vocab.txt"
    vocab.write_text("<blank>\nAE\nN\nT\n<sp>\n")
    lexicon = tmp_path / "lex.txt"
    lexicon.write_text("ant AE N T\naunt AE N T\nat AE T\nan AE N\n")
    arpa = tmp_path / "lm.arpa"
    arpa.write_text(
        build_toy_arpa(sentence_bigram_spec(["ant", "aunt", "at", "an"], seed=21))
    )
    stub = tmp_path / "stub.json"
    stub.write_text(json.dumps({"ant": -0.5, "aunt": -3.0, "at": -1.0, "an": -1.5}))
    logits_dir = tmp_path / "logits"
    logits_dir.mkdir()
    for name, toks in [
        ("u1.lblt", [AE, N, T_, SP]),
        ("u2.lblt", [AE, T_, SP]),
        ("u3.lblt", [AE, N, SP]),
    ]:
        save_logits(logits_dir / name, one_hot_logits(toks, 5))
    return {
        "vocab": vocab, "lexicon": lexicon, "arpa": arpa, "stub": stub,
        "logits": logits_dir, "tmp": tmp_path,
    }


def decode_args(corpus, out, extra=()):
    return [
        "decode",
        "--logits", str(corpus["logits"]),
        "--vocab", str(corpus["vocab"]),
        "--lexicon", str(corpus["lexicon"]),
        "--arpa", str(corpus["arpa"]),
        "--config", "profile=b2t24,beam_size=16,llm_rescore_interval=2",
        "--stub-table", str(corpus["stub"]),
        "--out", str(out),
        *extra,
    ]


def canonical_manifest(path: Path) -> dict:
    manifest = json.loads(path.read_text())
    manifest.pop("peak_rss_bytes", None)
    for record in manifest["records"]:
        for field in VOLATILE_RECORD_FIELDS:
            record.pop(field, None)
    return manifest


def test_decode_fixture_dir(corpus, tmp_path):
    out = tmp_path / "out"
    assert main(decode_args(corpus, out)) == 0
    lines = (out / "transcripts.txt").read_text().splitlines()
    assert len(lines) == 3
    assert [l.rstrip(".?!") for l in lines] == ["ant", "at", "an"]
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["records"]) == 3
    assert manifest["config"]["beam_size"] == 16
    assert manifest["config"]["llm_rescore_interval"] == 2
    with open(out / "rtf.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert [r["utterance"] for r in rows] == ["u1.lblt", "u2.lblt", "u3.lblt"]
    assert all(float(r["rtf"]) > 0 for r in rows)


def test_profile_snapshot_in_manifest(corpus, tmp_path):
    out = tmp_path / "out"
    args = decode_args(corpus, out)
    args[args.index("--config") + 1] = "profile=b2t24"
    assert main(args) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["beam_size"] == 1000
    assert manifest["config"]["beam_prune_threshold"] == 22.0
    assert manifest["config"]["llm_rescore_interval"] == 10


def test_decode_determinism(corpus, tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(decode_args(corpus, out1)) == 0
    assert main(decode_args(corpus, out2)) == 0
    assert (out1 / "transcripts.txt").read_bytes() == (out2 / "transcripts.txt").read_bytes()
    assert canonical_manifest(out1 / "manifest.json") == canonical_manifest(
        out2 / "manifest.json"
    )


def test_table_equals_lexicon_route(corpus, tmp_path):
    table_path = tmp_path / "lex.lbtt"
    assert main([
        "build-table",
        "--lexicon", str(corpus["lexicon"]),
        "--vocab", str(corpus["vocab"]),
        "--out", str(table_path),
    ]) == 0
    out_lex, out_tab = tmp_path / "ol", tmp_path / "ot"
    assert main(decode_args(corpus, out_lex)) == 0
    args = decode_args(corpus, out_tab)
    i = args.index("--lexicon")
    args[i] = "--table"
    args[i + 1] = str(table_path)
    assert main(args) == 0
    assert (out_lex / "transcripts.txt").read_text() == (out_tab / "transcripts.txt").read_text()
    lex_manifest = canonical_manifest(out_lex / "manifest.json")
    tab_manifest = canonical_manifest(out_tab / "manifest.json")
    assert lex_manifest["records"] == tab_manifest["records"]


def test_decode_workers_match_serial(corpus, tmp_path):
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    assert main(decode_args(corpus, out1)) == 0
    assert main(decode_args(corpus, out2, extra=["--workers", "3"])) == 0
    assert (out1 / "transcripts.txt").read_text() == (out2 / "transcripts.txt").read_text()
    assert canonical_manifest(out1 / "manifest.json") == canonical_manifest(
        out2 / "manifest.json"
    )


def test_missing_arpa_is_usage_error(corpus, tmp_path):
    with pytest.raises(SystemExit) as err:
        main([
            "decode",
            "--logits", str(corpus["logits"]),
            "--vocab", str(corpus["vocab"]),
            "--lexicon", str(corpus["lexicon"]),
            "--out", str(tmp_path / "x"),
        ])
    assert err.value.code == 2


def test_decode_error_record_and_exit_code(corpus, tmp_path):
    bad = corpus["logits"] / "u0.lblt"  # sorts first
    bad.write_bytes(b"garbage")
    out = tmp_path / "out"
    try:
        assert main(decode_args(corpus, out)) == 1
    finally:
        bad.unlink()
    lines = (out / "transcripts.txt").read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == ""  # failed utterance keeps its slot
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["records"][0]["error"]
    assert manifest["records"][1]["error"] is None


def test_eval_command(corpus, tmp_path):
    out = tmp_path / "out"
    assert main(decode_args(corpus, out)) == 0
    ref = tmp_path / "ref.txt"
    ref.write_text("ant\nat\nan\n")
    ej, ec = tmp_path / "eval.json", tmp_path / "eval.csv"
    assert main([
        "eval", "--ref", str(ref), "--hyp", str(out / "transcripts.txt"),
        "--out-json", str(ej), "--out-csv", str(ec),
    ]) == 0
    summary = json.loads(ej.read_text())
    assert summary["mean_wer"] == 0.0
    rows = list(csv.DictReader(open(ec)))
    assert len(rows) == 3


def test_bench_from_manifest(corpus, tmp_path):
    out = tmp_path / "out"
    assert main(decode_args(corpus, out)) == 0
    ref = tmp_path / "ref.txt"
    ref.write_text("ant\nat\nan\n")
    bc = tmp_path / "bench.csv"
    bj = tmp_path / "bench.json"
    assert main([
        "bench", "--manifest", str(out / "manifest.json"), "--ref", str(ref),
        "--out-csv", str(bc), "--summary-json", str(bj),
    ]) == 0
    rows = list(csv.DictReader(open(bc)))
    assert [r["utterance"] for r in rows] == ["u1.lblt", "u2.lblt", "u3.lblt"]
    assert all("wer" in r for r in rows)
    summary = json.loads(bj.read_text())
    assert summary["mean_wer"] == 0.0
    assert summary["max_rtf"] >= summary["mean_rtf"] > 0


def test_bench_sweep_rtf_monotone(corpus, tmp_path):
    # longer utterances so rescore cadence dominates the simulated cost
    long_dir = corpus["tmp"] / "long"
    long_dir.mkdir()
    toks = []
    for _ in range(5):
        toks += [AE, N, T_, SP]
    save_logits(long_dir / "long.lblt", one_hot_logits(toks, 5))
    bc = tmp_path / "sweep.csv"
    args = [
        "bench",
        "--logits", str(long_dir),
        "--vocab", str(corpus["vocab"]),
        "--lexicon", str(corpus["lexicon"]),
        "--arpa", str(corpus["arpa"]),
        "--config", "profile=b2t24,beam_size=16",
        "--stub-table", str(corpus["stub"]),
        "--stub-delay", "0.004",
        "--sweep", "2,5,50",
        "--out-csv", str(bc),
    ]
    assert main(args) == 0
    rows = list(csv.DictReader(open(bc)))
    assert [int(r["llm_rescore_interval"]) for r in rows] == [2, 5, 50]
    rtfs = [float(r["mean_rtf"]) for r in rows]
    assert rtfs[0] >= rtfs[1] >= rtfs[2]


def test_bench_requires_manifest_or_sweep():
    with pytest.raises(SystemExit) as err:
        main(["bench", "--out-csv", "/tmp/x.csv"])
    assert err.value.code == 2
