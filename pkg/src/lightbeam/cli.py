"""Command-line client for the decoding service.

Every subcommand talks to the HTTP API: against ``--server URL`` when
given, otherwise against an in-process application instance, so local
and remote runs exercise identical code paths. File outputs (transcripts,
manifests, CSV) are always written client-side.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import threading
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import httpx

from .engine import peak_rss_bytes

LOGITS_SUFFIXES = {".lblt", ".json"}


class ServiceError(RuntimeError):
    def __init__(self, status: int, payload):
        self.status = status
        self.payload = payload
        detail = payload.get("detail") if isinstance(payload, dict) else payload
        super().__init__(f"service returned {status}: {detail}")


class ServiceClient:
    """Minimal JSON client; in-process unless a server URL is given."""

    def __init__(self, server: str | None, app=None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=httpx.Timeout(600.0))
        else:
            if app is None:
                from .service import create_app

                app = create_app()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient
            self._client = TestClient(app)
        self.app = app

    def _unwrap(self, response) -> dict:
        try:
            payload = response.json()
        except ValueError:
            payload = response.text
        if response.status_code >= 400:
            raise ServiceError(response.status_code, payload)
        return payload

    def post(self, path: str, payload: dict) -> dict:
        return self._unwrap(self._client.post(path, json=payload))

    def get(self, path: str) -> dict:
        return self._unwrap(self._client.get(path))

    def close(self):
        self._client.close()


def _parse_config_arg(value: str | None) -> tuple[str | None, dict | None]:
    """``--config`` takes a JSON file path or inline key=value[,key=value] pairs."""
    if value is None:
        return None, None
    if "=" not in value:
        return value, None
    overrides: dict = {}
    for pair in value.split(","):
        key, _, raw = pair.partition("=")
        if not key or not raw:
            raise argparse.ArgumentTypeError(f"bad config assignment {pair!r}")
        try:
            overrides[key.strip()] = json.loads(raw)
        except json.JSONDecodeError:
            overrides[key.strip()] = raw.strip()
    return None, overrides


def _scorer_payload(args) -> dict:
    if args.scorer_cmd:
        return {"kind": "subprocess", "command": args.scorer_cmd.split(),
                "timeout_s": args.scorer_timeout}
    if args.scorer_addr:
        return {"kind": "tcp", "address": args.scorer_addr, "timeout_s": args.scorer_timeout}
    if args.stub_table:
        return {"kind": "stub_table", "table_path": args.stub_table,
                "delay_per_text_s": args.stub_delay}
    return {"kind": "stub_ngram", "scale": args.stub_scale, "delay_per_text_s": args.stub_delay}


def _engine_payload(args, config_overrides_extra: dict | None = None) -> dict:
    config_path, overrides = _parse_config_arg(args.config)
    if config_overrides_extra:
        overrides = {**(overrides or {}), **config_overrides_extra}
    payload = {
        "vocab_path": args.vocab,
        "arpa_path": args.arpa,
        "scorer": _scorer_payload(args),
    }
    if args.lexicon:
        payload["lexicon_path"] = args.lexicon
    if args.table:
        payload["table_path"] = args.table
    if config_path:
        payload["config_path"] = config_path
    if overrides:
        payload["config"] = overrides
    return payload


def _collect_logits_files(path: str) -> list[Path]:
    p = Path(path)
    if p.is_dir():
        files = sorted(
            f for f in p.iterdir() if f.is_file() and f.suffix.lower() in LOGITS_SUFFIXES
        )
        if not files:
            files = sorted(f for f in p.iterdir() if f.is_file())
        return files
    return [p]


def _decode_corpus(args, client_factory, files: list[Path], overrides: dict | None = None):
    """Decode files through the service; returns (engine_info, records).

    Each worker thread holds its own client and engine so component
    state is never shared across concurrent decodes.
    """
    workers = max(1, args.workers)
    locals_ = threading.local()

    def get_client_engine():
        if not hasattr(locals_, "client"):
            locals_.client = client_factory()
            locals_.engine = locals_.client.post("/engines", _engine_payload(args, overrides))
        return locals_.client, locals_.engine

    # Prime one engine up front so config errors surface before decoding.
    _main_client, engine_info = get_client_engine()

    def run_one(item):
        index, path = item
        client, engine = get_client_engine()
        payload = {"logits_path": str(path), "final_llm_only": args.final_llm_only}
        try:
            resp = client.post(f"/engines/{engine['engine_id']}/decode", payload)
            record = {
                "input": path.name,
                "transcript": resp["text"],
                "score": resp["score"],
                "frames": resp["frames"],
                "wall_time_s": resp["wall_time_s"],
                "rtf": resp["rtf"],
                "duration_s": resp["duration_s"],
                "error": None,
            }
        except (ServiceError, httpx.HTTPError) as exc:
            record = {
                "input": path.name,
                "transcript": None,
                "score": None,
                "frames": None,
                "wall_time_s": None,
                "rtf": None,
                "duration_s": None,
                "error": str(exc),
            }
        return index, record

    items = list(enumerate(files))
    if workers == 1:
        results = [run_one(item) for item in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_one, items))
    results.sort(key=lambda pair: pair[0])
    return engine_info, [record for _, record in results]


def _write_outputs(out_dir: Path, engine_info: dict, records: list[dict]):
    out_dir.mkdir(parents=True, exist_ok=True)
    transcripts = [(r["transcript"] or "") for r in records]
    (out_dir / "transcripts.txt").write_text(
        "".join(line + "\n" for line in transcripts), encoding="utf-8"
    )
    manifest = {
        "config": engine_info["config"],
        "components": engine_info["components"],
        "peak_rss_bytes": peak_rss_bytes(),
        "records": records,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    with open(out_dir / "rtf.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["utterance", "frames", "duration_s", "processing_s", "rtf"])
        for r in records:
            writer.writerow(
                [r["input"], r["frames"], r["duration_s"], r["wall_time_s"], r["rtf"]]
            )


def cmd_decode(args) -> int:
    files = _collect_logits_files(args.logits)
    if not files:
        print(f"no logits files under {args.logits}", file=sys.stderr)
        return 1
    app_holder = {}

    def client_factory():
        if args.server:
            return ServiceClient(args.server)
        if "app" not in app_holder:
            from .service import create_app

            app_holder["app"] = create_app()
        return ServiceClient(None, app=app_holder["app"])

    try:
        engine_info, records = _decode_corpus(args, client_factory, files)
    except (ServiceError, httpx.HTTPError) as exc:
        print(f"decode failed: {exc}", file=sys.stderr)
        return 1
    _write_outputs(Path(args.out), engine_info, records)
    failures = [r for r in records if r["error"]]
    for r in failures:
        print(f"error: {r['input']}: {r['error']}", file=sys.stderr)
    print(f"decoded {len(records) - len(failures)}/{len(records)} utterances -> {args.out}")
    return 1 if failures else 0


def cmd_build_table(args) -> int:
    client = ServiceClient(args.server)
    try:
        resp = client.post(
            "/tables",
            {"lexicon_path": args.lexicon, "vocab_path": args.vocab, "out_path": args.out},
        )
    except ServiceError as exc:
        print(f"build-table failed: {exc}", file=sys.stderr)
        return 1
    finally:
        client.close()
    print(
        f"wrote {resp['out_path']}: {resp['states']} states, "
        f"{resp['entries']} entries, sha256 {resp['sha256'][:12]}"
    )
    return 0


def cmd_eval(args) -> int:
    client = ServiceClient(args.server)
    try:
        resp = client.post(
            "/eval",
            {"ref_path": args.ref, "hyp_path": args.hyp, "keep_punct": args.keep_punct},
        )
    except ServiceError as exc:
        print(f"eval failed: {exc}", file=sys.stderr)
        return 1
    finally:
        client.close()
    summary = {k: v for k, v in resp.items() if k != "utterances"}
    Path(args.out_json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["index", "wer", "substitutions", "insertions", "deletions", "reference_words"]
        )
        for u in resp["utterances"]:
            writer.writerow(
                [u["index"], u["wer"], u["substitutions"], u["insertions"], u["deletions"],
                 u["reference_words"]]
            )
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _bench_rows_from_manifest(manifest: dict, refs: list[str] | None, client) -> list[dict]:
    rows = []
    for idx, record in enumerate(manifest["records"]):
        row = {
            "utterance": record["input"],
            "rtf": record["rtf"],
            "frames": record["frames"],
            "score": record["score"],
        }
        if refs is not None:
            if idx >= len(refs):
                from .errors import MetricError

                raise MetricError("manifest has more records than reference lines")
            resp = client.post(
                "/wer", {"reference": refs[idx], "hypothesis": record["transcript"] or ""}
            )
            row["wer"] = resp["wer"]
        rows.append(row)
    return rows


def _summarize(rows: list[dict]) -> dict:
    rtfs = [r["rtf"] for r in rows if r["rtf"] is not None]
    summary = {
        "utterances": len(rows),
        "mean_rtf": sum(rtfs) / len(rtfs) if rtfs else None,
        "max_rtf": max(rtfs) if rtfs else None,
    }
    if rows and "wer" in rows[0]:
        wers = [r["wer"] for r in rows]
        summary["mean_wer"] = sum(wers) / len(wers)
    return summary


def cmd_bench(args) -> int:
    refs = None
    if args.ref:
        refs = Path(args.ref).read_text(encoding="utf-8").splitlines()

    if args.sweep:
        return _bench_sweep(args, refs)

    manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    if refs is not None and len(refs) != len(manifest["records"]):
        print(
            f"reference has {len(refs)} lines but manifest has "
            f"{len(manifest['records'])} records",
            file=sys.stderr,
        )
        return 1
    client = ServiceClient(args.server)
    try:
        rows = _bench_rows_from_manifest(manifest, refs, client)
    finally:
        client.close()
    fields = ["utterance", "rtf", "frames", "score"] + (["wer"] if refs is not None else [])
    with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)
    summary = _summarize(rows)
    if args.summary_json:
        Path(args.summary_json).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def _bench_sweep(args, refs) -> int:
    if not (args.logits and args.vocab and args.arpa and (args.lexicon or args.table)):
        print(
            "--sweep needs the decode flags (--logits, --vocab, --lexicon/--table, --arpa)",
            file=sys.stderr,
        )
        return 2
    intervals = [int(x) for x in args.sweep.split(",") if x]
    files = _collect_logits_files(args.logits)
    if refs is not None and len(refs) != len(files):
        print(f"reference has {len(refs)} lines but corpus has {len(files)} files",
              file=sys.stderr)
        return 1
    summaries = []
    for interval in intervals:
        app_holder = {}

        def client_factory():
            if args.server:
                return ServiceClient(args.server)
            if "app" not in app_holder:
                from .service import create_app

                app_holder["app"] = create_app()
            return ServiceClient(None, app=app_holder["app"])

        _info, records = _decode_corpus(
            args, client_factory, files, {"llm_rescore_interval": interval}
        )
        rtfs = [r["rtf"] for r in records if r["rtf"] is not None]
        summary = {
            "llm_rescore_interval": interval,
            "utterances": len(records),
            "mean_rtf": sum(rtfs) / len(rtfs) if rtfs else None,
            "max_rtf": max(rtfs) if rtfs else None,
        }
        if refs is not None:
            client = client_factory()
            try:
                wers = [
                    client.post(
                        "/wer",
                        {"reference": refs[i], "hypothesis": record["transcript"] or ""},
                    )["wer"]
                    for i, record in enumerate(records)
                ]
            finally:
                client.close()
            summary["mean_wer"] = sum(wers) / len(wers) if wers else None
        summaries.append(summary)

    fields = list(summaries[0].keys()) if summaries else []
    with open(args.out_csv, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(summaries)
    print(json.dumps(summaries, indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level=args.log_level)
    return 0


def _add_scorer_args(parser: argparse.ArgumentParser):
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--scorer-cmd", help="launch this command as the scorer sidecar")
    group.add_argument("--scorer-addr", help="connect to a scorer at host:port")
    group.add_argument("--stub-table", help="JSON text->score table for the stub scorer")
    group.add_argument(
        "--stub-ngram", action="store_true",
        help="stub scorer backed by the loaded n-gram model (default)",
    )
    parser.add_argument("--stub-scale", type=float, default=1.0,
                        help="scale factor for stub scores")
    parser.add_argument("--stub-delay", type=float, default=0.0,
                        help="simulated stub cost per text, seconds")
    parser.add_argument("--scorer-timeout", type=float, default=None,
                        help="scorer timeout in seconds")


def _add_decode_args(parser: argparse.ArgumentParser, required: bool = True):
    parser.add_argument("--logits", required=required, help="logits file or directory")
    parser.add_argument("--vocab", required=required, help="vocabulary file")
    group = parser.add_mutually_exclusive_group(required=required)
    group.add_argument("--lexicon", help="pronunciation lexicon text file")
    group.add_argument("--table", help="precompiled LBTT transition table")
    parser.add_argument("--arpa", required=required, help="ARPA n-gram model")
    parser.add_argument("--config", help="config JSON path or key=value[,key=value] pairs")
    parser.add_argument("--final-llm-only", action="store_true",
                        help="skip interval rescoring; final rescore only")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel decode workers (each loads its own components)")
    _add_scorer_args(parser)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lightbeam",
                                     description="Lexicon-constrained CTC decoding service client")
    parser.add_argument("--server", help="base URL of a running service; default in-process")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("decode", help="decode a corpus of logit files")
    _add_decode_args(p)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("build-table", help="compile a lexicon into an LBTT table")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_table)

    p = sub.add_parser("eval", help="score hypothesis transcripts against references")
    p.add_argument("--ref", required=True)
    p.add_argument("--hyp", required=True)
    p.add_argument("--out-json", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--keep-punct", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="summarize a manifest or sweep rescore intervals")
    p.add_argument("--manifest", help="manifest.json from a decode run")
    p.add_argument("--ref", help="reference transcripts, one per line")
    p.add_argument("--out-csv", required=True)
    p.add_argument("--summary-json")
    p.add_argument("--sweep", help="comma-separated llm_rescore_interval values to rerun")
    _add_decode_args(p, required=False)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8711)
    p.add_argument("--log-level", default="info")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and not args.sweep and not args.manifest:
        parser.error("bench needs --manifest (or --sweep with decode flags)")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
