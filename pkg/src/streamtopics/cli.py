"""Command-line entry point: serve, replay, bench, and build-idf."""

from __future__ import annotations

import argparse
import sys
import threading
from dataclasses import replace
from pathlib import Path


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, runtime failures exit 2
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="streamtopics", description="Streaming text clustering service")
    p.add_argument("--seed", type=int, default=None, help="global RNG seed")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    serve = sub.add_parser("serve", help="run the analysis service")
    serve.add_argument("--config", type=Path, default=None)
    serve.add_argument("--record", type=Path, default=None, help="append-only client event log")
    serve.add_argument("--input", type=Path, default=None, help="JSONL file to replay as the stream")
    serve.add_argument("--speed", type=float, default=None, help="replay speed multiplier (0 = fast)")
    serve.add_argument("--stdin", action="store_true", help="ingest JSONL lines from standard input")
    serve.add_argument("--ingest-listen", default=None, help="host:port accepting JSONL ingest lines")
    serve.add_argument("--listen", default=None, help="host:port for the API server")

    replay = sub.add_parser("replay", help="replay a recorded stream deterministically")
    replay.add_argument("--input", type=Path, required=True)
    replay.add_argument("--speed", type=float, default=0.0)
    replay.add_argument("--headless", action="store_true", help="print per-update summaries as text")
    replay.add_argument("--config", type=Path, default=None)
    replay.add_argument("--record", type=Path, default=None)

    bench = sub.add_parser("bench", help="clustering quality benchmarks")
    bench_sub = bench.add_subparsers(dest="bench_cmd", required=True, parser_class=_Parser)
    for name in ("batch", "stream"):
        b = bench_sub.add_parser(name)
        b.add_argument("--corpus", type=Path, required=True)
        b.add_argument("--format", default="newsgroups-dir", choices=["newsgroups-dir", "jsonl"])
        b.add_argument("--runs", type=int, default=5)
        b.add_argument("--json", action="store_true", help="emit the JSON report")
        b.add_argument("--log", type=Path, default=None, help="write the raw per-run JSONL log")
        if name == "batch":
            b.add_argument("--k", type=int, default=20)
        else:
            b.add_argument("--overlap", type=int, default=75, choices=[75, 50])
            b.add_argument("--kmax", type=int, default=10, choices=[10, 20])

    idf = sub.add_parser("build-idf", help="build an IDF model from a reference corpus")
    idf.add_argument("--corpus", type=Path, required=True, help="JSONL ingest records or plain text lines")
    idf.add_argument("--out", type=Path, required=True)
    return p


def _make_engine(config_path, seed):
    from .service import Engine, ServiceConfig, load_config

    cfg = load_config(config_path) if config_path else ServiceConfig()
    if seed is not None:
        cfg.seed = seed
        cfg.pipeline = replace(cfg.pipeline, rng_seed=seed)
    return Engine(cfg)


def _run_serve(args) -> int:
    import uvicorn

    from .api import create_app
    from .service import replay_file, serve_ingest_socket

    engine = _make_engine(args.config, args.seed)
    if args.record:
        engine.start_recording(args.record)
    if args.input:
        speed = args.speed if args.speed is not None else engine.config.ingest_speed
        threading.Thread(
            target=replay_file,
            args=(engine, args.input, speed),
            kwargs={"drive_updates": False},
            daemon=True,
        ).start()
    if args.stdin:
        def pump():
            for line in sys.stdin:
                engine.ingest_line(line)

        threading.Thread(target=pump, daemon=True).start()
    if args.ingest_listen:
        ingest_host, _, ingest_port = args.ingest_listen.partition(":")
        serve_ingest_socket(engine, ingest_host or "127.0.0.1", int(ingest_port or 8041))
    listen = args.listen or engine.config.listen_addr
    host, _, port = listen.partition(":")
    app = create_app(engine)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8040), log_level="warning")
    return 0


def _run_replay(args) -> int:
    from .service import format_tick_text, replay_file

    engine = _make_engine(args.config, args.seed)
    if args.record:
        engine.start_recording(args.record)
    if not args.input.exists():
        sys.stderr.write(f"error: input file {args.input} not found\n")
        return 2

    def on_tick(event):
        if args.headless:
            print(format_tick_text(event))

    replay_file(engine, args.input, speed=args.speed, on_tick=on_tick)
    if args.headless:
        print(f"ingested {engine.ingested} posts, skipped {engine.skipped}")
    engine.close()
    return 0


def _run_bench(args) -> int:
    from .bench import load_corpus, run_batch_bench, run_stream_bench

    try:
        corpus = load_corpus(args.corpus, args.format)
    except (FileNotFoundError, ValueError) as e:
        sys.stderr.write(f"error: {e}\n")
        return 2
    seed0 = args.seed if args.seed is not None else 0
    if args.bench_cmd == "batch":
        report = run_batch_bench(corpus, k=args.k, runs=args.runs, seed0=seed0)
    else:
        report = run_stream_bench(
            corpus, overlap=args.overlap, k_max=args.kmax, runs=args.runs, seed0=seed0
        )
    print(report.to_json() if args.json else report.format_table())
    if args.log:
        report.write_run_log(args.log)
    return 0


def _run_build_idf(args) -> int:
    import json

    from .textprep import build_idf, load_stopwords

    if not args.corpus.exists():
        sys.stderr.write(f"error: corpus file {args.corpus} not found\n")
        return 2
    texts = []
    with open(args.corpus, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                texts.append(rec["text"] if isinstance(rec, dict) else str(rec))
            except (json.JSONDecodeError, KeyError):
                texts.append(line)
    if not texts:
        sys.stderr.write("error: reference corpus is empty\n")
        return 2
    model = build_idf(texts, load_stopwords())
    model.save(args.out)
    print(f"wrote {len(model.df)} tokens (N_ref={model.n_ref}) to {args.out}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.cmd == "serve":
            return _run_serve(args)
        if args.cmd == "replay":
            return _run_replay(args)
        if args.cmd == "bench":
            return _run_bench(args)
        if args.cmd == "build-idf":
            return _run_build_idf(args)
        return 1
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # runtime failure contract
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
