import json

import pytest

from streamtopics.cli import main

from test_service import ingest_line


def write_stream(tmp_path, minutes=3):
    lines = []
    i = 0
    for minute in range(minutes):
        for g in ("alpha", "beta"):
            for _ in range(6):
                lines.append(ingest_line(f"{g}{i}", f"{g} {g}tail", 1_000_000 + minute * 60_000 + i))
                i += 1
    path = tmp_path / "stream.jsonl"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_no_args_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_rejected(capsys):
    assert main(["replay", "--input", "x", "--bogus"]) == 1


def test_replay_missing_input_runtime_error(tmp_path, capsys):
    assert main(["replay", "--input", str(tmp_path / "nope.jsonl")]) == 2


def test_replay_headless_deterministic(tmp_path, capsys):
    path = write_stream(tmp_path)
    outputs = []
    for _ in range(3):
        assert main(["--seed", "5", "replay", "--input", str(path), "--headless"]) == 0
        outputs.append(capsys.readouterr().out)
    assert outputs[0] == outputs[1] == outputs[2]
    assert "update 1" in outputs[0]
    assert "ingested 36 posts" in outputs[0]


def test_replay_records_event_log(tmp_path, capsys):
    path = write_stream(tmp_path)
    log = tmp_path / "events.jsonl"
    assert main(["replay", "--input", str(path), "--record", str(log)]) == 0
    events = [json.loads(l) for l in log.read_text().splitlines()]
    assert events[0]["kind"] == "snapshot"
    assert [e["seq"] for e in events[1:]] == list(range(1, len(events)))
    assert any(e["kind"] == "delta" for e in events)


def test_bench_batch_table(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    rows = []
    for i in range(40):
        rows.append(json.dumps({"text": f"quark gluon q{i % 3}", "label": "phys", "date": i}))
        rows.append(json.dumps({"text": f"sonnet verse s{i % 3}", "label": "poet", "date": i}))
    corpus.write_text("\n".join(rows) + "\n")
    rc = main(["bench", "batch", "--corpus", str(corpus), "--format", "jsonl", "--k", "2", "--runs", "3"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "spherical k-means++" in out and "k-means++" in out


def test_bench_stream_json(tmp_path, capsys):
    corpus = tmp_path / "corpus.jsonl"
    rows = []
    t = 0
    for _ in range(10):
        for g, (txt, lab) in enumerate(
            [("apple fruit", "food"), ("carbon atom", "sci"), ("violin sonata", "music")]
        ):
            for _ in range(8):
                rows.append(json.dumps({"text": txt, "label": lab, "date": t}))
                t += 1
    corpus.write_text("\n".join(rows) + "\n")
    log = tmp_path / "runs.jsonl"
    rc = main(
        ["bench", "stream", "--corpus", str(corpus), "--format", "jsonl",
         "--runs", "2", "--json", "--log", str(log)]
    )
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report) == 2
    assert log.exists() and len(log.read_text().splitlines()) == 4


def test_bench_missing_corpus(tmp_path, capsys):
    assert main(["bench", "batch", "--corpus", str(tmp_path / "nope")]) == 2


def test_build_idf_roundtrip(tmp_path, capsys):
    corpus = tmp_path / "ref.jsonl"
    corpus.write_text(
        json.dumps({"id": "1", "text": "apple pie recipe", "created_at": 1}) + "\n"
        + json.dumps({"id": "2", "text": "apple cider press", "created_at": 2}) + "\n"
    )
    out = tmp_path / "idf.tsv"
    assert main(["build-idf", "--corpus", str(corpus), "--out", str(out)]) == 0
    from streamtopics.textprep import IdfModel

    model = IdfModel.load(out)
    assert model.n_ref == 2
    assert model.df["apple"] == 2
    assert model.df["pie"] == 1
