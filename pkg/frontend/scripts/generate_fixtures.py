"""Regenerate the recorded event-log fixtures and their server-side hashes.

Drives the backend engine directly (fixture generation only; the UI itself
consumes nothing but the event protocol). Run from the frontend directory:

    python3 scripts/generate_fixtures.py
"""

import json
import sys
from pathlib import Path

from streamtopics.pipeline import PipelineConfig
from streamtopics.service import Engine, ServiceConfig

FIXTURES = Path(__file__).resolve().parent.parent / "test" / "fixtures"


def make_engine() -> Engine:
    cfg = ServiceConfig(
        window_duration_secs=1200,
        update_interval_secs=60,
        pipeline=PipelineConfig(coarse_kmax=6, fine_kmax=8, rng_seed=3),
    )
    return Engine(cfg)


def feed(engine: Engine, groups, t0: int, per: int = 8) -> int:
    t = t0
    for g in groups:
        for i in range(per):
            rec = {"id": f"{g}-{t}", "text": f"{g} {g}tail{i % 3}", "created_at": t}
            assert engine.ingest_line(json.dumps(rec))
            t += 250
    return t


def three_updates() -> None:
    """Snapshot + exactly three delta events."""
    engine = make_engine()
    path = FIXTURES / "events-3updates.jsonl"
    engine.start_recording(path)
    t = feed(engine, ("alpha", "beta", "gamma"), 1_000_000)
    engine.tick(t)
    t = feed(engine, ("alpha", "beta", "delta"), t)
    engine.tick(t)
    t = feed(engine, ("alpha", "delta"), t)
    engine.tick(t)
    engine.close()
    (FIXTURES / "events-3updates.hash").write_text(engine.state_hash() + "\n")
    print(f"wrote {path.name}: hash {engine.state_hash()}")


def interactive_session() -> None:
    """Richer fixture: updates interleaved with selection commands, plus
    recorded command responses (history peek, similar posts, stale id)."""
    engine = make_engine()
    path = FIXTURES / "events-interactive.jsonl"
    engine.start_recording(path)
    t = feed(engine, ("alpha", "beta", "gamma"), 2_000_000, per=10)
    engine.tick(t)
    tids = list(engine.active_session().topic_ids)
    assert engine.handle_command({"type": "select_topics", "ids": tids})["ok"]
    t = feed(engine, ("alpha", "beta", "gamma"), t, per=6)
    engine.tick(t)
    phrases = [p["display"] for p in engine.view_model()["phrases"]]
    if phrases:
        assert engine.handle_command({"type": "select_phrases", "phrases": phrases[:1]})["ok"]
    assert engine.handle_command({"type": "insert_new_reps"})["ok"]
    engine.tick(t + 60_000)
    engine.close()
    (FIXTURES / "events-interactive.hash").write_text(engine.state_hash() + "\n")

    history = engine.handle_command({"type": "set_history", "index": 0})
    (FIXTURES / "history-response.json").write_text(json.dumps(history, indent=2) + "\n")
    sid = next(iter(engine.active_session().reps))
    similar = engine.handle_command({"type": "get_similar", "subtopic_id": sid})
    (FIXTURES / "similar-response.json").write_text(json.dumps(similar, indent=2) + "\n")
    stale = engine.handle_command({"type": "select_topics", "ids": [987_654]})
    (FIXTURES / "stale-response.json").write_text(json.dumps(stale, indent=2) + "\n")
    print(f"wrote {path.name}: hash {engine.state_hash()}")


def canonical_cases() -> None:
    """Cross-language canonicalization cases with server-side hashes."""
    from streamtopics.service import state_hash

    cases = [
        {"x": 0.5, "y": [1, 2.5], "s": "té", "b": True, "n": None},
        {"10": 1, "2": 2, "nested": {"z": 0.1, "a": [True, False, None]}},
        {"f": 1.0, "i": 1, "neg": 0.0, "tiny": 1e-9, "third": 1 / 3},
        {"big": 12345678.5, "score": 31.400000000000002},
        {},
    ]
    out = [{"value": c, "hash": state_hash(c)} for c in cases]
    (FIXTURES / "canonical-cases.json").write_text(json.dumps(out, indent=2) + "\n")
    print("wrote canonical-cases.json")


if __name__ == "__main__":
    FIXTURES.mkdir(parents=True, exist_ok=True)
    three_updates()
    interactive_session()
    canonical_cases()
