import json

import pytest

from streamtopics import service as svc
from streamtopics.pipeline import PipelineConfig


def ingest_line(pid, text, ts, origin=None, lang=None):
    rec = {"id": pid, "text": text, "created_at": ts}
    if origin is not None:
        rec["origin_created_at"] = origin
    if lang is not None:
        rec["lang"] = lang
    return json.dumps(rec)


def make_engine(**kw):
    pipeline = PipelineConfig(coarse_kmax=6, fine_kmax=8, rng_seed=3)
    cfg = svc.ServiceConfig(
        window_duration_secs=1200, update_interval_secs=60, pipeline=pipeline, **kw
    )
    return svc.Engine(cfg)


def feed_groups(engine, t0=1_000_000, groups=("alpha", "beta"), per=10):
    i = 0
    for g in groups:
        for _ in range(per):
            assert engine.ingest_line(ingest_line(f"{g}{i}", f"{g} {g}tail", t0 + i))
            i += 1
    return t0 + i


class TestIngest:
    def test_three_line_fixture(self):
        engine = make_engine()
        for i in range(3):
            assert engine.ingest_line(ingest_line(f"p{i}", f"hello world{i}", 1000 + i))
        assert len(engine.window) == 3
        assert engine.ingested == 3

    def test_missing_text_skipped(self):
        engine = make_engine()
        assert not engine.ingest_line(json.dumps({"id": "x", "created_at": 5}))
        assert engine.skipped == 1
        assert len(engine.window) == 0

    def test_malformed_json_skipped(self):
        engine = make_engine()
        assert not engine.ingest_line("{nope")
        assert engine.skipped == 1

    def test_iso_dates_parsed(self):
        post = svc.parse_ingest_line(
            json.dumps({"id": "a", "text": "x", "created_at": "2021-03-07T12:00:00Z"})
        )
        assert post.published_at == 1615118400000

    def test_lang_filter(self):
        engine = make_engine(lang_filter="en")
        assert engine.ingest_line(ingest_line("a", "hello world", 10, lang="en"))
        assert not engine.ingest_line(ingest_line("b", "hola mundo", 11, lang="es"))
        assert engine.ingested == 1 and engine.skipped == 1

    def test_stopword_only_post_skipped(self):
        engine = make_engine()
        assert not engine.ingest_line(ingest_line("a", "the of and", 10))
        assert engine.skipped == 1

    def test_replay_preserves_arrival_order(self, tmp_path):
        lines = [ingest_line(f"p{i}", f"word{i % 7} tail{i % 5}", 1000 + i) for i in range(200)]
        path = tmp_path / "stream.jsonl"
        path.write_text("\n".join(lines) + "\n")
        engine = make_engine()
        svc.replay_file(engine, path, speed=0.0)
        snap = engine.window.snapshot()
        ids = [it.post.id for it in snap.items]
        assert ids == [f"p{i}" for i in range(200)]

    def test_replay_paces_by_inter_post_gaps(self, tmp_path):
        lines = [
            ingest_line("a", "hello world", 1000),
            ingest_line("b", "more words", 3000),
            ingest_line("c", "again here", 3000),  # same timestamp: no sleep
            ingest_line("d", "final post", 4000),
        ]
        path = tmp_path / "stream.jsonl"
        path.write_text("\n".join(lines) + "\n")
        engine = make_engine()
        naps = []
        svc.replay_file(engine, path, speed=2.0, sleep=naps.append)
        assert naps == [pytest.approx(1.0), pytest.approx(0.5)]

    def test_replay_without_driving_updates(self, tmp_path):
        lines = [ingest_line(f"p{i}", "hello world", 1000 + i * 120_000) for i in range(4)]
        path = tmp_path / "stream.jsonl"
        path.write_text("\n".join(lines) + "\n")
        engine = make_engine()
        ticks = svc.replay_file(engine, path, drive_updates=False)
        assert ticks == 0
        assert engine.view_model()["session"]["update_count"] == 0

    def test_socket_ingest_source(self):
        import socket

        engine = make_engine()
        server = svc.serve_ingest_socket(engine, "127.0.0.1", 0)
        try:
            port = server.server_address[1]
            with socket.create_connection(("127.0.0.1", port)) as conn:
                conn.sendall(
                    (ingest_line("s1", "hello world", 10) + "\n"
                     + "{garbage\n"
                     + ingest_line("s2", "more text", 11) + "\n").encode()
                )
            deadline = 50
            while engine.ingested < 2 and deadline:
                import time

                time.sleep(0.02)
                deadline -= 1
            assert engine.ingested == 2
            assert engine.skipped == 1
        finally:
            server.shutdown()


class TestTick:
    def test_delta_event_follows_snapshot_shape(self):
        engine = make_engine()
        now = feed_groups(engine)
        event = engine.tick(now)
        assert event["kind"] == "delta"
        payload = event["payload"]
        assert payload["topics"]
        assert payload["delta"]["matched"] == {}
        assert sum(payload["delta"]["added"].values()) == engine.ingested

    def test_second_tick_zero_delta(self):
        engine = make_engine()
        now = feed_groups(engine)
        engine.tick(now)
        event = engine.tick(now + 1)
        delta = event["payload"]["delta"]
        assert delta["vanished"] == [] and delta["appeared"] == []
        for flow in delta["flows"].values():
            assert flow["removed"] == 0 and flow["moved_out"] == {}
        assert all(v == 0 for v in delta["added"].values())

    def test_eviction_by_stream_time(self):
        engine = make_engine()
        feed_groups(engine, t0=1_000_000)
        engine.tick(1_000_000 + 1200 * 1000 + 60_000)  # everything expired
        assert len(engine.window) == 0
        assert engine.view_model()["topics"] == []

    def test_event_seq_strictly_increases(self):
        engine = make_engine()
        now = feed_groups(engine)
        seqs = [engine.tick(now + i)["seq"] for i in range(3)]
        assert seqs == sorted(seqs) and len(set(seqs)) == 3


class TestReplayFold:
    def test_vm_reconstructed_from_events(self, tmp_path):
        record = tmp_path / "events.jsonl"
        engine = make_engine()
        engine.start_recording(record)
        now = feed_groups(engine)
        engine.tick(now)
        tid = engine.active_session().topic_ids[0]
        engine.handle_command({"type": "select_topics", "ids": [tid]})
        engine.tick(now + 1)
        engine.handle_command({"type": "insert_new_reps"})
        engine.tick(now + 2)
        engine.close()

        events = [json.loads(l) for l in record.read_text().splitlines()]
        assert events[0]["kind"] == "snapshot"
        vm = {}
        for ev in events:
            vm = svc.apply_event(vm, ev)
        assert svc.state_hash(vm) == engine.state_hash()

    def test_quantize_stability(self):
        a = {"x": 0.1 + 0.2, "y": [1, 2.5], "z": {"k": True, "s": "t"}}
        b = {"z": {"s": "t", "k": True}, "y": [1, 2.5], "x": 0.30000000000000004}
        assert svc.state_hash(a) == svc.state_hash(b)


class TestCommands:
    def seeded(self):
        engine = make_engine()
        now = feed_groups(engine, per=12)
        engine.tick(now)
        return engine, now

    def test_select_topics_and_clear(self):
        engine, now = self.seeded()
        tids = engine.active_session().topic_ids
        resp = engine.handle_command({"type": "select_topics", "ids": [tids[0]]})
        assert resp["ok"]
        assert engine.view_model()["selection"] == [tids[0]]
        assert engine.view_model()["phrases"]
        resp = engine.handle_command({"type": "select_topics", "ids": []})
        assert resp["ok"]
        assert engine.view_model()["phrases"] == []
        assert engine.view_model()["coverage"] is None

    def test_select_topics_stale_id(self):
        engine, _ = self.seeded()
        resp = engine.handle_command({"type": "select_topics", "ids": [999]})
        assert not resp["ok"] and resp["error"] == "stale-state"

    def test_dive_in_requires_selection(self):
        engine, _ = self.seeded()
        resp = engine.handle_command({"type": "dive_in"})
        assert not resp["ok"]

    def test_dive_in_and_go_back(self):
        engine, now = self.seeded()
        tid = engine.active_session().topic_ids[0]
        engine.handle_command({"type": "select_topics", "ids": [tid]})
        root = engine.active_session()
        resp = engine.handle_command({"type": "dive_in"})
        assert resp["ok"] and resp["data"]["depth"] == 1
        child = engine.active_session()
        assert child is not root and not root.active
        engine.tick(now + 5)  # updates the child only
        assert root.update_count == 1
        resp = engine.handle_command({"type": "go_back"})
        assert resp["ok"] and engine.active_session() is root
        assert engine.view_model()["session"]["id"] == root.id

    def test_search_creates_filtered_child(self):
        engine, now = self.seeded()
        resp = engine.handle_command({"type": "search", "query": "alpha"})
        assert resp["ok"]
        event_vm = engine.view_model()
        assert event_vm["session"]["depth"] == 1
        engine.tick(now + 5)
        sizes = [t["size"] for t in engine.view_model()["topics"]]
        assert sum(sizes) == 12  # only the alpha posts

    def test_search_all_stopwords_rejected(self):
        engine, _ = self.seeded()
        resp = engine.handle_command({"type": "search", "query": "the of"})
        assert not resp["ok"] and resp["error"] == "invalid"

    def test_get_similar_matches_pipeline(self):
        from streamtopics.pipeline import similar_posts

        engine, now = self.seeded()
        session = engine.active_session()
        engine.handle_command({"type": "select_topics", "ids": list(session.topic_ids)})
        sid = next(iter(session.reps))
        resp = engine.handle_command({"type": "get_similar", "subtopic_id": sid})
        assert resp["ok"]
        expect = similar_posts(
            session.rep_vectors[sid],
            session.last_items,
            engine.config.pipeline.theta_sim,
            len(engine.vocab),
        )
        got = [(p["post_id"], p["similarity"]) for p in resp["data"]["posts"]]
        assert got == [(p, pytest.approx(s)) for p, s in expect]

    def test_get_similar_stale(self):
        engine, _ = self.seeded()
        resp = engine.handle_command({"type": "get_similar", "subtopic_id": 10_000})
        assert not resp["ok"] and resp["error"] == "stale-state"

    def test_insert_new_reps_moves_pending(self):
        engine, now = self.seeded()
        vm = engine.view_model()
        assert vm["reps"]["pending"]  # first update: every rep is new
        n_pending = len(vm["reps"]["pending"])
        resp = engine.handle_command({"type": "insert_new_reps"})
        assert resp["ok"] and resp["data"]["inserted"] == n_pending
        vm = engine.view_model()
        assert vm["reps"]["pending"] == [] and len(vm["reps"]["stream"]) == n_pending

    def test_set_history(self):
        engine, now = self.seeded()
        engine.tick(now + 1)
        resp = engine.handle_command({"type": "set_history", "index": 0})
        assert resp["ok"] and resp["data"]["update_index"] == 1
        resp = engine.handle_command({"type": "set_history", "index": 99})
        assert not resp["ok"]

    def test_select_phrases_highlight(self):
        engine, now = self.seeded()
        session = engine.active_session()
        engine.handle_command({"type": "select_topics", "ids": list(session.topic_ids)})
        phrases = [p["display"] for p in engine.view_model()["phrases"]]
        assert phrases
        resp = engine.handle_command({"type": "select_phrases", "phrases": [phrases[0]]})
        assert resp["ok"] and resp["data"]["highlight_ids"]
        resp = engine.handle_command({"type": "select_phrases", "phrases": ["not a phrase"]})
        assert not resp["ok"] and resp["error"] == "stale-state"

    def test_unknown_command(self):
        engine, _ = self.seeded()
        resp = engine.handle_command({"type": "frobnicate"})
        assert not resp["ok"] and resp["error"] == "unknown-command"


class TestConfig:
    def test_key_value_format(self, tmp_path):
        p = tmp_path / "conf"
        p.write_text(
            "window.duration_secs=600\npipeline.coarse_kmax=7\n"
            "pipeline.theta_sim=0.4\nservice.lang_filter=en\n# comment\nseed=11\n"
        )
        cfg = svc.load_config(p)
        assert cfg.window_duration_secs == 600
        assert cfg.pipeline.coarse_kmax == 7
        assert cfg.pipeline.theta_sim == 0.4
        assert cfg.lang_filter == "en"
        assert cfg.seed == 11 and cfg.pipeline.rng_seed == 11

    def test_json_format(self, tmp_path):
        p = tmp_path / "conf.json"
        p.write_text(json.dumps({"window": {"max_count": 500}, "ingest": {"speed": 0}}))
        cfg = svc.load_config(p)
        assert cfg.window_max_count == 500
        assert cfg.ingest_speed == 0

    def test_unknown_key_rejected(self, tmp_path):
        p = tmp_path / "conf"
        p.write_text("nope.nothing=1\n")
        with pytest.raises(ValueError):
            svc.load_config(p)


class TestHeadlessDeterminism:
    def write_stream(self, tmp_path):
        lines = []
        i = 0
        for minute in range(3):
            for g in ("alpha", "beta", "gamma"):
                for _ in range(5):
                    lines.append(
                        ingest_line(f"{g}{i}", f"{g} {g}tail", 1_000_000 + minute * 60_000 + i)
                    )
                    i += 1
        path = tmp_path / "stream.jsonl"
        path.write_text("\n".join(lines) + "\n")
        return path

    def test_three_runs_identical(self, tmp_path):
        path = self.write_stream(tmp_path)
        outputs = []
        for _ in range(3):
            engine = make_engine()
            chunks = []
            svc.replay_file(engine, path, on_tick=lambda ev: chunks.append(svc.format_tick_text(ev)))
            outputs.append("\n".join(chunks))
        assert outputs[0] == outputs[1] == outputs[2]
        assert "topic" in outputs[0]
