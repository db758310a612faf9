"""Ingestion, update loop, and the analyst-facing event protocol.

The engine owns the text model, the sliding window, and a session tree.
Clients receive one SnapshotEvent (the full view model) followed by
ordered delta/session events; the server maintains its published view
model through the exact same fold the client uses, so a replayed event
log reconstructs the server state hash bit-for-bit.

Time is stream time: eviction and update scheduling key on post
timestamps, which makes file replays deterministic and independent of
wall clock.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from typing import Callable, Optional

from . import phrases as ph
from .pipeline import Pipeline, PipelineConfig, Session, UpdateResult
from .textprep import (
    IdfModel,
    RawPost,
    Vocabulary,
    clean_text,
    load_stopwords,
    tokenize,
    vector_from_token_ids,
)
from .window import SlidingWindow, WindowItem


@dataclass
class ServiceConfig:
    window_duration_secs: int = 20 * 60
    window_max_count: Optional[int] = None
    update_interval_secs: float = 60.0
    lang_filter: Optional[str] = None
    ingest_speed: float = 1.0
    listen_addr: str = "127.0.0.1:8040"
    seed: int = 0
    stopword_file: Optional[str] = None
    idf_file: Optional[str] = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)


_CONFIG_KEYS = {
    "window.duration_secs": ("window_duration_secs", int),
    "window.max_count": ("window_max_count", int),
    "pipeline.update_interval_secs": ("update_interval_secs", float),
    "service.lang_filter": ("lang_filter", str),
    "service.listen_addr": ("listen_addr", str),
    "ingest.speed": ("ingest_speed", float),
    "seed": ("seed", int),
    "stopword_file": ("stopword_file", str),
    "idf_file": ("idf_file", str),
}

_PIPELINE_KEYS = {
    "pipeline.coarse_kmax": ("coarse_kmax", int),
    "pipeline.fine_kmax": ("fine_kmax", int),
    "pipeline.coarse_kmin": ("coarse_kmin", int),
    "pipeline.fine_kmin": ("fine_kmin", int),
    "pipeline.theta_sim": ("theta_sim", float),
    "pipeline.theta_new": ("theta_new", float),
    "pipeline.history_depth": ("history_depth", int),
    "pipeline.timeline_bins": ("timeline_bins", int),
    "pipeline.sample_cap": ("sample_cap", int),
    "pipeline.max_iters": ("max_iters", int),
    "pipeline.restarts": ("restarts", int),
}


def load_config(path) -> ServiceConfig:
    """Read a config file: JSON object or flat ``key=value`` lines, using
    the dotted key names documented per module."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    stripped = text.lstrip()
    flat: dict[str, str] = {}
    if stripped.startswith("{"):
        def flatten(prefix, obj):
            for k, v in obj.items():
                key = f"{prefix}.{k}" if prefix else k
                if isinstance(v, dict):
                    flatten(key, v)
                else:
                    flat[key] = v

        flatten("", json.loads(stripped))
    else:
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            flat[key.strip()] = value.strip()
    cfg = ServiceConfig()
    pipe_kwargs = {}
    for key, value in flat.items():
        if key in _CONFIG_KEYS:
            attr, conv = _CONFIG_KEYS[key]
            setattr(cfg, attr, conv(value))
        elif key in _PIPELINE_KEYS:
            attr, conv = _PIPELINE_KEYS[key]
            pipe_kwargs[attr] = conv(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if pipe_kwargs:
        cfg.pipeline = replace(cfg.pipeline, **pipe_kwargs)
    cfg.pipeline = replace(cfg.pipeline, rng_seed=cfg.seed)
    return cfg


def parse_ingest_line(line: str) -> Optional[RawPost]:
    """One JSONL ingest record -> RawPost, or None for malformed input."""
    try:
        rec = json.loads(line)
        created = _epoch_ms(rec["created_at"])
        origin = rec.get("origin_created_at")
        return RawPost(
            id=str(rec["id"]),
            text=rec["text"],
            published_at=created,
            lang=rec.get("lang"),
            origin_published_at=_epoch_ms(origin) if origin is not None else None,
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        return None


def _epoch_ms(value) -> int:
    if isinstance(value, bool):
        raise ValueError("bad timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    dt = datetime.fromisoformat(str(value).replace("Z", "+00:00"))
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def _quantize(value):
    """Canonical form for hashing: every number becomes a nanodecimal
    integer. Ints are folded the same way as floats because a JSON round
    trip erases the distinction for the browser client; both sides apply
    identical float64 arithmetic, so the hashes agree bit-for-bit."""
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return math.floor(value * 1e9 + 0.5)
    if isinstance(value, dict):
        return {str(k): _quantize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_quantize(v) for v in value]
    return value


def state_hash(vm: dict) -> str:
    canon = json.dumps(_quantize(vm), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def apply_event(vm: dict, event: dict) -> dict:
    """Fold one client event into a view model (shared client semantics)."""
    kind, payload = event["kind"], event["payload"]
    if kind == "snapshot":
        return json.loads(json.dumps(payload))
    out = dict(vm)
    for key, value in payload.items():
        out[key] = value
    return out


class StaleStateError(Exception):
    """Command referenced ids the server no longer has."""


class Engine:
    """Single-process analysis service core (transport-agnostic)."""

    def __init__(self, config: Optional[ServiceConfig] = None):
        self.config = config or ServiceConfig()
        self.stopwords = load_stopwords(self.config.stopword_file)
        self.vocab = Vocabulary()
        if self.config.idf_file:
            self.idf = IdfModel.load(self.config.idf_file)
        else:
            self.idf = IdfModel({}, 1)
        self.window = SlidingWindow(
            duration_ms=self.config.window_duration_secs * 1000,
            max_count=self.config.window_max_count,
        )
        self.pipeline = Pipeline(self.vocab, self.config.pipeline)
        self.session = self.pipeline.new_session()
        self.ingested = 0
        self.skipped = 0
        self.stream_now: Optional[int] = None
        self._lock = threading.Lock()
        self._seq = 0
        self._vm = self._initial_vm()
        self._record_file = None
        self._subscribers: list[Callable[[dict], None]] = []
        self._last_range: tuple[int, int] = (0, 1)

    # ------------------------------------------------------------- events

    def _initial_vm(self) -> dict:
        return {
            "session": self._session_fragment(),
            "topics": [],
            "delta": None,
            "selection": [],
            "phrases": [],
            "phrase_selection": [],
            "highlight_ids": [],
            "reps": {"stream": [], "pending": []},
            "coverage": None,
            "history_len": 0,
        }

    def start_recording(self, path) -> None:
        self._record_file = open(path, "w", encoding="utf-8")
        self._write_record(self.snapshot_event())

    def close(self) -> None:
        if self._record_file:
            self._record_file.close()
            self._record_file = None

    def subscribe(self, callback: Callable[[dict], None]) -> None:
        self._subscribers.append(callback)

    def unsubscribe(self, callback) -> None:
        if callback in self._subscribers:
            self._subscribers.remove(callback)

    def snapshot_event(self) -> dict:
        return {"seq": self._seq, "kind": "snapshot", "payload": json.loads(json.dumps(self._vm))}

    def _emit(self, kind: str, payload: dict) -> dict:
        self._seq += 1
        event = {"seq": self._seq, "kind": kind, "payload": payload}
        self._vm = apply_event(self._vm, event)
        self._write_record(event)
        for cb in list(self._subscribers):
            cb(event)
        return event

    def _write_record(self, event: dict) -> None:
        if self._record_file:
            self._record_file.write(json.dumps(event, sort_keys=True) + "\n")
            self._record_file.flush()

    def view_model(self) -> dict:
        return self._vm

    def state_hash(self) -> str:
        return state_hash(self._vm)

    # -------------------------------------------------------------- ingest

    def ingest_line(self, line: str) -> bool:
        post = parse_ingest_line(line)
        if post is None:
            self.skipped += 1
            return False
        return self.ingest_post(post)

    def ingest_post(self, post: RawPost) -> bool:
        if self.config.lang_filter and post.lang and post.lang != self.config.lang_filter:
            self.skipped += 1
            return False
        tokens = tokenize(clean_text(post.text), self.stopwords)
        if not tokens:
            self.skipped += 1
            return False
        token_ids = [self.vocab.id_of(t) for t in tokens]
        vec = vector_from_token_ids(token_ids, [self.idf.idf(t) for t in tokens])
        self.window.append(post, vec, token_ids)
        self.ingested += 1
        if self.stream_now is None or post.published_at > self.stream_now:
            self.stream_now = post.published_at
        return True

    # ---------------------------------------------------------------- tick

    def active_session(self) -> Session:
        s = self.session
        while s.child is not None and not s.active:
            s = s.child
        return s

    def tick(self, now_ms: Optional[int] = None) -> dict:
        """One update cycle: evict, snapshot, cluster, publish a DeltaEvent."""
        with self._lock:
            now = now_ms if now_ms is not None else (self.stream_now or 0)
            self.window.evict_expired(now)
            snapshot = self.window.snapshot(now)
            self._last_range = (snapshot.start_ms, snapshot.end_ms)
            session = self.active_session()
            result = self.pipeline.run_update(session, snapshot)
            self._refresh_phrases(session)
            for rep in result.new_reps:
                entry = self._rep_dict(rep)
                if all(e["post_id"] != entry["post_id"] for e in session.rep_pending):
                    session.rep_pending.append(entry)
            payload = self._delta_fragments(session, result)
            return self._emit("delta", payload)

    def _refresh_phrases(self, session: Session) -> None:
        docs = self._selection_docs(session) if session.selection else []
        if not docs:
            session.phrase_top = []
            return
        start, end = self._last_range
        top, _ = ph.phrase_view(
            docs,
            start,
            max(end, start + 1),
            prev=session.phrase_top,
            idf_of=lambda tid: self.idf.idf(self.vocab.token_of(tid)),
            display_of=self.vocab.token_of,
        )
        session.phrase_top = top

    def _selection_docs(self, session: Session) -> list[ph.PhraseDoc]:
        return [
            ph.PhraseDoc(it.post.id, tuple(it.token_ids), it.post.effective_date)
            for it in session.last_items
            if session.coarse_by_pid.get(it.post.id) in session.selection
        ]

    # ------------------------------------------------------- vm fragments

    def _session_fragment(self) -> dict:
        s = self.active_session() if hasattr(self, "session") else None
        if s is None:
            return {"id": "s0", "depth": 0, "filters": [], "update_count": 0}
        return {
            "id": s.id,
            "depth": s.depth(),
            "filters": [self._filter_desc(f) for f in s.filter_chain],
            "update_count": s.update_count,
        }

    @staticmethod
    def _filter_desc(f) -> str:
        from .pipeline import QueryFilter

        if isinstance(f, QueryFilter):
            return f"query:{f.query}" if f.query else "query"
        return f"topics:{','.join(map(str, sorted(f.selected)))}"

    @staticmethod
    def _rep_dict(rep) -> dict:
        return {
            "post_id": rep.post_id,
            "text": rep.text,
            "subtopic_id": rep.subtopic_id,
            "subtopic_terms": rep.subtopic_terms,
            "topic_id": rep.topic_id,
            "similar_count": rep.similar_count,
            "is_new": rep.is_new,
        }

    @staticmethod
    def _summary_dict(s) -> dict:
        return {
            "topic_id": s.topic_id,
            "label": s.label,
            "new_terms": s.new_terms,
            "size": s.size,
            "timeline": s.timeline,
            "color": s.color,
        }

    @staticmethod
    def _delta_dict(delta) -> Optional[dict]:
        if delta is None:
            return None
        return {
            "flows": {
                str(tid): {
                    "removed": f.removed,
                    "retained": f.retained,
                    "moved_out": {str(t): c for t, c in sorted(f.moved_out.items())},
                }
                for tid, f in sorted(delta.flows.items())
            },
            "added": {str(t): c for t, c in sorted(delta.added.items())},
            "matched": {str(a): b for a, b in sorted(delta.matched.items())},
            "vanished": delta.vanished,
            "appeared": delta.appeared,
        }

    @staticmethod
    def _phrase_dict(p) -> dict:
        return {
            "display": p.display,
            "doc_freq": p.doc_freq,
            "score": p.score,
            "temporal": p.temporal,
            "barcode": p.barcode,
            "is_new": p.is_new,
            "post_ids": p.post_ids,
        }

    def _phrases_fragment(self, session) -> list[dict]:
        return [self._phrase_dict(p) for p in session.phrase_top]

    def _reps_fragment(self, session: Session) -> dict:
        return {"stream": list(session.rep_stream), "pending": list(session.rep_pending)}

    def _delta_fragments(self, session: Session, result: UpdateResult) -> dict:
        return {
            "session": self._session_fragment(),
            "topics": [self._summary_dict(s) for s in result.summaries],
            "delta": self._delta_dict(result.delta),
            "selection": sorted(session.selection),
            "phrases": self._phrases_fragment(session),
            "coverage": result.coverage,
            "reps": self._reps_fragment(session),
            "history_len": len(session.history),
        }

    def _view_fragments(self, session: Session, highlight: Optional[list[str]] = None) -> dict:
        """Selection-dependent fragments after a command."""
        cov = None
        if session.selection and session.last_items:
            from .pipeline import coverage as cov_fn

            items = session.last_items
            topic_of = [session.coarse_by_pid[it.post.id] for it in items]
            fine_pos = [session.subtopic_ids.index(session.fine_by_pid[it.post.id]) for it in items]
            cov = cov_fn(
                set(session.selection),
                topic_of,
                fine_pos,
                session.subtopic_ids,
                items,
                session.rep_vectors,
                max(len(self.vocab), 1),
            )
        return {
            "selection": sorted(session.selection),
            "phrases": self._phrases_fragment(session),
            "phrase_selection": [],
            "coverage": cov,
            "reps": self._reps_fragment(session),
            "highlight_ids": highlight if highlight is not None else [],
        }

    # ------------------------------------------------------------ commands

    def handle_command(self, cmd: dict) -> dict:
        """Apply one client command; may emit a session event."""
        with self._lock:
            try:
                ctype = cmd.get("type")
                handler = getattr(self, f"_cmd_{ctype}", None)
                if handler is None:
                    return {"ok": False, "error": "unknown-command", "detail": str(ctype)}
                data = handler(cmd)
                return {"ok": True, "data": data}
            except StaleStateError as e:
                return {"ok": False, "error": "stale-state", "detail": str(e)}
            except (ValueError, IndexError) as e:
                return {"ok": False, "error": "invalid", "detail": str(e)}

    def _cmd_select_topics(self, cmd) -> dict:
        session = self.active_session()
        ids = cmd.get("ids", [])
        current = set(session.topic_ids)
        stale = [i for i in ids if i not in current]
        if stale:
            raise StaleStateError(f"unknown topic ids {stale}")
        session.selection = set(ids)
        session.phrase_selection = []
        self._refresh_phrases(session)
        self._refresh_similar_counts(session)
        event = self._emit("session", self._view_fragments(session))
        return {"selection": sorted(session.selection), "seq": event["seq"]}

    def _refresh_similar_counts(self, session: Session) -> None:
        from .pipeline import similar_posts

        sel_items = [
            it
            for it in session.last_items
            if session.coarse_by_pid.get(it.post.id) in session.selection
        ]
        width = max(len(self.vocab), 1)
        for rep in session.reps.values():
            if rep.topic_id in session.selection:
                rep.similar_count = len(
                    similar_posts(
                        session.rep_vectors[rep.subtopic_id],
                        sel_items,
                        self.config.pipeline.theta_sim,
                        width,
                    )
                )

    def _cmd_select_phrases(self, cmd) -> dict:
        session = self.active_session()
        by_display = {p.display: p for p in session.phrase_top}
        wanted = cmd.get("phrases", [])
        stale = [p for p in wanted if p not in by_display]
        if stale:
            raise StaleStateError(f"unknown phrases {stale}")
        session.phrase_selection = [by_display[p].tokens for p in wanted]
        if wanted:
            docs = self._selection_docs(session)
            ids = sorted(ph.phrase_intersection(session.phrase_selection, docs))
        else:
            ids = []
        event = self._emit(
            "session", {"phrase_selection": wanted, "highlight_ids": ids}
        )
        return {"highlight_ids": ids, "seq": event["seq"]}

    def _cmd_dive_in(self, cmd) -> dict:
        session = self.active_session()
        if not session.selection:
            raise ValueError("dive-in requires a topic selection")
        child = self.pipeline.dive_in(session, sorted(session.selection))
        payload = self._initial_vm()
        payload["session"] = self._session_fragment()
        event = self._emit("session", payload)
        return {"session_id": child.id, "depth": child.depth(), "seq": event["seq"]}

    def _cmd_search(self, cmd) -> dict:
        session = self.active_session()
        query = cmd.get("query", "")
        child = self.pipeline.search(session, query, self.stopwords, clean_text, tokenize)
        payload = self._initial_vm()
        payload["session"] = self._session_fragment()
        event = self._emit("session", payload)
        return {"session_id": child.id, "depth": child.depth(), "seq": event["seq"]}

    def _cmd_go_back(self, cmd) -> dict:
        session = self.active_session()
        parent = self.pipeline.go_back(session)
        payload = {
            "session": self._session_fragment(),
            "topics": [self._summary_dict(s) for s in parent.summaries],
            "delta": None,
            "selection": sorted(parent.selection),
            "phrases": self._phrases_fragment(parent),
            "phrase_selection": [],
            "highlight_ids": [],
            "coverage": None,
            "reps": self._reps_fragment(parent),
            "history_len": len(parent.history),
        }
        event = self._emit("session", payload)
        return {"session_id": parent.id, "depth": parent.depth(), "seq": event["seq"]}

    def _cmd_set_history(self, cmd) -> dict:
        session = self.active_session()
        index = cmd.get("index")
        if not isinstance(index, int):
            raise ValueError("index must be an integer")
        state = self.pipeline.history_get(session, index)
        return {
            "update_index": state.update_index,
            "topics": [self._summary_dict(s) for s in state.summaries],
            "delta": self._delta_dict(state.delta),
        }

    def _cmd_get_similar(self, cmd) -> dict:
        from .pipeline import similar_posts

        session = self.active_session()
        sid = cmd.get("subtopic_id")
        if sid not in session.reps:
            raise StaleStateError(f"unknown subtopic {sid}")
        items = session.last_items
        sel_items = [
            it
            for it in items
            if not session.selection or session.coarse_by_pid.get(it.post.id) in session.selection
        ]
        posts = similar_posts(
            session.rep_vectors[sid],
            sel_items,
            self.config.pipeline.theta_sim,
            max(len(self.vocab), 1),
        )
        text_of = {it.post.id: it.post.text for it in sel_items}
        return {
            "rep": self._rep_dict(session.reps[sid]),
            "posts": [{"post_id": p, "similarity": s, "text": text_of[p]} for p, s in posts],
        }

    def _cmd_insert_new_reps(self, cmd) -> dict:
        session = self.active_session()
        inserted = len(session.rep_pending)
        session.rep_stream = (session.rep_pending + session.rep_stream)[:200]
        session.rep_pending = []
        event = self._emit("session", {"reps": self._reps_fragment(session)})
        return {"inserted": inserted, "seq": event["seq"]}


def replay_file(
    engine: Engine,
    path,
    speed: float = 0.0,
    on_tick: Optional[Callable[[dict], None]] = None,
    sleep: Optional[Callable[[float], None]] = None,
    drive_updates: bool = True,
) -> int:
    """Drive the engine from a JSONL file.

    With ``drive_updates`` set, updates fire on stream time (every update
    interval of post timestamps); the serve path turns that off because
    its wall-clock loop owns the cadence. ``speed`` scales inter-post
    wall-clock pacing; 0 replays as fast as possible. Returns the number
    of ticks run.
    """
    import time as _time

    sleep = sleep or _time.sleep
    interval_ms = int(engine.config.update_interval_secs * 1000)
    next_tick: Optional[int] = None
    last_ts: Optional[int] = None
    ticks = 0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            post = parse_ingest_line(line)
            if post is None:
                engine.skipped += 1
                continue
            if speed > 0 and last_ts is not None and post.published_at > last_ts:
                sleep((post.published_at - last_ts) / 1000.0 / speed)
            last_ts = post.published_at
            if next_tick is None:
                next_tick = post.published_at + interval_ms
            while drive_updates and post.published_at >= next_tick:
                event = engine.tick(next_tick)
                ticks += 1
                if on_tick:
                    on_tick(event)
                next_tick += interval_ms
            engine.ingest_post(post)
    if drive_updates:
        final_now = (last_ts if last_ts is not None else 0) + 1
        event = engine.tick(final_now)
        ticks += 1
        if on_tick:
            on_tick(event)
    return ticks


def serve_ingest_socket(engine: Engine, host: str, port: int):
    """TCP listener accepting JSONL ingest lines, one connection per
    producer. Returns the server; call ``shutdown()`` to stop."""
    import socketserver

    class Handler(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                try:
                    engine.ingest_line(raw.decode("utf-8"))
                except UnicodeDecodeError:
                    engine.skipped += 1

    class Server(socketserver.ThreadingTCPServer):
        allow_reuse_address = True
        daemon_threads = True

    server = Server((host, port), Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


def format_tick_text(event: dict) -> str:
    """Human-readable one-update summary for headless replay."""
    payload = event["payload"]
    lines = [f"update {payload['session']['update_count']} (session {payload['session']['id']}):"]
    for t in payload["topics"]:
        label = " ".join(t["label"])
        marks = ""
        if payload["delta"]:
            tid = str(t["topic_id"])
            if t["topic_id"] in payload["delta"]["appeared"]:
                marks = " [new]"
            elif tid in payload["delta"]["flows"]:
                f = payload["delta"]["flows"][tid]
                moved = sum(f["moved_out"].values())
                marks = f" [-{f['removed']} removed, {moved} moved]"
        lines.append(f"  topic {t['topic_id']:>3} ({t['size']:>5} posts): {label}{marks}")
    if not payload["topics"]:
        lines.append("  (no topics - empty window)")
    return "\n".join(lines)
