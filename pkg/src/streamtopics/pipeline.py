"""Per-session orchestration: dual-granularity clustering, topic deltas,
representatives, coverage, and the dive-in/search session tree.

Each session runs a coarse clustering (the topical overview) and an
independent fine clustering (source of representative posts) over the
same filtered window. Topic identity is carried across updates by
majority matching, so labels, colors, and deltas stay stable for the UI.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .cluster import (
    ClusterParams,
    Clustering,
    as_matrix,
    assign,
    densify_centroids,
    dynamic_cluster,
    match_clusters,
    top_terms,
)
from .textprep import SparseVector, Vocabulary
from .window import WindowItem, WindowSnapshot

PALETTE_SIZE = 10
COVERAGE_BINS = 5


@dataclass
class PipelineConfig:
    coarse_kmin: int = 2
    coarse_kmax: int = 10
    fine_kmin: int = 2
    fine_kmax: int = 100
    restarts: int = 2
    sample_cap: int = 100_000
    max_iters: int = 50
    theta_sim: float = 0.5
    theta_new: float = 0.7
    history_depth: int = 60
    timeline_bins: int = 20
    rng_seed: int = 0


@dataclass(frozen=True)
class QueryFilter:
    """Pass posts containing every query token."""

    token_ids: frozenset[int]
    query: str = ""


@dataclass(frozen=True)
class CentroidFilter:
    """Pass posts whose nearest parent centroid is among the selected ones.

    The centroid set is frozen at dive-in time and does not track later
    parent drift.
    """

    centroids: tuple[SparseVector, ...]
    selected: frozenset[int]


Filter = Union[QueryFilter, CentroidFilter]


@dataclass
class TopicSummary:
    topic_id: int
    label: list[str]
    new_terms: list[str]
    size: int
    timeline: list[int]
    color: int


@dataclass
class TopicFlow:
    """Where one previous topic's posts went."""

    removed: int
    retained: int
    moved_out: dict[int, int]

    @property
    def prev_size(self) -> int:
        return self.removed + self.retained + sum(self.moved_out.values())


@dataclass
class UpdateDelta:
    flows: dict[int, TopicFlow]  # keyed by previous topic id
    added: dict[int, int]  # current topic id -> posts new to the window
    matched: dict[int, int]  # prev topic id -> curr topic id (stable, so i -> i)
    vanished: list[int]
    appeared: list[int]


@dataclass
class RepresentativeItem:
    post_id: str
    text: str
    subtopic_id: int
    subtopic_terms: list[str]
    topic_id: int
    similar_count: int = 0
    is_new: bool = False


@dataclass
class TopicOverviewState:
    update_index: int
    summaries: list[TopicSummary]
    delta: Optional[UpdateDelta]


@dataclass
class UpdateResult:
    empty: bool
    summaries: list[TopicSummary]
    delta: Optional[UpdateDelta]
    reps: list[RepresentativeItem]
    new_reps: list[RepresentativeItem]
    coverage: Optional[list[int]]
    filtered_items: list[WindowItem]


@dataclass
class Session:
    id: str
    filter_chain: list[Filter]
    coarse_params: ClusterParams
    fine_params: ClusterParams
    active: bool = True
    parent: Optional["Session"] = None
    child: Optional["Session"] = None
    coarse: Optional[Clustering] = None
    fine: Optional[Clustering] = None
    topic_ids: list[int] = field(default_factory=list)
    subtopic_ids: list[int] = field(default_factory=list)
    next_topic_id: int = 0
    next_subtopic_id: int = 0
    coarse_by_pid: dict[str, int] = field(default_factory=dict)
    fine_by_pid: dict[str, int] = field(default_factory=dict)
    labels_by_topic: dict[int, list[str]] = field(default_factory=dict)
    reps: dict[int, RepresentativeItem] = field(default_factory=dict)
    rep_vectors: dict[int, SparseVector] = field(default_factory=dict)
    summaries: list[TopicSummary] = field(default_factory=list)
    selection: set[int] = field(default_factory=set)
    history: deque = field(default_factory=deque)
    update_count: int = 0
    # view state consumed by the service layer
    last_items: list[WindowItem] = field(default_factory=list)
    phrase_top: list = field(default_factory=list)
    phrase_selection: list = field(default_factory=list)
    rep_stream: list[dict] = field(default_factory=list)
    rep_pending: list[dict] = field(default_factory=list)

    def depth(self) -> int:
        d, s = 0, self
        while s.parent is not None:
            d, s = d + 1, s.parent
        return d


def apply_filters(filter_chain: Sequence[Filter], item: WindowItem) -> bool:
    """Single-item filter check; the bulk path below is used per update."""
    for f in filter_chain:
        if isinstance(f, QueryFilter):
            if not f.token_ids <= set(item.token_ids):
                return False
        else:
            cents = densify_centroids(f.centroids, int(max(c.ids[-1] for c in f.centroids if len(c))) + 1)
            labels, _ = assign([item.vector], cents)
            if int(labels[0]) not in f.selected:
                return False
    return True


def filter_snapshot(filter_chain: Sequence[Filter], items: Sequence[WindowItem]) -> list[WindowItem]:
    """Vectorized filter pass over a snapshot's items."""
    current = list(items)
    for f in filter_chain:
        if not current:
            break
        if isinstance(f, QueryFilter):
            current = [it for it in current if f.token_ids <= set(it.token_ids)]
        else:
            width = int(max(c.ids[-1] for c in f.centroids if len(c))) + 1
            cents = densify_centroids(f.centroids, width, np.float64)
            x = as_matrix([it.vector for it in current], width)
            labels, _ = assign(x, cents)
            current = [it for it, l in zip(current, labels) if int(l) in f.selected]
    return current


def timeline(member_dates: Sequence[int], start_ms: int, end_ms: int, bin_count: int) -> list[int]:
    """Publish counts over equal-width time bins (effective dates)."""
    if bin_count < 1:
        raise ValueError("bin_count must be >= 1")
    counts = [0] * bin_count
    span = max(end_ms - start_ms, 1)
    for d in member_dates:
        b = (d - start_ms) * bin_count // span
        counts[min(max(int(b), 0), bin_count - 1)] += 1
    return counts


def extract_representatives(
    fine: Clustering,
    items: Sequence[WindowItem],
    vocab: Vocabulary,
    subtopic_ids: Sequence[int],
    topic_id_of_item: Sequence[int],
    n_cols: int,
) -> dict[int, RepresentativeItem]:
    """Per subtopic, the member post with maximal similarity to the
    centroid; ties break toward the earliest arrival."""
    x = as_matrix([it.vector for it in items], n_cols)
    cents = densify_centroids(fine.centroids, x.shape[1])
    dots = _kernels.own_dots(x, cents, fine.assignment)
    arrivals = np.fromiter((it.arrival for it in items), dtype=np.int64, count=len(items))
    order = np.lexsort((arrivals, -dots, fine.assignment))
    reps: dict[int, RepresentativeItem] = {}
    seen: set[int] = set()
    for idx in order:
        c = int(fine.assignment[idx])
        if c in seen:
            continue
        seen.add(c)
        sid = subtopic_ids[c]
        item = items[idx]
        reps[sid] = RepresentativeItem(
            post_id=item.post.id,
            text=item.post.text,
            subtopic_id=sid,
            subtopic_terms=top_terms(fine.centroids[c], vocab, 3),
            topic_id=int(topic_id_of_item[idx]),
        )
    return reps


def representative_novelty(
    prev_vectors: dict[int, SparseVector],
    prev_reps: dict[int, RepresentativeItem],
    curr_reps: dict[int, RepresentativeItem],
    curr_vectors: dict[int, SparseVector],
    theta_new: float,
) -> None:
    """Flag representatives that are new subtopics or drifted far from the
    previous representative (in place)."""
    for sid, rep in curr_reps.items():
        prev_rep = prev_reps.get(sid)
        if prev_rep is None:
            rep.is_new = True
        elif prev_rep.post_id == rep.post_id:
            rep.is_new = False
        else:
            sim = curr_vectors[sid].dot(prev_vectors[sid]) if sid in prev_vectors else 0.0
            rep.is_new = bool(sim < theta_new)


def coverage(
    selection: set[int],
    topic_id_of_item: Sequence[int],
    fine_labels: Sequence[int],
    subtopic_ids: Sequence[int],
    items: Sequence[WindowItem],
    rep_vectors: dict[int, SparseVector],
    n_cols: int,
) -> list[int]:
    """Five-bucket histogram of post-to-representative similarity over the
    posts whose coarse topic is selected."""
    sel_idx = [i for i, t in enumerate(topic_id_of_item) if t in selection]
    buckets = [0] * COVERAGE_BINS
    if not sel_idx:
        return buckets
    x = as_matrix([items[i].vector for i in sel_idx], n_cols)
    rep_matrix = densify_centroids([rep_vectors[sid] for sid in subtopic_ids], x.shape[1])
    sub_pos = np.fromiter((int(fine_labels[i]) for i in sel_idx), dtype=np.int32, count=len(sel_idx))
    dots = _kernels.own_dots(x, rep_matrix, sub_pos)
    for d in dots:
        buckets[min(int(max(d, 0.0) * COVERAGE_BINS), COVERAGE_BINS - 1)] += 1
    return buckets


def similar_posts(
    rep_vector: SparseVector,
    items: Sequence[WindowItem],
    theta_sim: float,
    n_cols: int,
) -> list[tuple[str, float]]:
    """Selection posts at least theta-similar to the representative,
    most similar first."""
    if not items:
        return []
    x = as_matrix([it.vector for it in items], n_cols)
    rep = densify_centroids([rep_vector], x.shape[1])[0]
    dots = x @ rep
    order = np.argsort(-dots, kind="stable")
    return [
        (items[i].post.id, float(dots[i]))
        for i in order
        if dots[i] >= theta_sim
    ]


class Pipeline:
    """Session factory and update driver bound to one text model."""

    def __init__(self, vocab: Vocabulary, cfg: Optional[PipelineConfig] = None):
        self.vocab = vocab
        self.cfg = cfg or PipelineConfig()
        self._session_counter = 0

    def _params(self, kind: str) -> ClusterParams:
        cfg = self.cfg
        if kind == "coarse":
            k_min, k_max = cfg.coarse_kmin, cfg.coarse_kmax
        else:
            k_min, k_max = cfg.fine_kmin, cfg.fine_kmax
        return ClusterParams(
            k_min=k_min,
            k_max=k_max,
            restarts=cfg.restarts,
            sample_cap=cfg.sample_cap,
            max_iters=cfg.max_iters,
            rng_seed=cfg.rng_seed,
        )

    def new_session(self, filter_chain: Sequence[Filter] = (), parent: Optional[Session] = None) -> Session:
        self._session_counter += 1
        return Session(
            id=f"s{self._session_counter}",
            filter_chain=list(filter_chain),
            coarse_params=self._params("coarse"),
            fine_params=self._params("fine"),
            parent=parent,
            history=deque(maxlen=self.cfg.history_depth),
        )

    def run_update(self, session: Session, snapshot: WindowSnapshot) -> UpdateResult:
        """One full refresh: cluster both granularities, carry topic
        identity over from the previous run, and rebuild the derived
        views."""
        if not session.active:
            raise ValueError("run_update on a paused session")
        items = filter_snapshot(session.filter_chain, snapshot.items)
        session.update_count += 1
        if not items:
            session.summaries = []
            session.coarse = session.fine = None
            session.topic_ids, session.subtopic_ids = [], []
            session.coarse_by_pid, session.fine_by_pid = {}, {}
            session.reps, session.rep_vectors = {}, {}
            session.last_items = []
            state = TopicOverviewState(session.update_count, [], None)
            session.history.append(state)
            return UpdateResult(True, [], None, [], [], None, [])

        n_cols = max(len(self.vocab), 1)
        x = as_matrix([it.vector for it in items], n_cols)
        seed_base = self.cfg.rng_seed * 1_000_003 + session.update_count * 2
        coarse_params = ClusterParams(**{**session.coarse_params.__dict__, "rng_seed": seed_base})
        fine_params = ClusterParams(**{**session.fine_params.__dict__, "rng_seed": seed_base + 1})

        # the two granularities are independent; order is irrelevant
        coarse = dynamic_cluster(x, session.coarse, coarse_params)
        fine = dynamic_cluster(x, session.fine, fine_params)

        pids = [it.post.id for it in items]
        topic_ids, coarse_by_pid, coarse_match = self._carry_identity(
            session.coarse_by_pid, coarse, pids, session.topic_ids, "topic", session
        )
        subtopic_ids, fine_by_pid, fine_match = self._carry_identity(
            session.fine_by_pid, fine, pids, session.subtopic_ids, "subtopic", session
        )

        delta = self._compute_delta(session.coarse_by_pid, coarse_by_pid, coarse_match)
        topic_of_item = [topic_ids[c] for c in coarse.assignment]
        summaries = self._summaries(coarse, topic_ids, items, snapshot, session.labels_by_topic)

        reps = extract_representatives(fine, items, self.vocab, subtopic_ids, topic_of_item, n_cols)
        idx_of_pid = {pid: i for i, pid in enumerate(pids)}
        rep_vectors = {
            sid: items[idx_of_pid[rep.post_id]].vector for sid, rep in reps.items()
        }
        representative_novelty(session.rep_vectors, session.reps, reps, rep_vectors, self.cfg.theta_new)
        new_reps = [r for r in reps.values() if r.is_new]

        cov = None
        if session.selection:
            session.selection &= set(topic_ids)
            cov = coverage(
                session.selection, topic_of_item, fine.assignment, subtopic_ids,
                items, rep_vectors, n_cols,
            )
            sel_items = [it for it, t in zip(items, topic_of_item) if t in session.selection]
            for rep in reps.values():
                if rep.topic_id in session.selection:
                    rep.similar_count = len(
                        similar_posts(rep_vectors[rep.subtopic_id], sel_items, self.cfg.theta_sim, n_cols)
                    )

        session.coarse, session.fine = coarse, fine
        session.topic_ids, session.subtopic_ids = topic_ids, subtopic_ids
        session.coarse_by_pid, session.fine_by_pid = coarse_by_pid, fine_by_pid
        session.labels_by_topic = {s.topic_id: s.label for s in summaries}
        session.reps, session.rep_vectors = reps, rep_vectors
        session.summaries = summaries
        session.last_items = items
        session.history.append(TopicOverviewState(session.update_count, summaries, delta))
        return UpdateResult(False, summaries, delta, list(reps.values()), new_reps, cov, items)

    def _carry_identity(self, prev_by_pid, clustering, pids, prev_ids, kind, session):
        """Stable ids for the new clusters via surviving-majority matching."""
        curr_pos_by_pid = {pid: int(c) for pid, c in zip(pids, clustering.assignment)}
        match = match_clusters(prev_by_pid, curr_pos_by_pid) if prev_by_pid else {}
        pos_to_id: dict[int, int] = {}
        for prev_id, pos in match.items():
            pos_to_id[pos] = prev_id
        ids = []
        for pos in range(clustering.chosen_k):
            if pos in pos_to_id:
                ids.append(pos_to_id[pos])
            else:
                if kind == "topic":
                    ids.append(session.next_topic_id)
                    session.next_topic_id += 1
                else:
                    ids.append(session.next_subtopic_id)
                    session.next_subtopic_id += 1
        by_pid = {pid: ids[pos] for pid, pos in curr_pos_by_pid.items()}
        id_match = {prev_id: ids[pos] for prev_id, pos in match.items()}
        return ids, by_pid, id_match

    @staticmethod
    def _compute_delta(prev_by_pid, curr_by_pid, match) -> UpdateDelta:
        prev_topics = sorted(set(prev_by_pid.values()))
        curr_topics = sorted(set(curr_by_pid.values()))
        flows: dict[int, TopicFlow] = {
            t: TopicFlow(removed=0, retained=0, moved_out={}) for t in prev_topics
        }
        incoming_known: dict[int, int] = {t: 0 for t in curr_topics}
        for pid, t_prev in prev_by_pid.items():
            flow = flows[t_prev]
            t_curr = curr_by_pid.get(pid)
            if t_curr is None:
                flow.removed += 1
            elif match.get(t_prev) == t_curr:
                flow.retained += 1
                incoming_known[t_curr] += 1
            else:
                flow.moved_out[t_curr] = flow.moved_out.get(t_curr, 0) + 1
                incoming_known[t_curr] += 1
        curr_sizes: dict[int, int] = {}
        for t in curr_by_pid.values():
            curr_sizes[t] = curr_sizes.get(t, 0) + 1
        added = {t: curr_sizes[t] - incoming_known.get(t, 0) for t in curr_topics}
        matched_ids = set(match.values())
        return UpdateDelta(
            flows=flows,
            added=added,
            matched=dict(match),
            vanished=[t for t in prev_topics if t not in match],
            appeared=[t for t in curr_topics if t not in matched_ids],
        )

    def _summaries(self, coarse, topic_ids, items, snapshot, prev_labels) -> list[TopicSummary]:
        dates: dict[int, list[int]] = {t: [] for t in topic_ids}
        for it, pos in zip(items, coarse.assignment):
            dates[topic_ids[int(pos)]].append(it.post.effective_date)
        out = []
        for pos, tid in enumerate(topic_ids):
            label = top_terms(coarse.centroids[pos], self.vocab, 5)
            old = set(prev_labels.get(tid, []))
            out.append(
                TopicSummary(
                    topic_id=tid,
                    label=label,
                    new_terms=[t for t in label if t not in old],
                    size=int(coarse.sizes[pos]),
                    timeline=timeline(dates[tid], snapshot.start_ms, snapshot.end_ms, self.cfg.timeline_bins),
                    color=tid % PALETTE_SIZE,
                )
            )
        out.sort(key=lambda s: s.topic_id)
        return out

    def dive_in(self, session: Session, selected_topic_ids: Sequence[int]) -> Session:
        """Freeze the parent's centroids into a filter and hand control to a
        child session; the parent pauses until go_back."""
        if session.coarse is None:
            raise ValueError("dive-in requires a current coarse clustering")
        selected_pos = {
            pos for pos, tid in enumerate(session.topic_ids) if tid in set(selected_topic_ids)
        }
        if not selected_pos:
            raise ValueError("dive-in requires a non-empty topic selection")
        filt = CentroidFilter(
            centroids=tuple(session.coarse.centroids),
            selected=frozenset(selected_pos),
        )
        child = self.new_session(session.filter_chain + [filt], parent=session)
        session.child = child
        session.active = False
        child.active = True
        return child

    def search(self, session: Session, query: str, stopwords, clean, tokenize) -> Session:
        """New child session over the posts matching every query token."""
        tokens = tokenize(clean(query), stopwords)
        if not tokens:
            raise ValueError("query contains only stop words")
        token_ids = frozenset(self.vocab.id_of(t) for t in tokens)
        child = self.new_session(
            session.filter_chain + [QueryFilter(token_ids=token_ids, query=query)],
            parent=session,
        )
        session.child = child
        session.active = False
        child.active = True
        return child

    @staticmethod
    def go_back(session: Session) -> Session:
        if session.parent is None:
            raise ValueError("already at the root session")
        parent = session.parent
        parent.child = None
        parent.active = True
        session.active = False
        return parent

    @staticmethod
    def history_get(session: Session, index: int) -> TopicOverviewState:
        if not 0 <= index < len(session.history):
            raise IndexError(f"history index {index} out of range")
        return session.history[index]
