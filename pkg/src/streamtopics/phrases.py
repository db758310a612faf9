"""Frequent-phrase extraction and the phrase view layout.

Phrases are contiguous content-token n-grams (1..5 tokens) counted once
per post. Each phrase row carries a five-bin recency profile and a 100-bin
barcode strip whose greedy slot assignment aligns co-occurring phrases
into contiguous dark blocks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

MAX_PHRASE_LEN = 5
TEMPORAL_BINS = 5
BARCODE_BINS = 100


class PhraseDoc(NamedTuple):
    """One selected post, reduced to what the phrase view needs."""

    post_id: str
    token_ids: tuple[int, ...]
    effective_ms: int


@dataclass
class PhraseStats:
    tokens: tuple[int, ...]
    display: str
    doc_freq: int
    score: float
    post_ids: list[str] = field(default_factory=list)
    temporal: list[float] = field(default_factory=list)
    barcode: list[float] = field(default_factory=list)
    is_new: bool = False


@dataclass
class BarcodeLayout:
    """Bijection from post id to a slot in [0, n), plus the 100-bin totals."""

    slots: dict[str, int]
    n: int
    bin_counts: list[int]

    def bin_of(self, post_id: str) -> int:
        return self.slots[post_id] * BARCODE_BINS // self.n


def contains_phrase(tokens: Sequence[int], phrase: Sequence[int]) -> bool:
    """True when the phrase occurs as a contiguous run in the token stream."""
    m = len(phrase)
    if m == 0 or m > len(tokens):
        return False
    first = phrase[0]
    for i in range(len(tokens) - m + 1):
        if tokens[i] == first and tuple(tokens[i : i + m]) == tuple(phrase):
            return True
    return False


def default_min_support(n_posts: int) -> int:
    return max(5, int(0.005 * n_posts))


def extract_phrases(
    docs: Sequence[PhraseDoc],
    top_n: int = 10,
    min_support: Optional[int] = None,
    idf_of: Optional[Callable[[int], float]] = None,
    display_of: Optional[Callable[[int], str]] = None,
) -> list[PhraseStats]:
    """Top frequent phrases of a selection, most frequent first.

    Candidates below the support floor are dropped; a phrase is also
    dropped when a strict superphrase retains at least 80% of its posts
    (the longer phrase tells the same story). Importance score is
    doc_freq times the mean idf of the member tokens.
    """
    if not docs:
        raise ValueError("phrase extraction needs a non-empty selection")
    support = default_min_support(len(docs)) if min_support is None else min_support
    posts_of: dict[tuple[int, ...], list[str]] = {}
    for doc in docs:
        toks = doc.token_ids
        seen: set[tuple[int, ...]] = set()
        for size in range(1, MAX_PHRASE_LEN + 1):
            for i in range(len(toks) - size + 1):
                seen.add(tuple(toks[i : i + size]))
        for gram in seen:
            posts_of.setdefault(gram, []).append(doc.post_id)
    candidates = {g: ids for g, ids in posts_of.items() if len(ids) >= support}

    def subsumed(gram: tuple[int, ...], freq: int) -> bool:
        for other, ids in candidates.items():
            if len(other) > len(gram) and contains_phrase(other, gram) and len(ids) >= 0.8 * freq:
                return True
        return False

    kept = [
        (gram, ids)
        for gram, ids in candidates.items()
        if not subsumed(gram, len(ids))
    ]
    kept.sort(key=lambda e: (-len(e[1]), e[0]))
    out = []
    for gram, ids in kept[:top_n]:
        mean_idf = (
            sum(idf_of(t) for t in gram) / len(gram) if idf_of is not None else 1.0
        )
        display = (
            " ".join(display_of(t) for t in gram) if display_of is not None else " ".join(map(str, gram))
        )
        out.append(
            PhraseStats(
                tokens=gram,
                display=display,
                doc_freq=len(ids),
                score=len(ids) * mean_idf,
                post_ids=list(ids),
            )
        )
    return out


def temporal_bins(effective_dates: Sequence[int], window_start: int, window_end: int) -> list[float]:
    """Five recency proportions over the window span (oldest bin first).

    Dates outside the span clamp into the edge bins; proportions sum to 1
    for a non-empty date list.
    """
    if window_end <= window_start:
        raise ValueError("window range must be positive")
    counts = [0] * TEMPORAL_BINS
    span = window_end - window_start
    for d in effective_dates:
        b = (d - window_start) * TEMPORAL_BINS // span
        counts[min(max(int(b), 0), TEMPORAL_BINS - 1)] += 1
    total = len(effective_dates)
    if total == 0:
        return [0.0] * TEMPORAL_BINS
    return [c / total for c in counts]


def barcode_layout(
    docs: Sequence[PhraseDoc],
    phrases: Sequence[PhraseStats],
) -> BarcodeLayout:
    """Greedy slot assignment: walk phrases in frequency order, giving each
    phrase's not-yet-assigned posts the next consecutive slots (arrival
    order within a group); leftover posts take the trailing slots."""
    n = len(docs)
    slots: dict[str, int] = {}
    next_slot = 0
    for ph in phrases:
        members = set(ph.post_ids)
        for doc in docs:
            if doc.post_id in members and doc.post_id not in slots:
                slots[doc.post_id] = next_slot
                next_slot += 1
    for doc in docs:
        if doc.post_id not in slots:
            slots[doc.post_id] = next_slot
            next_slot += 1
    bin_counts = [0] * BARCODE_BINS
    for s in slots.values():
        bin_counts[s * BARCODE_BINS // n] += 1
    return BarcodeLayout(slots=slots, n=n, bin_counts=bin_counts)


def barcode_shades(layout: BarcodeLayout, post_ids: Sequence[str]) -> list[float]:
    """Per-bin fraction of that bin's posts carrying the phrase."""
    marked = [0] * BARCODE_BINS
    for pid in post_ids:
        marked[layout.bin_of(pid)] += 1
    return [
        (m / c if c else 0.0) for m, c in zip(marked, layout.bin_counts)
    ]


def phrase_intersection(
    selected: Sequence[Sequence[int]], docs: Sequence[PhraseDoc]
) -> set[str]:
    """Posts containing every selected phrase as a contiguous token run."""
    if not selected:
        raise ValueError("at least one phrase must be selected")
    out = set()
    for doc in docs:
        if all(contains_phrase(doc.token_ids, ph) for ph in selected):
            out.add(doc.post_id)
    return out


def mark_new_phrases(
    prev: Optional[Sequence[PhraseStats]], curr: Sequence[PhraseStats]
) -> None:
    """Flag phrases absent from the previous top list (in place)."""
    seen = {p.tokens for p in prev} if prev else set()
    for ph in curr:
        ph.is_new = ph.tokens not in seen


def phrase_view(
    docs: Sequence[PhraseDoc],
    window_start: int,
    window_end: int,
    top_n: int = 10,
    prev: Optional[Sequence[PhraseStats]] = None,
    idf_of: Optional[Callable[[int], float]] = None,
    display_of: Optional[Callable[[int], str]] = None,
) -> tuple[list[PhraseStats], BarcodeLayout]:
    """One complete refresh of the phrase view for a selection."""
    phrases = extract_phrases(docs, top_n=top_n, idf_of=idf_of, display_of=display_of)
    layout = barcode_layout(docs, phrases)
    date_of = {d.post_id: d.effective_ms for d in docs}
    for ph in phrases:
        ph.temporal = temporal_bins([date_of[p] for p in ph.post_ids], window_start, window_end)
        ph.barcode = barcode_shades(layout, ph.post_ids)
    mark_new_phrases(prev, phrases)
    return phrases, layout
