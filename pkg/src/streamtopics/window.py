"""Time-bounded sliding window over (post, vector) pairs with immutable snapshots."""

from __future__ import annotations

from dataclasses import dataclass
from threading import Lock
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .textprep import RawPost, SparseVector


class WindowItem(NamedTuple):
    post: RawPost
    vector: SparseVector
    token_ids: tuple[int, ...]
    arrival: int


@dataclass(frozen=True)
class WindowSnapshot:
    """Immutable view of the window contents at one instant.

    Indices into ``items`` are stable for the lifetime of the snapshot;
    ``start_ms``/``end_ms`` give the window time span for temporal binning.
    """

    generation: int
    items: tuple[WindowItem, ...]
    start_ms: int
    end_ms: int

    def __len__(self) -> int:
        return len(self.items)


class SlidingWindow:
    """Single-writer store of recent posts, bounded by time and optionally by count."""

    def __init__(self, duration_ms: int = 20 * 60 * 1000, max_count: Optional[int] = None):
        if duration_ms <= 0:
            raise ValueError("duration_ms must be positive")
        if max_count is not None and max_count < 1:
            raise ValueError("max_count must be >= 1 when set")
        self.duration_ms = duration_ms
        self.max_count = max_count
        self._items: list[WindowItem] = []
        self._arrival = 0
        self._generation = 0
        self._lock = Lock()

    def __len__(self) -> int:
        return len(self._items)

    def append(self, post: RawPost, vector: SparseVector, token_ids: Sequence[int] = ()) -> None:
        """Store one vectorized post; evicts the oldest arrivals past max_count."""
        with self._lock:
            self._items.append(WindowItem(post, vector, tuple(token_ids), self._arrival))
            self._arrival += 1
            if self.max_count is not None and len(self._items) > self.max_count:
                del self._items[: len(self._items) - self.max_count]

    def evict_expired(self, now_ms: int) -> int:
        """Remove exactly the items with published_at < now - duration. Returns the count."""
        cutoff = now_ms - self.duration_ms
        with self._lock:
            kept = [it for it in self._items if it.post.published_at >= cutoff]
            evicted = len(self._items) - len(kept)
            if evicted:
                self._items = kept
        return evicted

    def snapshot(self, now_ms: Optional[int] = None) -> WindowSnapshot:
        """Copy-on-read view; later appends/evictions leave it untouched."""
        with self._lock:
            items = tuple(self._items)
            self._generation += 1
            generation = self._generation
        if now_ms is not None:
            end = now_ms
            start = now_ms - self.duration_ms
        elif items:
            end = max(it.post.published_at for it in items)
            start = min(min(it.post.effective_date, it.post.published_at) for it in items)
        else:
            start = end = 0
        return WindowSnapshot(generation, items, start, end)


def snapshot_matrix(snapshot: WindowSnapshot, n_cols: int):
    """CSR matrix of the snapshot's vectors (rows follow snapshot indices)."""
    import scipy.sparse as sp

    n = len(snapshot.items)
    if n == 0:
        return sp.csr_matrix((0, max(n_cols, 1)), dtype=np.float64)
    counts = np.fromiter((len(it.vector) for it in snapshot.items), dtype=np.int64, count=n)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = np.concatenate([it.vector.ids for it in snapshot.items]) if n else np.array([], dtype=np.int32)
    data = np.concatenate([it.vector.weights for it in snapshot.items]) if n else np.array([], dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(n, n_cols))
