"""Dynamic spherical k-means++ with internal model selection.

The engine re-clusters the current window at several candidate cluster
counts, warm-starting from the previous run's centroids, and keeps the
candidate with the lowest Davies-Bouldin index. All vector math runs on
sparse CSR matrices; centroids are dense rows over the window vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .textprep import SparseVector, Vocabulary

Items = Union[sp.csr_matrix, Sequence[SparseVector]]

# distances this close to zero count as zero (duplicate detection in floats)
_ZERO_DIST = {np.dtype(np.float64): 1e-12, np.dtype(np.float32): 1e-6}


@dataclass
class ClusterParams:
    k_min: int = 2
    k_max: int = 10
    restarts: int = 2
    sample_cap: int = 100_000
    max_iters: int = 50
    rng_seed: int = 0
    metric: str = "cosine"  # or "euclidean"
    dtype: str = "float32"  # working precision of the optimization loop

    def __post_init__(self):
        if not 1 <= self.k_min <= self.k_max:
            raise ValueError("need 1 <= k_min <= k_max")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.sample_cap < 1:
            raise ValueError("sample_cap must be >= 1")
        if self.metric not in ("cosine", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")


@dataclass
class Clustering:
    """Result of one clustering run: k centroids plus the item assignment."""

    centroids: list[SparseVector]
    assignment: np.ndarray  # int32, item index -> cluster index
    sizes: np.ndarray
    chosen_k: int
    dbi: float = float("inf")
    objective_trace: list[float] = field(default_factory=list)


def as_matrix(items: Items, n_cols: Optional[int] = None) -> sp.csr_matrix:
    """Accept a CSR matrix as-is or stack SparseVectors into one.

    ``n_cols`` acts as a minimum width; the inferred width always covers
    the largest token id present.
    """
    if sp.issparse(items):
        x = items.tocsr()
        if n_cols is not None and x.shape[1] < n_cols:
            x = sp.csr_matrix((x.data, x.indices, x.indptr), shape=(x.shape[0], n_cols))
        return x
    vecs = list(items)
    width = max((int(v.ids[-1]) + 1 for v in vecs if len(v)), default=1)
    if n_cols is not None:
        width = max(width, n_cols)
    counts = np.fromiter((len(v) for v in vecs), dtype=np.int64, count=len(vecs))
    indptr = np.concatenate([[0], np.cumsum(counts)])
    if len(vecs):
        indices = np.concatenate([v.ids for v in vecs])
        data = np.concatenate([v.weights for v in vecs])
    else:
        indices = np.array([], dtype=np.int32)
        data = np.array([], dtype=np.float64)
    return sp.csr_matrix((data, indices, indptr), shape=(len(vecs), width))


def _align_width(x: sp.csr_matrix, cents: np.ndarray):
    """Widen whichever of (items, centroids) is narrower with zero columns."""
    if x.shape[1] < cents.shape[1]:
        x = sp.csr_matrix((x.data, x.indices, x.indptr), shape=(x.shape[0], cents.shape[1]))
    elif cents.shape[1] < x.shape[1]:
        wide = np.zeros((cents.shape[0], x.shape[1]), dtype=cents.dtype)
        wide[:, : cents.shape[1]] = cents
        cents = wide
    return x, cents


def densify_centroids(centroids: Sequence[SparseVector], n_cols: int, dtype=np.float64) -> np.ndarray:
    out = np.zeros((len(centroids), n_cols), dtype=dtype)
    for i, c in enumerate(centroids):
        out[i, c.ids] = c.weights
    return out


def sparsify_centroids(dense: np.ndarray) -> list[SparseVector]:
    out = []
    for row in np.asarray(dense, dtype=np.float64):
        ids = np.nonzero(row > 0)[0].astype(np.int32)
        out.append(SparseVector(ids, row[ids]))
    return out


def get_cluster_sizes(k_min: int, k_max: int, k_prev: Optional[int] = None) -> list[int]:
    """Candidate cluster counts: growing step sizes from the start value.

    First run starts at k_min, incremental runs at the previous k; the step
    grows by one after each element so the candidate count stays sublinear
    in k_max. k_max itself is always included.
    """
    start = min(k_prev if k_prev is not None else k_min, k_max)
    sizes = []
    k, step = start, 1
    while k <= k_max:
        sizes.append(k)
        k += step
        step += 1
    if sizes[-1] != k_max:
        sizes.append(k_max)
    return sizes


def sample(n_items: int, cap: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform sample of min(cap, n) item indices without replacement, sorted."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if n_items <= cap:
        return np.arange(n_items)
    idx = rng.choice(n_items, size=cap, replace=False)
    idx.sort()
    return idx


def _distance_weights(x: sp.csr_matrix, centroid_row: np.ndarray, metric: str) -> np.ndarray:
    """Per-item seeding weight against one centroid (cosine distance, or squared euclidean)."""
    dots = x @ centroid_row
    if metric == "cosine":
        d = 1.0 - dots
    else:
        sq = float(centroid_row @ centroid_row)
        row_sq = np.asarray(x.multiply(x).sum(axis=1)).ravel()
        d = np.maximum(row_sq - 2.0 * dots + sq, 0.0)
    return np.maximum(d, 0.0)


def _item_distance_weights(x_csc: sp.csc_matrix, item_row: sp.csr_matrix, metric: str, row_sq) -> np.ndarray:
    """Seeding weight of every item against one *item* vector.

    Exploits that the seed is itself sparse: only the columns it touches
    contribute to any dot product, so this is a cheap column gather
    instead of a dense matvec.
    """
    n = x_csc.shape[0]
    dots = np.zeros(n, dtype=np.float64)
    start_idx = item_row.indices
    for col, w in zip(start_idx, item_row.data):
        lo, hi = x_csc.indptr[col], x_csc.indptr[col + 1]
        dots[x_csc.indices[lo:hi]] += float(w) * x_csc.data[lo:hi]
    if metric == "cosine":
        d = 1.0 - dots
    else:
        sq = float(item_row.data @ item_row.data)
        d = np.maximum(row_sq - 2.0 * dots + sq, 0.0)
    return np.maximum(d, 0.0)


def _kpp_fill(
    x: sp.csr_matrix,
    chosen: list[int],
    min_dist: Optional[np.ndarray],
    k: int,
    rng: np.random.Generator,
    metric: str,
    x_csc: Optional[sp.csc_matrix] = None,
) -> np.ndarray:
    """k-means++ continuation: draw items proportionally to their distance
    from the nearest already-chosen centroid, stopping early once every
    item sits on a chosen point."""
    n = x.shape[0]
    zero_tol = _ZERO_DIST[x.dtype]
    if x_csc is None:
        x_csc = x.tocsc()
    row_sq = None
    if metric == "euclidean" and len(chosen) < k:
        row_sq = np.asarray(x.multiply(x).sum(axis=1)).ravel()
    if min_dist is None:
        first = int(rng.integers(n))
        chosen.append(first)
        min_dist = _item_distance_weights(x_csc, x[first], metric, row_sq)
    min_dist = min_dist.copy()
    min_dist[min_dist <= zero_tol] = 0.0
    while len(chosen) < k:
        total = float(min_dist.sum())
        if total <= 0.0:
            break
        cdf = np.cumsum(min_dist)
        nxt = int(np.searchsorted(cdf, rng.random() * total, side="right"))
        nxt = min(nxt, n - 1)
        chosen.append(nxt)
        d = _item_distance_weights(x_csc, x[nxt], metric, row_sq)
        d[d <= zero_tol] = 0.0
        np.minimum(min_dist, d, out=min_dist)
    return x[np.asarray(chosen, dtype=np.int64)].toarray()


def init_kpp(
    items: Items,
    k: int,
    rng: np.random.Generator,
    metric: str = "cosine",
    x_csc: Optional[sp.csc_matrix] = None,
) -> np.ndarray:
    """k-means++ seeding; may return fewer than k centroids when the chosen
    set already covers every item (duplicate-heavy data)."""
    x = as_matrix(items)
    if x.shape[0] == 0:
        raise ValueError("cannot initialize centroids on empty input")
    return _kpp_fill(x, [], None, k, rng, metric, x_csc)


def init_incremental(
    items: Items,
    prev_centroids: np.ndarray,
    k: int,
    rng: np.random.Generator,
    metric: str = "cosine",
    x_csc: Optional[sp.csc_matrix] = None,
) -> np.ndarray:
    """Warm start: previous centroids that still attract items come first,
    in their original order; remaining slots are filled k-means++ style."""
    x = as_matrix(items)
    if prev_centroids.shape[0] == 0:
        raise ValueError("prev_centroids must be non-empty")
    x, prev_centroids = _align_width(x, prev_centroids)
    prev = np.ascontiguousarray(prev_centroids, dtype=x.dtype)
    labels, _ = assign(x, prev, metric)
    counts = np.bincount(labels, minlength=prev.shape[0])
    kept = prev[counts > 0][:k]
    if kept.shape[0] >= k:
        return kept
    zero_tol = _ZERO_DIST[x.dtype]
    min_dist = None
    for row in kept:
        d = _distance_weights(x, row, metric)
        min_dist = d if min_dist is None else np.minimum(min_dist, d)
    min_dist[min_dist <= zero_tol] = 0.0
    chosen: list[int] = []
    extra = _kpp_fill(x, chosen, min_dist, k - kept.shape[0], rng, metric, x_csc)
    return np.vstack([kept, extra]) if len(chosen) else kept


def assign(items: Items, centroids: np.ndarray, metric: str = "cosine"):
    """Nearest-centroid labels (ties toward the lowest index) plus best scores."""
    x = as_matrix(items)
    x, centroids = _align_width(x, centroids)
    centroids = np.ascontiguousarray(centroids, dtype=x.dtype)
    if metric == "euclidean":
        adjust = 0.5 * np.einsum("ij,ij->i", centroids, centroids)
    else:
        adjust = None
    return _kernels.assign_argmax(x, centroids, adjust)


def update_centroids(items: Items, labels: np.ndarray, k: int, metric: str = "cosine"):
    """Recompute centroids from an assignment.

    Cosine: normalized vector sums. Euclidean: arithmetic means. Empty
    clusters are removed and the assignment compacted.

    Returns (centroids, dropped cluster ids, compacted labels).
    """
    x = as_matrix(items)
    sums = _kernels.cluster_sums(x, labels, k)
    counts = np.bincount(labels, minlength=k)
    keep = counts > 0
    dropped = np.nonzero(~keep)[0].tolist()
    sums = sums[keep]
    if metric == "cosine":
        norms = np.sqrt(np.einsum("ij,ij->i", sums, sums))
        norms[norms == 0] = 1.0
        cents = sums / norms[:, None]
    else:
        cents = sums / counts[keep][:, None]
    if dropped:
        remap = np.cumsum(keep) - 1
        labels = remap[labels].astype(np.int32)
    return cents.astype(x.dtype), dropped, labels


def _compact_empty(labels: np.ndarray, centroids: np.ndarray):
    """Drop centroids that attracted nothing; relabel without reassigning
    (removing an unchosen centroid cannot change any argmax)."""
    counts = np.bincount(labels, minlength=centroids.shape[0])
    keep = counts > 0
    if keep.all():
        return labels, centroids
    remap = np.cumsum(keep) - 1
    return remap[labels].astype(np.int32), centroids[keep]


def kmeans(items: Items, init_centroids: np.ndarray, params: ClusterParams) -> Clustering:
    """Alternate assignment and centroid updates until the assignment is a
    fixed point (or max_iters). Returned clustering has no empty clusters."""
    x = as_matrix(items)
    if init_centroids.shape[0] == 0:
        raise ValueError("init_centroids must be non-empty")
    x, init_centroids = _align_width(x, init_centroids)
    cents = np.ascontiguousarray(init_centroids, dtype=x.dtype)
    big = x.shape[0] * cents.shape[0] > 200_000
    if params.metric == "cosine" and big and _kernels.HAVE_NUMBA:
        return _kmeans_bounded(x, cents, params)
    return _kmeans_plain(x, cents, params)


def _kmeans_plain(x: sp.csr_matrix, cents: np.ndarray, params: ClusterParams) -> Clustering:
    labels, scores = assign(x, cents, params.metric)
    labels, cents = _compact_empty(labels, cents)
    trace = [float(scores.mean())] if params.metric == "cosine" else []
    for _ in range(params.max_iters):
        k_before = cents.shape[0]
        cents, _, labels = update_centroids(x, labels, k_before, params.metric)
        new_labels, scores = assign(x, cents, params.metric)
        new_labels, cents = _compact_empty(new_labels, cents)
        if params.metric == "cosine":
            trace.append(float(scores.mean()))
            if __debug__ and len(trace) >= 2:
                assert trace[-1] >= trace[-2] - 1e-4, "spherical objective decreased"
        converged = cents.shape[0] == k_before and np.array_equal(new_labels, labels)
        labels = new_labels
        if converged:
            break
    sizes = np.bincount(labels, minlength=cents.shape[0])
    return Clustering(
        centroids=sparsify_centroids(cents),
        assignment=labels,
        sizes=sizes,
        chosen_k=cents.shape[0],
        objective_trace=trace,
    )


def _kmeans_bounded(x: sp.csr_matrix, cents: np.ndarray, params: ClusterParams) -> Clustering:
    """Movement-bound optimization loop for large cosine instances.

    Reaches the same assignment fixed point as the plain loop: items whose
    similarity bounds prove their winner unchanged skip the full scan, and
    per-cluster sums are patched from changed items only. The bound slack
    exceeds the float round-off of a fresh scan, so the converged labels
    equal ``assign(items, centroids)`` exactly.
    """
    eps = 1e-5 if x.dtype == np.float32 else 1e-12
    ba = _kernels.BoundedAssign(x, eps)
    k = cents.shape[0]
    ct = np.ascontiguousarray(cents.T)  # (n_cols, k) working layout
    ba.step(ct, np.full(k, np.inf))
    counts = np.bincount(ba.labels, minlength=k)
    keep = counts > 0
    if not keep.all():
        ba.compact(keep)
        ct = np.ascontiguousarray(ct[:, keep])
        counts = counts[keep]
        k = int(keep.sum())
    sums = ba.build_sums(k)
    dirty = np.ones(k, dtype=bool)
    converged = False
    for _ in range(params.max_iters):
        move = ba.refresh_centroids(sums, dirty, ct)
        changed = ba.step(ct, move)
        if changed.size == 0:
            converged = True
            break
        old = ba.old_labels_of(changed).copy()
        ba.apply_deltas(changed, sums, counts)
        dirty = np.zeros(k, dtype=bool)
        dirty[ba.labels[changed]] = True
        dirty[old] = True
        if (counts == 0).any():
            keep = counts > 0
            sums = np.ascontiguousarray(sums[keep])
            counts = counts[keep]
            ct = np.ascontiguousarray(ct[:, keep])
            dirty = dirty[keep]
            ba.compact(keep)
            k = int(keep.sum())
    if converged:
        labels = ba.labels
        final_cents = np.ascontiguousarray(ct.T)
    else:
        # centroids may be stale relative to the last deltas; refresh and
        # settle the assignment with one exact scan
        ba.refresh_centroids(sums, dirty, ct)
        final_cents = np.ascontiguousarray(ct.T)
        labels, _ = assign(x, final_cents, params.metric)
        labels, final_cents = _compact_empty(labels, final_cents)
    return Clustering(
        centroids=sparsify_centroids(final_cents),
        assignment=labels,
        sizes=np.bincount(labels, minlength=final_cents.shape[0]),
        chosen_k=final_cents.shape[0],
        objective_trace=[],
    )


def _pairwise_metric(cents: np.ndarray, metric: str) -> np.ndarray:
    if metric == "cosine":
        m = 1.0 - cents @ cents.T
    else:
        sq = np.einsum("ij,ij->i", cents, cents)
        m = np.sqrt(np.maximum(sq[:, None] - 2.0 * (cents @ cents.T) + sq[None, :], 0.0))
    return np.maximum(m, 0.0)


def _dbi_from_parts(scatter: np.ndarray, m: np.ndarray) -> float:
    k = len(scatter)
    if k < 2:
        return float("inf")
    r = scatter[:, None] + scatter[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(m > 1e-12, r / m, np.inf)
    np.fill_diagonal(r, -np.inf)
    return float(np.max(r, axis=1).mean())


def _dbi_dense(x64: sp.csr_matrix, labels: np.ndarray, cents64: np.ndarray, metric: str) -> float:
    k = cents64.shape[0]
    if k < 2:
        return float("inf")
    dots = _kernels.own_dots(x64, cents64, labels)
    if metric == "cosine":
        dist = 1.0 - dots
    else:
        row_sq = np.asarray(x64.multiply(x64).sum(axis=1)).ravel()
        cent_sq = np.einsum("ij,ij->i", cents64, cents64)
        dist = np.sqrt(np.maximum(row_sq - 2.0 * dots + cent_sq[labels], 0.0))
    counts = np.bincount(labels, minlength=k)
    scatter = np.bincount(labels, weights=dist, minlength=k) / np.maximum(counts, 1)
    return _dbi_from_parts(scatter, _pairwise_metric(cents64, metric))


def davies_bouldin(items: Items, clustering: Clustering, metric: str = "cosine") -> float:
    """Davies-Bouldin index in float64; +inf below two clusters or for
    coincident centroids."""
    x = as_matrix(items)
    x64 = x.astype(np.float64)
    cents = densify_centroids(clustering.centroids, x.shape[1], np.float64)
    return _dbi_dense(x64, clustering.assignment, cents, metric)


def dynamic_cluster(items: Items, prev: Optional[Clustering], params: ClusterParams) -> Clustering:
    """Full model-selection run: try every candidate k (warm-started from
    the previous clustering on the first restart), score each candidate on
    the complete item set, and keep the lowest-DBI result."""
    x = as_matrix(items)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot cluster an empty item set")
    if prev is not None and prev.centroids:
        prev_width = max((int(c.ids[-1]) + 1 for c in prev.centroids if len(c)), default=1)
        x = as_matrix(x, n_cols=prev_width)
    rng = np.random.default_rng(params.rng_seed)
    work_dtype = np.dtype(params.dtype)
    xw = x.astype(work_dtype)
    x64 = x if x.dtype == np.float64 else x.astype(np.float64)

    idx = sample(n, params.sample_cap, rng)
    xs = xw if len(idx) == n else xw[idx]
    xs_csc = xs.tocsc()

    prev_cents = None
    if prev is not None and prev.centroids:
        prev_cents = densify_centroids(prev.centroids, x.shape[1], work_dtype)

    sizes = get_cluster_sizes(params.k_min, params.k_max, prev.chosen_k if prev else None)
    best: Optional[Clustering] = None
    for k in sizes:
        for r in range(params.restarts):
            if prev_cents is not None and r == 0:
                init = init_incremental(xs, prev_cents, k, rng, params.metric, xs_csc)
            else:
                init = init_kpp(xs, k, rng, params.metric, xs_csc)
            cand = kmeans(xs, init, params)
            cents64 = densify_centroids(cand.centroids, x.shape[1], np.float64)
            if len(idx) != n:
                full_labels, _ = assign(xw, cents64.astype(work_dtype), params.metric)
                full_labels, kept64 = _compact_empty(full_labels, cents64)
                cents64 = kept64
            else:
                full_labels = cand.assignment
            dbi = _dbi_dense(x64, full_labels, cents64, params.metric)
            if best is None or dbi < best.dbi:
                best = Clustering(
                    centroids=sparsify_centroids(cents64),
                    assignment=full_labels,
                    sizes=np.bincount(full_labels, minlength=cents64.shape[0]),
                    chosen_k=cents64.shape[0],
                    dbi=dbi,
                    objective_trace=cand.objective_trace,
                )
    assert best is not None
    return best


def match_clusters(
    prev_labels_by_id: Mapping[str, int],
    curr_labels_by_id: Mapping[str, int],
) -> dict[int, int]:
    """Match previous clusters to current ones by surviving-item majority.

    Previous cluster i maps to current cluster j iff strictly more than
    half of i's surviving items landed in j and no other previous cluster
    sent a strictly larger surviving group into j (equal largest groups
    break toward the lowest previous id). The result is injective.
    """
    flows: dict[int, dict[int, int]] = {}
    for post_id, i in prev_labels_by_id.items():
        j = curr_labels_by_id.get(post_id)
        if j is None:
            continue
        row = flows.setdefault(i, {})
        row[j] = row.get(j, 0) + 1
    incoming: dict[int, dict[int, int]] = {}
    for i, row in flows.items():
        for j, c in row.items():
            incoming.setdefault(j, {})[i] = c
    match: dict[int, int] = {}
    for j, senders in sorted(incoming.items()):
        largest = max(senders.values())
        qualified = [
            i
            for i, c in senders.items()
            if c == largest and c * 2 > sum(flows[i].values())
        ]
        if qualified:
            match[min(qualified)] = j
    return match


def top_terms(centroid: SparseVector, vocab: Vocabulary, n: int) -> list[str]:
    """The n heaviest centroid terms, descending; ties toward lower token id."""
    if n < 1:
        raise ValueError("n must be >= 1")
    order = np.lexsort((centroid.ids, -centroid.weights))[:n]
    return [vocab.token_of(int(centroid.ids[i])) for i in order]
