"""Hot-path kernels for sparse assignment and centroid accumulation.

Numba-compiled when available, with numpy/scipy fallbacks. Two ideas keep
the optimization loop fast at window scale:

- the assign kernel fuses dot products with the argmax and never
  materializes the full n-by-k score matrix;
- the iterated step kernel maintains Hamerly-style similarity bounds so
  items provably keeping their winner skip the k dot products entirely,
  and centroid sums are patched from changed items instead of rebuilt.

Bound bookkeeping runs in float64 with a small slack term, so skipping is
conservative and the converged assignment equals a fresh exact assign.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # type: ignore
        def wrap(f):
            return f

        return wrap

    prange = range  # type: ignore


def _assign_numpy(indptr, indices, data, ct, adjust, labels_out, scores_out):
    import scipy.sparse as sp

    n = indptr.shape[0] - 1
    x = sp.csr_matrix((data, indices, indptr), shape=(n, ct.shape[0]))
    scores = np.asarray(x @ ct)
    scores -= adjust[None, :]
    labels_out[:] = scores.argmax(axis=1)
    scores_out[:] = scores[np.arange(n), labels_out]


def _accumulate_numpy(indptr, indices, data, labels, k, n_cols):
    per_nnz = np.repeat(labels, np.diff(indptr)).astype(np.int64)
    key = per_nnz * n_cols + indices
    return np.bincount(key, weights=data, minlength=k * n_cols).reshape(k, n_cols)


def _own_dots_numpy(indptr, indices, data, centroids, labels, out):
    if len(data) == 0:
        return
    per_nnz = np.repeat(labels, np.diff(indptr))
    prod = data * centroids[per_nnz, indices]
    starts = np.minimum(indptr[:-1], len(prod) - 1)
    np.add.reduceat(prod, starts, out=out)
    out[np.diff(indptr) == 0] = 0.0


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _assign_numba(indptr, indices, data, ct, adjust, labels_out, scores_out):
        n = indptr.shape[0] - 1
        k = ct.shape[1]
        n_chunks = (n + 1023) // 1024
        for ch in prange(n_chunks):
            acc = np.empty(k, dtype=ct.dtype)
            start = ch * 1024
            end = min(start + 1024, n)
            for i in range(start, end):
                for c in range(k):
                    acc[c] = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    w = data[p]
                    row = ct[indices[p]]
                    for c in range(k):
                        acc[c] += w * row[c]
                best = acc[0] - adjust[0]
                bi = 0
                for c in range(1, k):
                    v = acc[c] - adjust[c]
                    if v > best:
                        best = v
                        bi = c
                labels_out[i] = bi
                scores_out[i] = best

    @njit(cache=True)
    def _accumulate_numba(indptr, indices, data, labels, k, n_cols):
        sums = np.zeros((k, n_cols), dtype=np.float64)
        n = indptr.shape[0] - 1
        for i in range(n):
            c = labels[i]
            for p in range(indptr[i], indptr[i + 1]):
                sums[c, indices[p]] += data[p]
        return sums

    @njit(parallel=True, cache=True)
    def _own_dots_numba(indptr, indices, data, centroids, labels, out):
        n = indptr.shape[0] - 1
        for i in prange(n):
            c = labels[i]
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                s += data[p] * centroids[c, indices[p]]
            out[i] = s

    @njit(parallel=True, cache=True)
    def _bounded_step_numba(indptr, indices, data, ct, move, labels, ub, sb, changed, old_lab, eps):
        n = indptr.shape[0] - 1
        k = ct.shape[1]
        # largest and second-largest centroid movement
        m1 = -1.0
        m1i = -1
        m2 = -1.0
        for c in range(k):
            if move[c] > m1:
                m2 = m1
                m1 = move[c]
                m1i = c
            elif move[c] > m2:
                m2 = move[c]
        n_chunks = (n + 1023) // 1024
        for ch in prange(n_chunks):
            acc = np.empty(k, dtype=ct.dtype)
            start = ch * 1024
            end = min(start + 1024, n)
            for i in range(start, end):
                a = labels[i]
                other = m2 if a == m1i else m1
                if ub[i] - move[a] > sb[i] + other + eps:
                    ub[i] -= move[a]
                    sb[i] += other
                    continue
                for c in range(k):
                    acc[c] = 0.0
                for p in range(indptr[i], indptr[i + 1]):
                    w = data[p]
                    row = ct[indices[p]]
                    for c in range(k):
                        acc[c] += w * row[c]
                best = acc[0]
                bi = 0
                second = -np.inf
                for c in range(1, k):
                    v = acc[c]
                    if v > best:
                        second = best
                        best = v
                        bi = c
                    elif v > second:
                        second = v
                ub[i] = best
                sb[i] = second
                if bi != a:
                    old_lab[i] = a
                    labels[i] = bi
                    changed[i] = True

    @njit(cache=True)
    def _delta_sums_numba(indptr, indices, data, changed_idx, old_lab, labels, sums, counts):
        for t in range(changed_idx.shape[0]):
            i = changed_idx[t]
            a = old_lab[i]
            b = labels[i]
            for p in range(indptr[i], indptr[i + 1]):
                v = data[p]
                j = indices[p]
                sums[a, j] -= v
                sums[b, j] += v
            counts[a] -= 1
            counts[b] += 1

    @njit(cache=True)
    def _accumulate_into_numba(indptr, indices, data, labels, sums):
        n = indptr.shape[0] - 1
        for i in range(n):
            c = labels[i]
            for p in range(indptr[i], indptr[i + 1]):
                sums[c, indices[p]] += data[p]

    @njit(parallel=True, cache=True)
    def _refresh_centroids_numba(sums, dirty, ct, move):
        # sums: (k, n_cols) row-major; ct: (n_cols, k) transposed centroid layout
        k = sums.shape[0]
        n_cols = sums.shape[1]
        for c in prange(k):
            if not dirty[c]:
                move[c] = 0.0
                continue
            sq = 0.0
            for t in range(n_cols):
                v = sums[c, t]
                sq += v * v
            inv = 1.0 / np.sqrt(sq) if sq > 0.0 else 1.0
            m = 0.0
            for t in range(n_cols):
                nv = sums[c, t] * inv
                d = nv - ct[t, c]
                m += d * d
                ct[t, c] = nv
            move[c] = np.sqrt(m)


def assign_argmax(x, centroids, adjust=None, use_numba=None):
    """Label each CSR row with its best-scoring centroid.

    Score is ``dot(x, c) - adjust[c]``; ties break toward the lowest
    centroid index. Returns (labels int32, best scores).
    """
    n, k = x.shape[0], centroids.shape[0]
    dtype = centroids.dtype
    if adjust is None:
        adjust = np.zeros(k, dtype=dtype)
    labels = np.empty(n, dtype=np.int32)
    scores = np.empty(n, dtype=dtype)
    if n == 0:
        return labels, scores
    ct = np.ascontiguousarray(centroids.T)
    if use_numba is None:
        use_numba = HAVE_NUMBA and n * k > 200_000
    if use_numba and HAVE_NUMBA:
        _assign_numba(x.indptr, x.indices, x.data, ct, adjust.astype(dtype), labels, scores)
    else:
        _assign_numpy(x.indptr, x.indices, x.data, ct, adjust.astype(dtype), labels, scores)
    return labels, scores


def cluster_sums(x, labels, k, use_numba=None):
    """Sum the CSR rows of each cluster into a dense (k, n_cols) float64 array."""
    if x.shape[0] == 0:
        return np.zeros((k, x.shape[1]), dtype=np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA and x.nnz > 200_000
    if use_numba and HAVE_NUMBA:
        return _accumulate_numba(x.indptr, x.indices, x.data.astype(np.float64), labels, k, x.shape[1])
    return _accumulate_numpy(x.indptr, x.indices, x.data.astype(np.float64), labels, k, x.shape[1])


def own_dots(x, centroids, labels, use_numba=None):
    """Dot of each CSR row with its assigned centroid (float64)."""
    out = np.zeros(x.shape[0], dtype=np.float64)
    if x.shape[0] == 0:
        return out
    cents = np.ascontiguousarray(centroids, dtype=np.float64)
    data = x.data.astype(np.float64)
    if use_numba is None:
        use_numba = HAVE_NUMBA and x.nnz > 200_000
    if use_numba and HAVE_NUMBA:
        _own_dots_numba(x.indptr, x.indices, data, cents, labels, out)
    else:
        _own_dots_numpy(x.indptr, x.indices, data, cents, labels, out)
    return out


class BoundedAssign:
    """Iterated nearest-centroid assignment with movement bounds.

    Tracks, per item, a lower bound on the similarity to its assigned
    centroid and an upper bound on the best similarity to any other; both
    decay by centroid movement each step. Items whose bounds still
    separate skip the full scan, so late iterations only touch boundary
    items. Cosine metric only (items and centroids unit-length).
    """

    def __init__(self, x, eps: float):
        self.x = x
        self.eps = eps
        n = x.shape[0]
        self.labels = np.zeros(n, dtype=np.int32)
        self.ub = np.full(n, -np.inf)
        self.sb = np.full(n, -np.inf)
        self._changed = np.zeros(n, dtype=bool)
        self._old_lab = np.zeros(n, dtype=np.int32)

    def step(self, ct: np.ndarray, move: np.ndarray) -> np.ndarray:
        """Advance one assignment round against transposed centroids ``ct``.

        ``move`` gives each centroid's displacement since the bounds were
        last valid (+inf forces a full recompute). Returns the indices of
        items whose label changed; their previous labels are readable via
        ``old_labels_of``.
        """
        self._changed[:] = False
        _bounded_step_numba(
            self.x.indptr,
            self.x.indices,
            self.x.data,
            ct,
            move.astype(np.float64),
            self.labels,
            self.ub,
            self.sb,
            self._changed,
            self._old_lab,
            self.eps,
        )
        return np.nonzero(self._changed)[0]

    def old_labels_of(self, changed_idx: np.ndarray) -> np.ndarray:
        return self._old_lab[changed_idx]

    def apply_deltas(self, changed_idx, sums, counts) -> None:
        """Patch per-cluster sums/counts for the changed items."""
        _delta_sums_numba(
            self.x.indptr,
            self.x.indices,
            self.x.data,
            changed_idx.astype(np.int64),
            self._old_lab,
            self.labels,
            sums,
            counts,
        )

    def build_sums(self, k: int) -> np.ndarray:
        """Full per-cluster sums in the matrix dtype."""
        sums = np.zeros((k, self.x.shape[1]), dtype=self.x.dtype)
        _accumulate_into_numba(self.x.indptr, self.x.indices, self.x.data, self.labels, sums)
        return sums

    def refresh_centroids(self, sums, dirty, ct) -> np.ndarray:
        """Renormalize dirty centroid columns in-place; returns movements."""
        move = np.zeros(sums.shape[0])
        _refresh_centroids_numba(sums, dirty, ct, move)
        return move

    def compact(self, keep: np.ndarray) -> None:
        """Renumber labels after empty clusters were dropped.

        Old-label scratch is not remapped: it is only read within the same
        step, before any compaction.
        """
        remap = np.cumsum(keep) - 1
        self.labels = remap[self.labels].astype(np.int32)
