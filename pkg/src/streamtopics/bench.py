"""Clustering quality benchmarks on a labeled corpus.

Two scenarios: batch quality of spherical vs euclidean k-means++ at a
fixed k, and sliding-window dynamic clustering versus independent distinct
bins, scored by NMI against class labels and by centroid coherence across
runs.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from email.utils import parsedate_to_datetime
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .cluster import ClusterParams, Clustering, dynamic_cluster, init_kpp, kmeans
from .textprep import clean_text, load_stopwords, tokenize


@dataclass
class LabeledCorpus:
    texts: list[str]
    labels: list[str]
    order_keys: list[float]
    skipped: int = 0

    @property
    def n_classes(self) -> int:
        return len(set(self.labels))

    def __len__(self) -> int:
        return len(self.texts)

    def sorted_by_date(self) -> "LabeledCorpus":
        order = sorted(range(len(self.texts)), key=lambda i: self.order_keys[i])
        return LabeledCorpus(
            [self.texts[i] for i in order],
            [self.labels[i] for i in order],
            [self.order_keys[i] for i in order],
            self.skipped,
        )


def load_corpus(path, fmt: str = "newsgroups-dir") -> LabeledCorpus:
    """Load a labeled corpus.

    newsgroups-dir: one folder per class, one message file per document;
    text is the Subject line plus the body, ordering key is the Date
    header (documents with unparsable dates sort last, stably).
    jsonl: objects with ``text``, ``label``, ``date`` fields.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(path)
    texts, labels, keys = [], [], []
    skipped = 0
    if fmt == "newsgroups-dir":
        groups = sorted(d for d in p.iterdir() if d.is_dir())
        if not groups:
            raise ValueError(f"no class folders under {path}")
        for group in groups:
            for doc in sorted(group.iterdir()):
                if not doc.is_file():
                    continue
                try:
                    raw = doc.read_bytes().decode("latin-1")
                    subject, date_key, body = _parse_message(raw)
                except Exception:
                    skipped += 1
                    continue
                texts.append(subject + "\n" + body)
                labels.append(group.name)
                keys.append(date_key)
    elif fmt == "jsonl":
        with open(p, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                    texts.append(rec["text"])
                    labels.append(str(rec["label"]))
                    keys.append(_date_key(rec.get("date")))
                except (json.JSONDecodeError, KeyError):
                    skipped += 1
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")
    if not texts:
        raise ValueError(f"corpus at {path} is empty")
    return LabeledCorpus(texts, labels, keys, skipped)


def _parse_message(raw: str) -> tuple[str, float, str]:
    head, sep, body = raw.partition("\n\n")
    if not sep:
        head, body = "", raw
    subject = ""
    date_key = math.inf
    for line in head.splitlines():
        low = line.lower()
        if low.startswith("subject:"):
            subject = line[8:].strip()
        elif low.startswith("date:"):
            date_key = _date_key(line[5:].strip())
    return subject, date_key, body


def _date_key(value) -> float:
    if value is None:
        return math.inf
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return parsedate_to_datetime(value).timestamp()
    except Exception:
        pass
    try:
        from datetime import datetime

        return datetime.fromisoformat(value).timestamp()
    except Exception:
        return math.inf


def vectorize_corpus(corpus: LabeledCorpus, stopwords=None):
    """TF-IDF matrix over the complete corpus (idf from the full set,
    vocabulary untruncated beyond stopwords). Documents reduced to nothing
    by stopword removal are dropped.

    Returns (csr matrix, kept labels, kept indices).
    """
    if stopwords is None:
        stopwords = load_stopwords()
    token_lists = [tokenize(clean_text(t), stopwords) for t in corpus.texts]
    df: dict[str, int] = {}
    for toks in token_lists:
        for t in set(toks):
            df[t] = df.get(t, 0) + 1
    n_ref = len(token_lists)
    vocab_ids: dict[str, int] = {}
    idf_list: list[float] = []
    log_num = math.log(1 + n_ref)
    rows, cols, vals = [], [], []
    kept_labels, kept_idx = [], []
    r = 0
    for i, toks in enumerate(token_lists):
        if not toks:
            continue
        counts: dict[int, float] = {}
        for t in toks:
            tid = vocab_ids.get(t)
            if tid is None:
                tid = len(vocab_ids)
                vocab_ids[t] = tid
                idf_list.append(log_num - math.log(1 + df[t]) + 1.0)
            counts[tid] = counts.get(tid, 0.0) + idf_list[tid]
        ids = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
        ws = np.fromiter(counts.values(), dtype=np.float64, count=len(counts))
        ws /= math.sqrt(float(ws @ ws))
        rows.append(np.full(len(ids), r))
        cols.append(ids)
        vals.append(ws)
        kept_labels.append(corpus.labels[i])
        kept_idx.append(i)
        r += 1
    x = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(r, len(vocab_ids)),
    )
    return x, kept_labels, kept_idx


def _as_int_labels(labels: Sequence) -> np.ndarray:
    mapping: dict = {}
    out = np.empty(len(labels), dtype=np.int64)
    for i, lab in enumerate(labels):
        out[i] = mapping.setdefault(lab, len(mapping))
    return out


def nmi(labels_a: Sequence, labels_b: Sequence) -> float:
    """Normalized mutual information with arithmetic-mean normalization.

    Identical partitions score exactly 1.0; a zero-entropy labeling paired
    with a non-constant one scores 0.0.
    """
    if len(labels_a) == 0 or len(labels_a) != len(labels_b):
        raise ValueError("label sequences must be non-empty and equal-length")
    a = _as_int_labels(labels_a)
    b = _as_int_labels(labels_b)
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    n = len(a)
    cont = np.zeros((ka, kb), dtype=np.int64)
    np.add.at(cont, (a, b), 1)
    if np.count_nonzero(cont.sum(axis=1) > 0) == np.count_nonzero(cont) == np.count_nonzero(
        cont.sum(axis=0) > 0
    ):
        return 1.0  # one nonzero per row and column: identical partitions
    pa = cont.sum(axis=1) / n
    pb = cont.sum(axis=0) / n
    # fsum makes every sum correctly rounded, so nmi(a, b) == nmi(b, a) exactly
    ha = -math.fsum(p * math.log(p) for p in pa if p > 0)
    hb = -math.fsum(p * math.log(p) for p in pb if p > 0)
    denom = (ha + hb) / 2
    if denom == 0:
        return 1.0
    nz = np.nonzero(cont)
    mi = math.fsum(
        (cont[i, j] / n) * math.log((cont[i, j] / n) / (pa[i] * pb[j]))
        for i, j in zip(*nz)
    )
    return min(max(mi / denom, 0.0), 1.0)


def _centroid_matrix(c: Clustering | np.ndarray, width: Optional[int] = None) -> np.ndarray:
    if isinstance(c, Clustering):
        from .cluster import densify_centroids

        w = width or (max(int(v.ids[-1]) + 1 for v in c.centroids if len(v)))
        return densify_centroids(c.centroids, w)
    return np.asarray(c, dtype=np.float64)


def coherence(c1, c2) -> float:
    """Average best-match centroid similarity, both directions."""
    width = None
    if isinstance(c1, Clustering) and isinstance(c2, Clustering):
        width = max(
            max(int(v.ids[-1]) + 1 for v in c.centroids if len(v)) for c in (c1, c2)
        )
    m1 = _centroid_matrix(c1, width)
    m2 = _centroid_matrix(c2, width)
    w = max(m1.shape[1], m2.shape[1])
    if m1.shape[1] < w:
        m1 = np.pad(m1, ((0, 0), (0, w - m1.shape[1])))
    if m2.shape[1] < w:
        m2 = np.pad(m2, ((0, 0), (0, w - m2.shape[1])))
    sims = m1 @ m2.T
    return float((sims.max(axis=1).sum() + sims.max(axis=0).sum()) / (m1.shape[0] + m2.shape[0]))


@dataclass
class RunRecord:
    seed: int
    nmi: float
    coherence: Optional[float]
    duration: float


@dataclass
class ConfigReport:
    name: str
    records: list[RunRecord] = field(default_factory=list)

    def _median_iqr(self, values):
        med = float(np.median(values))
        lo, hi = np.percentile(values, [25, 75])
        return med, float(lo), float(hi)

    def summary(self) -> dict:
        out = {"name": self.name, "runs": len(self.records)}
        for metric in ("nmi", "coherence", "duration"):
            values = [getattr(r, metric) for r in self.records if getattr(r, metric) is not None]
            if values:
                med, lo, hi = self._median_iqr(values)
                out[metric] = {"median": med, "iqr": [lo, hi]}
        return out


@dataclass
class BenchReport:
    configs: list[ConfigReport] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps([c.summary() for c in self.configs], indent=2)

    def format_table(self) -> str:
        rows = [f"{'configuration':40s} {'NMI':>18s} {'Coherence':>18s} {'Duration':>20s}"]
        for c in self.configs:
            s = c.summary()

            def cell(metric, unit=""):
                if metric not in s:
                    return "-"
                m = s[metric]
                return f"{m['median']:.2f}{unit} [{m['iqr'][0]:.2f}-{m['iqr'][1]:.2f}]"

            rows.append(
                f"{c.name:40s} {cell('nmi'):>18s} {cell('coherence'):>18s} "
                f"{cell('duration', 's'):>20s}"
            )
        return "\n".join(rows)

    def write_run_log(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for c in self.configs:
                for r in c.records:
                    f.write(
                        json.dumps(
                            {
                                "config": c.name,
                                "seed": r.seed,
                                "nmi": r.nmi,
                                "coherence": r.coherence,
                                "duration": r.duration,
                            }
                        )
                        + "\n"
                    )


def run_batch_bench(
    corpus: LabeledCorpus,
    k: int = 20,
    runs: int = 5,
    seed0: int = 0,
    stopwords=None,
    max_iters: int = 100,
) -> BenchReport:
    """Spherical vs euclidean k-means++ on the full corpus, single init per
    invocation, NMI against class labels."""
    x, labels, _ = vectorize_corpus(corpus, stopwords)
    report = BenchReport()
    for metric in ("cosine", "euclidean"):
        name = "spherical k-means++" if metric == "cosine" else "k-means++"
        cfg = ConfigReport(name=name)
        params = ClusterParams(k_min=k, k_max=k, metric=metric, max_iters=max_iters)
        xw = x.astype(np.float32)
        for r in range(runs):
            seed = seed0 + r
            rng = np.random.default_rng(seed)
            t0 = time.perf_counter()
            init = init_kpp(xw, k, rng, metric)
            res = kmeans(xw, init, params)
            duration = time.perf_counter() - t0
            cfg.records.append(RunRecord(seed, nmi(res.assignment.tolist(), labels), None, duration))
        report.configs.append(cfg)
    return report


def _window_starts(n: int, size: int, stride: int) -> list[int]:
    starts = list(range(0, n - size + 1, stride))
    if starts[-1] != n - size:
        starts.append(n - size)
    return starts


def run_stream_bench(
    corpus: LabeledCorpus,
    overlap: int = 75,
    k_max: int = 10,
    runs: int = 5,
    seed0: int = 0,
    stopwords=None,
    include_baseline: bool = True,
) -> BenchReport:
    """Sliding-window dynamic clustering against the distinct-bin baseline.

    The date-ordered corpus is cut into 10 batches; the dynamic runs slide
    a one-batch window by 25% or 50% strides. Coherence for the dynamic
    configurations is measured between runs one full window apart, so the
    compared windows are as distinct as the baseline bins.
    """
    if overlap not in (75, 50):
        raise ValueError("overlap must be 75 or 50")
    ordered = corpus.sorted_by_date()
    x, labels, _ = vectorize_corpus(ordered, stopwords)
    n = x.shape[0]
    batch = n // 10
    labels_arr = np.asarray(labels)
    xw = x.astype(np.float32)
    report = BenchReport()

    if include_baseline:
        cfg = ConfigReport(name="baseline sKMeans++, distinct bins")
        for r in range(runs):
            seed = seed0 + r
            rng = np.random.default_rng(seed)
            t0 = time.perf_counter()
            results = []
            for b in range(10):
                sl = slice(b * batch, (b + 1) * batch if b < 9 else n)
                xb = xw[sl]
                kb = len(set(labels_arr[sl].tolist()))
                init = init_kpp(xb, kb, rng)
                results.append(kmeans(xb, init, ClusterParams(k_min=1, k_max=max(kb, 1))))
            duration = (time.perf_counter() - t0) / 10
            final = results[-1]
            score = nmi(final.assignment.tolist(), labels_arr[slice(9 * batch, n)].tolist())
            cohs = [
                coherence(results[i], results[i + 1]) for i in range(9)
            ]
            cfg.records.append(RunRecord(seed, score, float(np.mean(cohs)), duration))
        report.configs.append(cfg)

    stride = batch // 4 if overlap == 75 else batch // 2
    gap = 4 if overlap == 75 else 2  # runs one full window apart
    cfg = ConfigReport(name=f"dyn. sKMeans++, {overlap}% overlap, max {k_max}")
    for r in range(runs):
        seed = seed0 + r
        t0 = time.perf_counter()
        prev: Optional[Clustering] = None
        run_results = []
        starts = _window_starts(n, batch, stride)
        for t, start in enumerate(starts):
            xw_win = xw[start : start + batch]
            params = ClusterParams(
                k_min=2, k_max=k_max, rng_seed=seed0 + r * 1_000_003 + t
            )
            prev = dynamic_cluster(xw_win, prev, params)
            run_results.append(prev)
        duration = (time.perf_counter() - t0) / len(starts)
        final = run_results[-1]
        final_labels = labels_arr[starts[-1] : starts[-1] + batch].tolist()
        score = nmi(final.assignment.tolist(), final_labels)
        # compare runs one full window apart (on the regular stride grid)
        regular = [res for i, (s, res) in enumerate(zip(starts, run_results)) if s == i * stride]
        aligned = regular[::gap]
        cohs = [coherence(aligned[i], aligned[i + 1]) for i in range(len(aligned) - 1)]
        cfg.records.append(RunRecord(seed, score, float(np.mean(cohs)), duration))
    report.configs.append(cfg)
    return report
