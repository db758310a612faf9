"""Text preprocessing: cleaning, tokenization, and TF-IDF sparse vectors.

Turns raw posts into unit-length sparse bag-of-words vectors over a
vocabulary that grows as new terms (hashtags, names) appear in the stream.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from importlib import resources
from threading import Lock
from typing import Iterable, Optional, Sequence

import numpy as np

_URL_RE = re.compile(r"(?:https?://|www\.)\S*")
_RT_RE = re.compile(r"^\s*RT @\w+:\s*")
_WS_RE = re.compile(r"\s+")
_TOKEN_RE = re.compile(r"@?\w+", re.UNICODE)


@dataclass
class RawPost:
    """A single incoming post.

    ``origin_published_at`` carries the original publish time when the post
    is a repost; temporal views bin on that effective date.
    """

    id: str
    text: str
    published_at: int  # epoch milliseconds
    lang: Optional[str] = None
    origin_published_at: Optional[int] = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("post id must be non-empty")
        if self.published_at <= 0:
            raise ValueError("published_at must be positive")
        if self.origin_published_at is not None and self.origin_published_at > self.published_at:
            raise ValueError("origin_published_at cannot be after published_at")

    @property
    def effective_date(self) -> int:
        return self.origin_published_at if self.origin_published_at is not None else self.published_at


class Vocabulary:
    """Append-only bidirectional token <-> dense-id mapping.

    Reads are plain dict lookups; appends are serialized so vectorization
    can run on several posts concurrently.
    """

    def __init__(self):
        self._token_to_id: dict[str, int] = {}
        self._id_to_token: list[str] = []
        self._lock = Lock()

    def __len__(self) -> int:
        return len(self._id_to_token)

    def id_of(self, token: str, append: bool = True) -> int:
        """Return the id for ``token``, appending it when unseen. -1 if absent and append=False."""
        i = self._token_to_id.get(token)
        if i is not None:
            return i
        if not append:
            return -1
        with self._lock:
            i = self._token_to_id.get(token)
            if i is None:
                i = len(self._id_to_token)
                self._id_to_token.append(token)
                self._token_to_id[token] = i
            return i

    def token_of(self, i: int) -> str:
        return self._id_to_token[i]

    def ids(self, tokens: Iterable[str], append: bool = True) -> list[int]:
        """Map tokens to ids in order; unseen tokens are dropped when append=False."""
        get = self._token_to_id.get
        if append:
            return [self.id_of(t) for t in tokens]
        out = []
        for t in tokens:
            i = get(t)
            if i is not None:
                out.append(i)
        return out


class IdfModel:
    """Per-token document frequencies from a reference corpus.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1, so unseen tokens still get a
    positive, finite weight and can cluster from their first appearance.
    """

    def __init__(self, df: dict[str, int], n_ref: int):
        if n_ref < 1:
            raise ValueError("reference corpus size must be >= 1")
        for token, count in df.items():
            if not 1 <= count <= n_ref:
                raise ValueError(f"df out of range for token {token!r}: {count}")
        self.df = df
        self.n_ref = n_ref
        self._log_num = math.log(1 + n_ref)

    def idf(self, token: str) -> float:
        return self._log_num - math.log(1 + self.df.get(token, 0)) + 1.0

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"#N_REF {self.n_ref}\n")
            for token, count in sorted(self.df.items()):
                f.write(f"{token}\t{count}\n")

    @classmethod
    def load(cls, path) -> "IdfModel":
        df: dict[str, int] = {}
        n_ref = None
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#N_REF"):
                    n_ref = int(line.split()[1])
                    continue
                token, _, count = line.partition("\t")
                df[token] = int(count)
        if n_ref is None:
            raise ValueError(f"missing #N_REF header in {path}")
        return cls(df, n_ref)


@dataclass(frozen=True)
class SparseVector:
    """Unit-norm sparse vector: strictly increasing token ids, positive weights."""

    ids: np.ndarray  # int32, strictly increasing
    weights: np.ndarray  # float64, all > 0

    def __len__(self) -> int:
        return len(self.ids)

    def norm(self) -> float:
        return float(np.sqrt(np.dot(self.weights, self.weights)))

    def dot(self, other: "SparseVector") -> float:
        return dot(self, other)


def dot(a: SparseVector, b: SparseVector) -> float:
    """Merge-join dot product over the sorted id arrays."""
    ai, bi = a.ids, b.ids
    aw, bw = a.weights, b.weights
    i = j = 0
    na, nb = len(ai), len(bi)
    acc = 0.0
    while i < na and j < nb:
        da, db = ai[i], bi[j]
        if da == db:
            acc += aw[i] * bw[j]
            i += 1
            j += 1
        elif da < db:
            i += 1
        else:
            j += 1
    return acc


def cosine_distance(a: SparseVector, b: SparseVector) -> float:
    return 1.0 - dot(a, b)


def clean_text(text: str) -> str:
    """Strip ``#`` characters, remove URLs and leading retweet markup, tidy whitespace.

    Idempotent: hashes are stripped before URL removal so de-hashing can
    never fabricate a URL, and leading ``RT @user:`` markers are removed
    repeatedly, not just once.
    """
    if "#" in text:
        text = text.replace("#", "")
    if "http" in text or "www." in text:
        text = _URL_RE.sub("", text)
    while True:
        stripped = _RT_RE.sub("", text, count=1)
        if stripped == text:
            break
        text = stripped
    return _WS_RE.sub(" ", text).strip()


def tokenize(cleaned: str, stopwords: frozenset[str] | set[str]) -> list[str]:
    """Lowercase word tokens (``@`` kept as mention prefix), stopwords removed."""
    return [t for t in _TOKEN_RE.findall(cleaned.lower()) if t not in stopwords]


def vector_from_token_ids(
    token_ids: Sequence[int], idf_values: Sequence[float]
) -> Optional[SparseVector]:
    """Build the unit-norm TF-IDF vector for one document.

    ``idf_values`` is aligned with ``token_ids``. Returns None for empty
    token lists (unclusterable post).
    """
    if not token_ids:
        return None
    acc: dict[int, float] = {}
    for tid, w in zip(token_ids, idf_values):
        acc[tid] = acc.get(tid, 0.0) + w
    ids = np.fromiter(acc.keys(), dtype=np.int32, count=len(acc))
    weights = np.fromiter(acc.values(), dtype=np.float64, count=len(acc))
    order = np.argsort(ids)
    ids = ids[order]
    weights = weights[order]
    weights /= math.sqrt(float(np.dot(weights, weights)))
    return SparseVector(ids, weights)


def vectorize(
    post: RawPost,
    vocab: Vocabulary,
    idf: IdfModel,
    stopwords: frozenset[str] | set[str],
) -> Optional[SparseVector]:
    """Clean, tokenize, and TF-IDF-weight a post. None when only stopwords remain."""
    tokens = tokenize(clean_text(post.text), stopwords)
    if not tokens:
        return None
    token_ids = [vocab.id_of(t) for t in tokens]
    idf_values = [idf.idf(t) for t in tokens]
    return vector_from_token_ids(token_ids, idf_values)


def build_idf(
    corpus: Iterable[RawPost | str], stopwords: frozenset[str] | set[str]
) -> IdfModel:
    """Document frequencies over a reference corpus (posts or plain strings)."""
    df: dict[str, int] = {}
    n = 0
    for doc in corpus:
        text = doc.text if isinstance(doc, RawPost) else doc
        n += 1
        for token in set(tokenize(clean_text(text), stopwords)):
            df[token] = df.get(token, 0) + 1
    if n == 0:
        raise ValueError("reference corpus is empty")
    return IdfModel(df, n)


def load_stopwords(path=None) -> frozenset[str]:
    """Stopword set from a UTF-8 one-token-per-line file; default English list."""
    if path is None:
        text = resources.files("streamtopics.data").joinpath("stopwords_en.txt").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    return frozenset(line.strip() for line in text.splitlines() if line.strip())
