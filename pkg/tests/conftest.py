import numpy as np
import pytest

from streamtopics.textprep import IdfModel, RawPost, Vocabulary, vectorize
from streamtopics.window import SlidingWindow, WindowItem, WindowSnapshot


class TextModel:
    """Bundles vocab/idf/stopwords and builds window items from raw text."""

    def __init__(self, stopwords=frozenset()):
        self.vocab = Vocabulary()
        self.idf = IdfModel({}, 100)
        self.stopwords = stopwords
        self._arrival = 0

    def item(self, post_id, text, published_at, origin=None):
        post = RawPost(post_id, text, published_at, origin_published_at=origin)
        vec = vectorize(post, self.vocab, self.idf, self.stopwords)
        assert vec is not None, f"post {post_id} vectorized to nothing"
        from streamtopics.textprep import clean_text, tokenize

        tokens = tuple(self.vocab.id_of(t) for t in tokenize(clean_text(text), self.stopwords))
        item = WindowItem(post, vec, tokens, self._arrival)
        self._arrival += 1
        return item

    def snapshot(self, items, start_ms=0, end_ms=10_000, generation=1):
        return WindowSnapshot(generation, tuple(items), start_ms, end_ms)


@pytest.fixture
def text_model():
    return TextModel()


def group_texts(spec):
    """spec: list of (group_word, count). Returns per-post texts with a
    shared group token plus a per-group filler token."""
    texts = []
    for word, count in spec:
        texts += [f"{word} {word}x"] * count
    return texts
