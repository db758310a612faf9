import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamtopics import textprep as tp


class TestCleanText:
    def test_retweet_hashtag_url(self):
        assert tp.clean_text("RT @bob: Go #TeamA! https://t.co/x") == "Go TeamA!"

    def test_empty(self):
        assert tp.clean_text("") == ""

    def test_identity_without_markup(self):
        assert tp.clean_text("no markup here") == "no markup here"

    def test_mentions_preserved(self):
        assert tp.clean_text("thanks @alice for the tip") == "thanks @alice for the tip"

    def test_www_url(self):
        assert tp.clean_text("see www.example.com/page now") == "see now"

    @given(st.text(max_size=200))
    @settings(max_examples=300)
    def test_idempotent(self, text):
        once = tp.clean_text(text)
        assert tp.clean_text(once) == once


class TestTokenize:
    def test_stopword_removal(self):
        assert tp.tokenize("Go TeamA!", {"go"}) == ["teama"]

    def test_all_stopwords(self):
        assert tp.tokenize("the of and", {"the", "of", "and"}) == []

    def test_lowercase_and_punct(self):
        assert tp.tokenize("Curry, CURRY", set()) == ["curry", "curry"]

    def test_mention_prefix_kept(self):
        assert tp.tokenize("@TomBrady wins", set()) == ["@tombrady", "wins"]

    @given(st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=120))
    def test_ascii_tokens_never_uppercase_or_stopword(self, text):
        stop = {"the", "a", "of"}
        for tok in tp.tokenize(text, stop):
            assert tok == tok.lower()
            assert tok not in stop


class TestVectorize:
    def test_all_stopword_post_dismissed(self):
        vocab = tp.Vocabulary()
        idf = tp.IdfModel({}, 10)
        post = tp.RawPost("p1", "the of", 1000)
        assert tp.vectorize(post, vocab, idf, {"the", "of"}) is None

    def test_single_token_weight_one(self):
        vocab = tp.Vocabulary()
        idf = tp.IdfModel({}, 10)
        v = tp.vectorize(tp.RawPost("p1", "solo", 1000), vocab, idf, set())
        assert len(v) == 1
        assert v.weights[0] == pytest.approx(1.0)

    def test_two_token_weights(self):
        # idf 2.0 and 1.0, tf 1 each -> (2, 1)/sqrt(5)
        v = tp.vector_from_token_ids([0, 1], [2.0, 1.0])
        assert v.weights == pytest.approx([2 / math.sqrt(5), 1 / math.sqrt(5)])

    def test_novel_tokens_appended(self):
        vocab = tp.Vocabulary()
        idf = tp.IdfModel({}, 10)
        tp.vectorize(tp.RawPost("p1", "brandnewterm", 1000), vocab, idf, set())
        assert vocab.id_of("brandnewterm", append=False) == 0

    @given(
        st.lists(
            st.tuples(st.integers(0, 30), st.floats(0.1, 5.0)),
            min_size=1,
            max_size=25,
        )
    )
    def test_unit_norm_positive_increasing(self, pairs):
        ids = [p[0] for p in pairs]
        idfs = [p[1] for p in pairs]
        v = tp.vector_from_token_ids(ids, idfs)
        assert abs(v.norm() - 1.0) < 1e-9
        assert (v.weights > 0).all()
        assert (np.diff(v.ids) > 0).all()


class TestDot:
    def test_self_similarity(self):
        v = tp.vector_from_token_ids([1, 5], [1.0, 2.0])
        assert tp.dot(v, v) == pytest.approx(1.0, abs=1e-12)

    def test_disjoint_supports(self):
        a = tp.vector_from_token_ids([0, 1], [1.0, 1.0])
        b = tp.vector_from_token_ids([2, 3], [1.0, 1.0])
        assert tp.dot(a, b) == 0.0

    @given(st.data())
    @settings(max_examples=200)
    def test_matches_dense_oracle(self, data):
        dim = 50

        def vec(seed_ids, seed_ws):
            return tp.vector_from_token_ids(seed_ids, seed_ws)

        ids_a = data.draw(st.lists(st.integers(0, dim - 1), min_size=1, max_size=dim, unique=True))
        ids_b = data.draw(st.lists(st.integers(0, dim - 1), min_size=1, max_size=dim, unique=True))
        ws_a = data.draw(st.lists(st.floats(0.05, 3.0), min_size=len(ids_a), max_size=len(ids_a)))
        ws_b = data.draw(st.lists(st.floats(0.05, 3.0), min_size=len(ids_b), max_size=len(ids_b)))
        a, b = vec(ids_a, ws_a), vec(ids_b, ws_b)
        da = np.zeros(dim)
        da[a.ids] = a.weights
        db = np.zeros(dim)
        db[b.ids] = b.weights
        assert tp.dot(a, b) == pytest.approx(float(da @ db), abs=1e-12)
        assert tp.dot(a, b) == pytest.approx(tp.dot(b, a), abs=1e-15)


class TestIdf:
    def test_token_in_every_document(self):
        idf = tp.build_idf(["apple pie", "apple cake"], set())
        assert idf.idf("apple") == pytest.approx(1.0)

    def test_unseen_token(self):
        idf = tp.IdfModel({"known": 3}, 9)
        assert idf.idf("nope") == pytest.approx(math.log(10) + 1.0)

    def test_two_doc_corpus(self):
        idf = tp.build_idf(["apple pie", "banana cake"], set())
        assert idf.idf("apple") == pytest.approx(math.log(3 / 2) + 1.0)

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            tp.build_idf([], set())

    def test_save_load_roundtrip(self, tmp_path):
        idf = tp.build_idf(["apple pie", "banana pie"], set())
        path = tmp_path / "idf.tsv"
        idf.save(path)
        loaded = tp.IdfModel.load(path)
        assert loaded.n_ref == idf.n_ref
        assert loaded.df == idf.df


class TestVocabulary:
    def test_bidirectional(self):
        vocab = tp.Vocabulary()
        ids = vocab.ids(["b", "a", "b"])
        assert ids == [0, 1, 0]
        assert vocab.token_of(1) == "a"
        assert len(vocab) == 2

    def test_no_append_lookup(self):
        vocab = tp.Vocabulary()
        vocab.id_of("x")
        assert vocab.id_of("y", append=False) == -1
        assert len(vocab) == 1


class TestRawPost:
    def test_invariants(self):
        with pytest.raises(ValueError):
            tp.RawPost("", "x", 1)
        with pytest.raises(ValueError):
            tp.RawPost("a", "x", 0)
        with pytest.raises(ValueError):
            tp.RawPost("a", "x", 100, origin_published_at=200)

    def test_effective_date(self):
        assert tp.RawPost("a", "x", 100).effective_date == 100
        assert tp.RawPost("a", "x", 100, origin_published_at=50).effective_date == 50


def test_default_stopwords_loaded():
    sw = tp.load_stopwords()
    assert "the" in sw and "and" in sw
    assert len(sw) > 100


def test_stopwords_from_file(tmp_path):
    p = tmp_path / "stop.txt"
    p.write_text("foo\nbar\n\n  baz  \n", encoding="utf-8")
    assert tp.load_stopwords(p) == frozenset({"foo", "bar", "baz"})


def test_concurrent_vectorize_with_shared_vocab():
    import threading

    vocab = tp.Vocabulary()
    idf = tp.IdfModel({}, 10)
    posts = [tp.RawPost(f"p{i}", f"alpha{i % 50} beta{i % 31} gamma", 1 + i) for i in range(400)]
    results = [None] * 4

    def work(slot):
        results[slot] = [tp.vectorize(p, vocab, idf, frozenset()) for p in posts]

    threads = [threading.Thread(target=work, args=(s,)) for s in range(4)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    # all threads agree and the vocabulary stayed bijective
    for i in range(len(posts)):
        base = results[0][i]
        for r in results[1:]:
            assert np.array_equal(r[i].ids, base.ids)
    for tok_id in range(len(vocab)):
        assert vocab.id_of(vocab.token_of(tok_id), append=False) == tok_id
