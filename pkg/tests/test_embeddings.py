"""Vocabulary, negative-sampling gradients, training behavior, persistence."""

import numpy as np
import pytest

from harlex.embeddings import (
    EmbeddingConfig,
    EmptyVocabularyError,
    TooFewPointsError,
    build_vocab,
    compose_tweet,
    fnv1a_64,
    load_table,
    negative_sampling_grads,
    negative_sampling_loss,
    project_2d,
    save_table,
    train,
    word_vector,
)
from harlex.errors import ConfigError
from harlex.text import character_ngrams, tokenize


class TestBuildVocab:
    def test_min_count_excludes(self):
        sents = [["rare"] * 9, ["common"] * 10]
        v = build_vocab(sents, min_count=10)
        assert "common" in v and "rare" not in v

    def test_min_count_one_keeps_all(self):
        v = build_vocab([["a", "b"], ["c"]], min_count=1)
        assert sorted(v.tokens) == ["a", "b", "c"]

    def test_order_descending_count_then_lexicographic(self):
        v = build_vocab([["b"] * 5 + ["a"] * 5 + ["z"] * 7], min_count=1)
        assert v.tokens == ("z", "a", "b")

    def test_counts_retained(self):
        v = build_vocab([["x", "x", "y"]], min_count=1)
        assert v.counts[v.index["x"]] == 2

    def test_empty_raises(self):
        with pytest.raises(EmptyVocabularyError):
            build_vocab([["only"], ["once", "each"]], min_count=5)

    def test_token_streams_accepted(self):
        v = build_vocab([tokenize("hello hello world")], min_count=2)
        assert "hello" in v and "world" not in v


class TestFnv:
    def test_known_offsets(self):
        # FNV-1a 64-bit reference values
        assert fnv1a_64("") == 0xCBF29CE484222325
        assert fnv1a_64("a") == 0xAF63DC4C8601EC8C

    def test_stability(self):
        assert fnv1a_64("<cat>") == fnv1a_64("<cat>")
        assert fnv1a_64("cat") != fnv1a_64("tac")


class TestGradients:
    def finite_diff(self, f, x, eps=1e-6):
        g = np.zeros_like(x)
        for i in range(x.size):
            xp, xm = x.copy(), x.copy()
            xp.flat[i] += eps
            xm.flat[i] -= eps
            g.flat[i] = (f(xp) - f(xm)) / (2 * eps)
        return g

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            dim, k = 5, int(rng.integers(1, 6))
            v = rng.normal(scale=0.5, size=dim)
            u_pos = rng.normal(scale=0.5, size=dim)
            u_neg = rng.normal(scale=0.5, size=(k, dim))
            dv, dp, dn = negative_sampling_grads(v, u_pos, u_neg)
            fd_v = self.finite_diff(
                lambda x: negative_sampling_loss(x, u_pos, u_neg), v)
            fd_p = self.finite_diff(
                lambda x: negative_sampling_loss(v, x, u_neg), u_pos)
            fd_n = self.finite_diff(
                lambda x: negative_sampling_loss(v, u_pos, x), u_neg)
            for got, want in ((dv, fd_v), (dp, fd_p), (dn, fd_n)):
                denom = max(np.abs(want).max(), 1e-8)
                assert np.abs(got - want).max() / denom <= 1e-4

    def test_loss_positive(self):
        rng = np.random.default_rng(1)
        v = rng.normal(size=4)
        assert negative_sampling_loss(v, rng.normal(size=4),
                                      rng.normal(size=(3, 4))) > 0.0


def toy_sentences(n=120):
    rng = np.random.default_rng(0)
    pairs = [("alpha", "beta"), ("gamma", "delta"), ("eps", "zeta")]
    out = []
    for i in range(n):
        a, b = pairs[i % 3]
        out.append([a, b] if rng.random() < 0.5 else [b, a])
    return out


class TestTrain:
    def test_loss_history_monotone_nonincreasing(self):
        for mode in ("skipgram", "cbow"):
            cfg = EmbeddingConfig(dim=12, window=2, min_count=2, mode=mode,
                                  epochs=4, seed=5)
            t = train(toy_sentences(), cfg)
            hist = t.loss_history
            assert len(hist) == 4
            assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))

    def test_deterministic_for_seed(self):
        cfg = EmbeddingConfig(dim=8, window=2, min_count=2, epochs=2, seed=9)
        t1 = train(toy_sentences(), cfg)
        t2 = train(toy_sentences(), cfg)
        assert np.array_equal(t1.input_vectors, t2.input_vectors)
        assert np.array_equal(t1.output_vectors, t2.output_vectors)

    def test_different_seed_differs(self):
        c1 = EmbeddingConfig(dim=8, window=2, min_count=2, epochs=2, seed=1)
        c2 = EmbeddingConfig(dim=8, window=2, min_count=2, epochs=2, seed=2)
        assert not np.array_equal(train(toy_sentences(), c1).input_vectors,
                                  train(toy_sentences(), c2).input_vectors)

    def test_all_entries_finite(self):
        cfg = EmbeddingConfig(dim=10, window=3, min_count=2, epochs=3, seed=3,
                              level="subword", n_min=2, n_max=4, bucket_count=1000)
        t = train(toy_sentences(), cfg)
        assert np.isfinite(t.input_vectors).all()
        assert np.isfinite(t.output_vectors).all()

    def test_min_count_exclusion_honored(self):
        sents = [["alpha", "beta"]] * 10 + [["stray", "alpha"]]
        cfg = EmbeddingConfig(dim=6, window=2, min_count=2, epochs=1, seed=0)
        t = train(sents, cfg)
        assert "stray" not in t.vocab
        assert word_vector(t, "stray") is None

    def test_empty_vocab_raises(self):
        cfg = EmbeddingConfig(dim=4, window=2, min_count=50, epochs=1, seed=0)
        with pytest.raises(EmptyVocabularyError):
            train(toy_sentences(12), cfg)

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            EmbeddingConfig(dim=0)
        with pytest.raises(ConfigError):
            EmbeddingConfig(mode="glove")
        with pytest.raises(ConfigError):
            EmbeddingConfig(n_min=4, n_max=2)


class TestWordVector:
    def test_word_level_lookup_and_absent(self):
        cfg = EmbeddingConfig(dim=6, window=2, min_count=2, epochs=1, seed=0)
        t = train(toy_sentences(), cfg)
        v = word_vector(t, "alpha")
        assert v is not None and v.shape == (6,)
        assert word_vector(t, "nonexistent") is None

    def test_subword_oov_is_finite(self):
        cfg = EmbeddingConfig(dim=6, window=2, min_count=2, epochs=1, seed=0,
                              level="subword", n_min=2, n_max=3, bucket_count=500)
        t = train(toy_sentences(), cfg)
        v = word_vector(t, "betaish")
        assert v is not None and np.isfinite(v).all()

    def test_subword_identical_string_identical_vector(self):
        cfg = EmbeddingConfig(dim=6, window=2, min_count=2, epochs=1, seed=0,
                              level="subword", n_min=2, n_max=3, bucket_count=500)
        t = train(toy_sentences(), cfg)
        assert np.array_equal(word_vector(t, "alpha"), word_vector(t, "alpha"))

    def test_subword_vector_is_bucket_mean(self):
        cfg = EmbeddingConfig(dim=6, window=2, min_count=2, epochs=1, seed=0,
                              level="subword", n_min=2, n_max=3, bucket_count=500)
        t = train(toy_sentences(), cfg)
        grams = character_ngrams("alpha", 2, 3)
        rows = np.stack([
            t.subword_buckets.lookup(
                np.array([fnv1a_64(g) % 500], dtype=np.int64))[0]
            for g in grams
        ])
        assert np.allclose(word_vector(t, "alpha"), rows.mean(axis=0), atol=1e-12)


class TestComposeTweet:
    def table(self):
        cfg = EmbeddingConfig(dim=4, window=2, min_count=2, epochs=1, seed=0)
        return train(toy_sentences(), cfg)

    def test_singleton_mean_is_vector(self):
        t = self.table()
        tweet = tokenize("alpha")
        assert np.array_equal(compose_tweet(t, tweet, "mean"),
                              word_vector(t, "alpha"))

    def test_mean_skips_absent(self):
        t = self.table()
        got = compose_tweet(t, tokenize("alpha missing"), "mean")
        assert np.array_equal(got, word_vector(t, "alpha"))

    def test_all_absent_gives_zeros(self):
        t = self.table()
        assert not compose_tweet(t, tokenize("missing tokens"), "mean").any()

    def test_concat_pads(self):
        t = self.table()
        got = compose_tweet(t, tokenize("alpha beta"), "concat", pad_length=4)
        assert got.shape == (16,)
        assert np.array_equal(got[:4], word_vector(t, "alpha"))
        assert not got[8:].any()

    def test_concat_truncates(self):
        t = self.table()
        got = compose_tweet(t, tokenize("alpha beta gamma"), "concat", pad_length=2)
        assert got.shape == (8,)
        assert np.array_equal(got[4:], word_vector(t, "beta"))


class TestProject2d:
    def test_shape_and_determinism(self):
        cfg = EmbeddingConfig(dim=8, window=2, min_count=2, epochs=2, seed=4)
        t = train(toy_sentences(), cfg)
        tokens = ["alpha", "beta", "gamma", "delta"]
        a = project_2d(t, tokens)
        b = project_2d(t, tokens)
        assert a == b
        assert [x[0] for x in a] == tokens

    def test_too_few_points(self):
        cfg = EmbeddingConfig(dim=8, window=2, min_count=2, epochs=1, seed=4)
        t = train(toy_sentences(), cfg)
        with pytest.raises(TooFewPointsError):
            project_2d(t, ["alpha", "unseen-token"])


class TestPersistence:
    def test_word_round_trip_exact(self, tmp_path):
        cfg = EmbeddingConfig(dim=7, window=2, min_count=2, epochs=2, seed=8)
        t = train(toy_sentences(), cfg)
        p = tmp_path / "emb.txt"
        save_table(t, p)
        back = load_table(p)
        assert back.vocab.tokens == t.vocab.tokens
        assert np.array_equal(back.input_vectors, t.input_vectors)
        for tok in t.vocab.tokens:
            assert np.array_equal(word_vector(back, tok), word_vector(t, tok))

    def test_subword_round_trip_exact(self, tmp_path):
        cfg = EmbeddingConfig(dim=5, window=2, min_count=2, epochs=1, seed=8,
                              level="subword", n_min=2, n_max=3, bucket_count=700)
        t = train(toy_sentences(), cfg)
        p = tmp_path / "emb.txt"
        save_table(t, p)
        assert (tmp_path / "emb.txt.buckets").exists()
        back = load_table(p)
        for tok in list(t.vocab.tokens) + ["unseen", "alphabeta"]:
            assert np.array_equal(word_vector(back, tok), word_vector(t, tok))
