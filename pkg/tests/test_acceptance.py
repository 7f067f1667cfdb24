"""Acceptance gate: nine behavioral criteria at pinned tolerances.

Each criterion prints one [PASS]/[FAIL]/[SKIP] line outside pytest's
capture, so a full run reads as a checklist.  Tolerances and budgets in
this file are contractual; do not loosen them to make a run green.
"""

import json
import math
import os
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from harlex.classify import (
    GbmConfig,
    load_model,
    predict,
    save_model,
    train_gbm,
    train_knn,
    train_nb,
    train_svm,
)
from harlex.classify import _best_split
from harlex.cli import main
from harlex.corpus import load_corpus
from harlex.embeddings import (
    EmbeddingConfig,
    load_table,
    negative_sampling_grads,
    negative_sampling_loss,
    save_table,
    train,
    word_vector,
)
from harlex.evaluate import binary_metrics, confusion, multiclass_metrics
from harlex.lexicon import effect_size
from harlex.text import tokenize
from harlex.vectorize import fit_tfidf, transform_tfidf_corpus

from conftest import corpus_of, random_texts


@contextmanager
def criterion(capsys, num, desc, budget_s=None):
    t0 = time.monotonic()
    try:
        yield
        elapsed = time.monotonic() - t0
        if budget_s is not None:
            assert elapsed < budget_s, f"criterion {num} took {elapsed:.1f}s"
    except pytest.skip.Exception:
        with capsys.disabled():
            print(f"[SKIP] criterion {num}: {desc}")
        raise
    except BaseException:
        with capsys.disabled():
            print(f"[FAIL] criterion {num}: {desc}")
        raise
    with capsys.disabled():
        print(f"[PASS] criterion {num}: {desc} ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 1. metric oracle equivalence


def brute_rates(tp, fp, fn, tn=None):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def test_criterion_1_metric_oracle(capsys):
    with criterion(capsys, 1, "confusion/binary/multiclass metrics vs "
                              "brute-force tally, 1000 vectors, 1e-12",
                   budget_s=10):
        rng = np.random.default_rng(101)
        for _ in range(1000):
            C = int(rng.integers(2, 7))
            n = int(rng.integers(1, 201))
            true = rng.integers(0, C, size=n).tolist()
            pred = rng.integers(0, C, size=n).tolist()
            space = tuple(range(C))
            cm = confusion(true, pred, space)
            rep = multiclass_metrics(cm)

            tps = np.array([sum(1 for t, p in zip(true, pred) if t == i and p == i)
                            for i in range(C)], dtype=float)
            fps = np.array([sum(1 for t, p in zip(true, pred) if t != i and p == i)
                            for i in range(C)], dtype=float)
            fns = np.array([sum(1 for t, p in zip(true, pred) if t == i and p != i)
                            for i in range(C)], dtype=float)
            per = [brute_rates(tps[i], fps[i], fns[i]) for i in range(C)]
            for cls, (p, r, f) in zip(rep.per_class, per):
                assert cls.precision == pytest.approx(p, abs=1e-12)
                assert cls.recall == pytest.approx(r, abs=1e-12)
                assert cls.f_score == pytest.approx(f, abs=1e-12)
            mp, mr, mf = brute_rates(tps.sum(), fps.sum(), fns.sum())
            acc = sum(1 for t, p in zip(true, pred) if t == p) / n
            assert rep.micro_precision == pytest.approx(mp, abs=1e-12)
            assert rep.micro_recall == pytest.approx(mr, abs=1e-12)
            assert rep.micro_f == pytest.approx(mf, abs=1e-12)
            assert rep.accuracy == pytest.approx(acc, abs=1e-12)
            # the micro identity holds on every drawn vector
            assert rep.micro_precision == pytest.approx(acc, abs=1e-12)
            assert rep.micro_f == pytest.approx(acc, abs=1e-12)
            assert rep.macro_f == pytest.approx(
                np.mean([f for _, _, f in per]), abs=1e-12)

            if C == 2:
                b = binary_metrics(cm, positive=1)
                tp, fp, fn = tps[1], fps[1], fns[1]
                tn = n - tp - fp - fn
                p, r, f = brute_rates(tp, fp, fn)
                spec = tn / (tn + fp) if tn + fp else 0.0
                assert b.precision == pytest.approx(p, abs=1e-12)
                assert b.recall == pytest.approx(r, abs=1e-12)
                assert b.f_score == pytest.approx(f, abs=1e-12)
                assert b.specificity == pytest.approx(spec, abs=1e-12)
                assert b.accuracy == pytest.approx(acc, abs=1e-12)


# ---------------------------------------------------------------------------
# 2. effect-size oracle


def test_criterion_2_effect_size_oracle(capsys):
    with criterion(capsys, 2, "effect size vs independent pooled-variance "
                              "computation, 1000 pairs, 1e-12"):
        rng = np.random.default_rng(102)
        for _ in range(1000):
            n1 = int(rng.integers(2, 41))
            n2 = int(rng.integers(2, 41))
            a = rng.standard_normal(n1) * rng.uniform(0.5, 3) + rng.uniform(-5, 5)
            b = rng.standard_normal(n2) * rng.uniform(0.5, 3) + rng.uniform(-5, 5)
            got = effect_size(a, b)
            s2 = (((n1 - 1) * a.var(ddof=1) + (n2 - 1) * b.var(ddof=1))
                  / (n1 + n2 - 2))
            want = (a.mean() - b.mean()) / math.sqrt(s2)
            assert got == pytest.approx(want, rel=1e-12, abs=1e-12)
            # antisymmetry and shift invariance
            assert effect_size(b, a) == pytest.approx(-got, rel=1e-12, abs=1e-12)
            c = float(rng.uniform(-10, 10))
            assert effect_size(a + c, b + c) == pytest.approx(got, abs=1e-9)
        assert effect_size([1, 3], [0, 2]) == pytest.approx(
            1 / math.sqrt(2), abs=1e-12)


# ---------------------------------------------------------------------------
# 3. TFIDF oracle


def test_criterion_3_tfidf_oracle(capsys):
    with criterion(capsys, 3, "TFIDF vs brute-force count*idf on 200 "
                              "mini-corpora, 1e-12; norms 1 or 0"):
        rng = np.random.default_rng(103)
        for _ in range(200):
            n_docs = int(rng.integers(1, 51))
            vocab = int(rng.integers(2, 31))
            texts = random_texts(rng, n_docs, vocab_size=vocab)
            c = corpus_of(texts)
            model = fit_tfidf(c, norm="none")
            X = transform_tfidf_corpus(model, c).toarray()
            docs = [tokenize(t).words() for t in texts]
            N = len(docs)
            for j, tok in enumerate(model.tokens()):
                df = sum(1 for d in docs if tok in d)
                idf = math.log((1 + N) / (1 + df)) + 1
                for i, d in enumerate(docs):
                    assert X[i, j] == pytest.approx(d.count(tok) * idf, abs=1e-12)
            norms = np.linalg.norm(
                transform_tfidf_corpus(fit_tfidf(c), c).toarray(), axis=1)
            assert all(abs(v - 1) < 1e-12 or v == 0.0 for v in norms)


# ---------------------------------------------------------------------------
# 4. NB / KNN oracles


def test_criterion_4_nb_knn_oracles(capsys):
    with criterion(capsys, 4, "NB posteriors vs exhaustive Bayes (1e-10 rel); "
                              "KNN vs full sort on 100 instances",
                   budget_s=30):
        rng = np.random.default_rng(104)
        for _ in range(50):
            n, d = int(rng.integers(6, 40)), int(rng.integers(2, 8))
            C = int(rng.integers(2, 5))
            X = rng.integers(0, 7, size=(n, d)).astype(float)
            y = rng.integers(0, C, size=n)
            y[:C] = np.arange(C)
            alpha = float(rng.uniform(0.3, 2.5))
            m = train_nb(X, y, variant="multinomial", alpha=alpha)
            Q = rng.integers(0, 7, size=(5, d)).astype(float)
            got = predict(m, Q).scores
            priors = np.array([(y == c).mean() for c in range(C)])
            theta = np.stack([
                (X[y == c].sum(axis=0) + alpha) / (X[y == c].sum() + alpha * d)
                for c in range(C)
            ])
            for i in range(Q.shape[0]):
                joint = priors * np.prod(theta ** Q[i], axis=1)
                want = joint / joint.sum()
                assert np.allclose(got[i], want, rtol=1e-10, atol=0)

        for _ in range(100):
            n, d = int(rng.integers(10, 60)), int(rng.integers(2, 6))
            C = int(rng.integers(2, 4))
            Xt = rng.standard_normal((n, d))
            yt = rng.integers(0, C, size=n)
            yt[:C] = np.arange(C)
            k = int(rng.integers(1, min(n, 9)))
            q = rng.standard_normal((1, d))
            got = predict(train_knn(Xt, yt, k=k), q).labels[0]
            dist = np.sqrt(((Xt - q[0]) ** 2).sum(axis=1))
            order = np.lexsort((np.arange(n), dist))[:k]
            votes = np.bincount(yt[order], minlength=C)
            assert got == int(np.argmax(votes))


# ---------------------------------------------------------------------------
# 5. GBM behavioral suite


def brute_best_split(X, r, idx, min_leaf):
    best = None
    n = idx.size
    for f in range(X.shape[1]):
        vals, rs = X[idx, f], r[idx]
        order = np.argsort(vals, kind="stable")
        sv, sr = vals[order], rs[order]
        for i in range(min_leaf, n - min_leaf + 1):
            if i == n or sv[i] <= sv[i - 1]:
                continue
            ml, mr = sr[:i].mean(), sr[i:].mean()
            imp = i * (n - i) / n * (ml - mr) ** 2
            if imp > 0 and (best is None or imp > best[2] + 1e-15):
                best = (f, 0.5 * (sv[i - 1] + sv[i]), imp)
    return best


def xor_dataset(rng, n=200, sigma=0.1):
    X = rng.uniform(-1, 1, size=(n, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(int)
    return X + sigma * rng.standard_normal(X.shape), y


def test_criterion_5_gbm_suite(capsys):
    with criterion(capsys, 5, "GBM: monotone staged loss (20 datasets), "
                              "exhaustive split match, XOR >= 0.95, "
                              "bit-reproducible", budget_s=120):
        rng = np.random.default_rng(105)
        # (a) staged logistic loss non-increasing at subsample = 1.0
        for _ in range(20):
            n, d = int(rng.integers(40, 150)), int(rng.integers(2, 6))
            X = rng.standard_normal((n, d))
            y = (X[:, 0] + 0.5 * rng.standard_normal(n) > 0).astype(int)
            if y.min() == y.max():
                y[0] = 1 - y[0]
            m = train_gbm(X, y, GbmConfig(n_trees=25, subsample=1.0))
            assert np.all(np.diff(m.params["stage_losses"]) <= 1e-9)

        # (b) chosen splits equal exhaustive Friedman-MSE search
        for _ in range(15):
            n = int(rng.integers(5, 201))
            d = int(rng.integers(1, 5))
            X = rng.standard_normal((n, d))
            r = rng.standard_normal(n)
            got = _best_split(X, r, np.arange(n), min_leaf=1)
            want = brute_best_split(X, r, np.arange(n), min_leaf=1)
            if want is None:
                assert got is None
                continue
            assert got is not None
            assert got[2] == pytest.approx(want[2], rel=1e-9)
            assert got[0] == want[0]
            assert got[1] == pytest.approx(want[1], rel=1e-12)

        # (c) XOR with 100 trees, depth 3, learning rate 0.1
        X, y = xor_dataset(np.random.default_rng(205), n=200, sigma=0.1)
        cfg = GbmConfig(n_trees=100, max_depth=3, learning_rate=0.1)
        model = train_gbm(X, y, cfg)
        acc = (predict(model, X).labels == y).mean()
        assert acc >= 0.95

        # (d) bit-reproducible under a fixed seed, including subsampling
        cfg = GbmConfig(n_trees=20, subsample=0.7, seed=11)
        s1 = predict(train_gbm(X, y, cfg), X).scores
        s2 = predict(train_gbm(X, y, cfg), X).scores
        assert np.array_equal(s1, s2)


# ---------------------------------------------------------------------------
# 6. embedding suite


def pair_corpus(n_pairs=50, n_sentences=10_000):
    return [[f"x{s % n_pairs}", f"y{s % n_pairs}"] for s in range(n_sentences)]


def pair_margin(table, n_pairs=50):
    X = np.stack([word_vector(table, f"x{i}") for i in range(n_pairs)])
    Y = np.stack([word_vector(table, f"y{i}") for i in range(n_pairs)])
    X /= np.linalg.norm(X, axis=1, keepdims=True)
    Y /= np.linalg.norm(Y, axis=1, keepdims=True)
    S = X @ Y.T
    paired = float(np.trace(S)) / n_pairs
    unpaired = float(S.sum() - np.trace(S)) / (S.size - n_pairs)
    return paired - unpaired


def test_criterion_6_embedding_suite(capsys, tmp_path):
    with criterion(capsys, 6, "embeddings: FD gradients <= 1e-4, pair-corpus "
                              "margin >= 0.2, min_count exclusion, exact "
                              "save/load", budget_s=180):
        # (a) analytic negative-sampling gradients vs finite differences
        rng = np.random.default_rng(106)
        for _ in range(30):
            v = rng.standard_normal(5)
            u_pos = rng.standard_normal(5)
            u_neg = rng.standard_normal((4, 5))
            gv, gp, gn = negative_sampling_grads(v, u_pos, u_neg)
            h = 1e-6
            for j in range(5):
                e = np.zeros(5)
                e[j] = h
                fd = (negative_sampling_loss(v + e, u_pos, u_neg)
                      - negative_sampling_loss(v - e, u_pos, u_neg)) / (2 * h)
                rel = abs(gv[j] - fd) / max(abs(fd), 1e-8)
                assert rel <= 1e-4
                fd = (negative_sampling_loss(v, u_pos + e, u_neg)
                      - negative_sampling_loss(v, u_pos - e, u_neg)) / (2 * h)
                assert abs(gp[j] - fd) / max(abs(fd), 1e-8) <= 1e-4

        # (b) pair corpus: paired words come out more similar than unpaired
        sents = pair_corpus()
        for level in ("word", "subword"):
            for mode in ("skipgram", "cbow"):
                cfg = EmbeddingConfig(dim=50, mode=mode, level=level, seed=3)
                table = train(sents, cfg)
                assert pair_margin(table) >= 0.2, (level, mode)

        # (c) min_count=10 drops a 9-occurrence token
        sents = [["common", "common", "rare"]] * 9 + [["common"]] * 11
        cfg = EmbeddingConfig(dim=8, min_count=10, epochs=1, seed=0)
        table = train(sents, cfg)
        assert word_vector(table, "common") is not None
        assert word_vector(table, "rare") is None

        # (d) save/load round-trip is vector-exact, both levels
        for level in ("word", "subword"):
            cfg = EmbeddingConfig(dim=12, min_count=1, epochs=1, seed=2,
                                  level=level, bucket_count=1000)
            table = train([["alpha", "beta", "gamma"]] * 12, cfg)
            path = tmp_path / f"{level}.txt"
            save_table(table, path)
            back = load_table(path)
            assert np.array_equal(back.input_vectors, table.input_vectors)
            for tok in ("alpha", "beta", "gamma", "unseen"):
                a = word_vector(table, tok)
                b = word_vector(back, tok)
                if a is None:
                    assert b is None
                else:
                    assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# 7. end-to-end pipeline on the bundled fixture


def test_criterion_7_pipeline_fixture(capsys, fixture_corpus_path, tmp_path):
    with criterion(capsys, 7, 'cv "F(S)+W(S)" dim 50 GBM on the bundled '
                              "fixture: binary F >= 0.80, multiclass "
                              "macro F >= 0.70", budget_s=300):
        base = ["cv", "--corpus", str(fixture_corpus_path),
                "--spec", "F(S)+W(S)", "--dim", "50",
                "--learner", "gbm", "--seed", "7"]
        out_b = tmp_path / "binary"
        rc = main(base + ["--task", "combined-binary", "--out-dir", str(out_b)])
        assert rc == 0
        with open(out_b / "manifest.json", encoding="utf-8") as fh:
            res = json.load(fh)["results"]["combined-binary"]
        assert res["aggregated"]["f_score"] >= 0.80
        assert res["pooled"]["f_score"] >= 0.80

        out_m = tmp_path / "multi"
        rc = main(base + ["--task", "multiclass", "--k", "5",
                          "--repeats", "5", "--out-dir", str(out_m)])
        assert rc == 0
        with open(out_m / "manifest.json", encoding="utf-8") as fh:
            res = json.load(fh)["results"]["multiclass"]
        assert res["aggregated"]["macro_f"] >= 0.70
        # the report has one row per class plus micro and macro rows
        import csv as _csv

        with open(out_m / "report.csv", newline="", encoding="utf-8") as fh:
            rows = list(_csv.reader(fh))
        names = [r[0] for r in rows[1:]]
        assert names == ["sexual", "racial", "appearance", "intellectual",
                         "political", "nonharassing", "micro", "macro"]


# ---------------------------------------------------------------------------
# 8. corpus-conditional checks (optional)


def test_criterion_8_authors_corpus(capsys, tmp_path):
    with criterion(capsys, 8, "published-corpus reference scores "
                              "(set HARLEX_AUTHORS_CORPUS to enable)"):
        corpus_path = os.environ.get("HARLEX_AUTHORS_CORPUS")
        if not corpus_path:
            pytest.skip("HARLEX_AUTHORS_CORPUS not set; reference corpus absent")
        base = ["cv", "--corpus", corpus_path, "--spec", "F(S)+W(S)",
                "--dim", "50", "--learner", "gbm", "--seed", "7"]
        out_b = tmp_path / "binary"
        assert main(base + ["--task", "combined-binary",
                            "--out-dir", str(out_b)]) == 0
        with open(out_b / "manifest.json", encoding="utf-8") as fh:
            res = json.load(fh)["results"]["combined-binary"]["aggregated"]
        assert abs(res["f_score"] - 0.88) <= 0.05
        assert abs(res["specificity"] - 0.83) <= 0.07

        out_m = tmp_path / "multi"
        assert main(base + ["--task", "multiclass", "--k", "5", "--repeats", "5",
                            "--out-dir", str(out_m)]) == 0
        with open(out_m / "manifest.json", encoding="utf-8") as fh:
            res = json.load(fh)["results"]["multiclass"]["aggregated"]
        assert abs(res["micro_f"] - 0.92) <= 0.05


# ---------------------------------------------------------------------------
# 9. determinism and persistence


def _run_twice(argv_tail, tmp_path, tag):
    """Run a command into two output dirs; all bytes but the manifest
    timestamp must agree."""
    dirs = []
    for rep in ("a", "b"):
        out = tmp_path / f"{tag}_{rep}"
        assert main(argv_tail + ["--out-dir", str(out)]) == 0, argv_tail
        dirs.append(out)
    a, b = dirs
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for name in names:
        pa, pb = (a / name).read_bytes(), (b / name).read_bytes()
        if name == "manifest.json":
            ma, mb = json.loads(pa), json.loads(pb)
            ma.pop("created"), mb.pop("created")
            assert ma == mb, f"{tag}: manifest differs beyond timestamp"
        else:
            assert pa == pb, f"{tag}: {name} differs between replays"
    return a


def test_criterion_9_determinism_and_persistence(capsys, tmp_path,
                                                 fixture_corpus_path,
                                                 votes_corpus_path,
                                                 lexicon_path, stoplist_path):
    with criterion(capsys, 9, "byte-identical CLI replays for every command; "
                              "save/load bit-exact on 100 random inputs"):
        fx, lx = str(fixture_corpus_path), str(lexicon_path)
        _run_twice(["stats", "--corpus", fx], tmp_path, "stats")
        _run_twice(["kappa", "--corpus", str(votes_corpus_path)], tmp_path, "kappa")
        _run_twice(["freq", "--corpus", fx, "--stoplist", str(stoplist_path),
                    "--k", "10"], tmp_path, "freq")
        _run_twice(["analyze", "--corpus", fx, "--lexicon", lx,
                    "--stoplist", str(stoplist_path)], tmp_path, "analyze")
        emb = _run_twice(["embed-train", "--corpus", fx, "--mode", "skipgram",
                          "--level", "word", "--dim", "8", "--epochs", "1",
                          "--min-count", "5", "--embed-seed", "1"],
                         tmp_path, "embed")
        _run_twice(["project2d", "--embeddings", str(emb / "embeddings.txt"),
                    "--tokens", "loser,idiot,friend,lovely"],
                   tmp_path, "project")
        _run_twice(["vectorize", "--corpus", fx, "--lexicon", lx,
                    "--spec", "T+L"], tmp_path, "vectorize")
        trained = _run_twice(["train", "--corpus", fx, "--lexicon", lx,
                              "--spec", "T+L", "--task", "combined-binary",
                              "--learner", "gbm", "--learner-opt", "n_trees=5",
                              "--seed", "7"], tmp_path, "train")
        _run_twice(["predict", "--model", str(trained / "model.json"),
                    "--corpus", str(trained / "training_corpus.csv")],
                   tmp_path, "predict")
        _run_twice(["transfer", "--model", str(trained / "model.json"),
                    "--corpus", str(trained / "training_corpus.csv")],
                   tmp_path, "transfer")
        cv = _run_twice(["cv", "--corpus", fx, "--lexicon", lx, "--spec", "T+L",
                         "--learner", "nb_gaussian", "--task", "combined-binary",
                         "--k", "2", "--repeats", "1", "--seed", "5"],
                        tmp_path, "cv")
        _run_twice(["report", "--input", str(cv / "report.csv")],
                   tmp_path, "report")

        # model persistence: predictions identical bit for bit on 100 inputs
        rng = np.random.default_rng(109)
        X = rng.standard_normal((60, 6))
        y = (X[:, 0] > 0).astype(int)
        Q = rng.standard_normal((100, 6))
        models = [
            train_nb(np.abs(X), y),
            train_nb(X, y, variant="gaussian"),
            train_knn(X, y, k=5),
            train_svm(X, y, epochs=5),
            train_gbm(X, y, GbmConfig(n_trees=10)),
        ]
        for i, model in enumerate(models):
            path = tmp_path / f"persist_{i}.json"
            save_model(model, path)
            back, _ = load_model(path)
            Qi = np.abs(Q) if model.kind == "nb_multinomial" else Q
            a = predict(model, Qi)
            b = predict(back, Qi)
            assert np.array_equal(a.labels, b.labels)
            assert np.array_equal(a.scores, b.scores)
