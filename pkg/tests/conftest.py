"""Shared helpers: tiny corpus builders and bundled-data paths."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from harlex.corpus import BinaryLabel, Corpus, HarassmentType, LabeledTweet

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "harlex" / "data"


def tweet(i, text, type_=HarassmentType.SEXUAL, label=BinaryLabel.NONHARASSING,
          votes=None):
    return LabeledTweet(id=f"t{i}", text=text, type=type_, label=label, votes=votes)


def corpus_of(texts, labels=None, types=None) -> Corpus:
    labels = labels or [BinaryLabel.NONHARASSING] * len(texts)
    types = types or [HarassmentType.SEXUAL] * len(texts)
    tweets = tuple(
        tweet(i, t, type_=ty, label=la)
        for i, (t, la, ty) in enumerate(zip(texts, labels, types))
    )
    return Corpus(tweets=tweets, source="mem")


def random_texts(rng: np.random.Generator, n: int, vocab_size: int = 20,
                 length: tuple = (3, 9)) -> list:
    vocab = [f"w{c}" for c in range(vocab_size)]
    out = []
    for _ in range(n):
        k = int(rng.integers(length[0], length[1]))
        out.append(" ".join(rng.choice(vocab, size=k, replace=True)))
    return out


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def fixture_corpus_path(data_dir) -> Path:
    return data_dir / "fixture_240.csv"


@pytest.fixture(scope="session")
def votes_corpus_path(data_dir) -> Path:
    return data_dir / "fixture_votes.csv"


@pytest.fixture(scope="session")
def lexicon_path(data_dir) -> Path:
    return data_dir / "demo_categories.txt"


@pytest.fixture(scope="session")
def stoplist_path(data_dir) -> Path:
    return data_dir / "stopwords.txt"
