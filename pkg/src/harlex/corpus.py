"""Labeled tweet corpora: loading, annotation agreement, sampling, folds.

A corpus is an ordered, immutable collection of labeled tweets.  Each tweet
carries a harassment type (the topical category it was collected for), a
binary label (harassing / non-harassing), and optionally the three raw
annotator votes the label was derived from.
"""

from __future__ import annotations

import csv
import enum
import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional, Sequence, Union

import numpy as np

from .errors import DataError

__all__ = [
    "HarassmentType",
    "BinaryLabel",
    "AnnotationVote",
    "LabeledTweet",
    "Corpus",
    "FoldPlan",
    "MalformedRowError",
    "UnknownTypeError",
    "DuplicateIdError",
    "LengthMismatchError",
    "consensus_label",
    "cohen_kappa",
    "load_corpus",
    "save_corpus",
    "filter_corpus",
    "balanced_undersample",
    "make_folds",
    "corpus_digest",
]


class MalformedRowError(DataError):
    """A corpus row is structurally invalid or internally inconsistent."""


class UnknownTypeError(DataError):
    """A harassment type string is not one of the recognized categories."""


class DuplicateIdError(DataError):
    """Two corpus rows share the same id."""


class LengthMismatchError(DataError):
    """Two parallel sequences have different lengths."""


class HarassmentType(enum.IntEnum):
    """Topical category a tweet was collected and annotated under."""

    SEXUAL = 0
    RACIAL = 1
    APPEARANCE = 2
    INTELLECTUAL = 3
    POLITICAL = 4

    @classmethod
    def from_string(cls, s: str) -> "HarassmentType":
        key = s.strip().lower().replace("-related", "")
        try:
            return _TYPE_BY_NAME[key]
        except KeyError:
            raise UnknownTypeError(
                f"unknown harassment type {s!r}; expected one of "
                f"{sorted(_TYPE_BY_NAME)}"
            ) from None

    def __str__(self) -> str:
        return self.name.lower()


_TYPE_BY_NAME = {t.name.lower(): t for t in HarassmentType}


class BinaryLabel(enum.IntEnum):
    """Consensus label of a tweet."""

    NONHARASSING = 0
    HARASSING = 1

    @classmethod
    def from_string(cls, s: str) -> "BinaryLabel":
        key = s.strip().lower().replace("-", "").replace("_", "")
        if key == "harassing":
            return cls.HARASSING
        if key in ("nonharassing", "notharassing"):
            return cls.NONHARASSING
        raise MalformedRowError(f"unknown label {s!r}")

    def __str__(self) -> str:
        return self.name.lower()


class AnnotationVote(enum.IntEnum):
    """A single annotator's judgment on one tweet."""

    NO = 0
    YES = 1
    OTHER = 2

    @classmethod
    def from_string(cls, s: str) -> "AnnotationVote":
        key = s.strip().lower()
        try:
            return _VOTE_BY_NAME[key]
        except KeyError:
            raise MalformedRowError(f"unknown vote {s!r}") from None

    def __str__(self) -> str:
        return self.name.lower()


_VOTE_BY_NAME = {v.name.lower(): v for v in AnnotationVote}


def consensus_label(votes: Sequence[Union[AnnotationVote, str]]) -> Optional[BinaryLabel]:
    """Majority label from annotator votes.

    Two or more yes votes give HARASSING, two or more no votes give
    NONHARASSING, anything else (e.g. one yes, one no, one other) is
    undecidable and returns None.  Undecidable tweets are excluded from
    corpora at load time.
    """
    parsed = [v if isinstance(v, AnnotationVote) else AnnotationVote.from_string(v) for v in votes]
    if len(parsed) != 3:
        raise MalformedRowError(f"expected 3 votes, got {len(parsed)}")
    n_yes = sum(1 for v in parsed if v is AnnotationVote.YES)
    n_no = sum(1 for v in parsed if v is AnnotationVote.NO)
    if n_yes >= 2:
        return BinaryLabel.HARASSING
    if n_no >= 2:
        return BinaryLabel.NONHARASSING
    return None


def cohen_kappa(a: Sequence, b: Sequence) -> float:
    """Cohen's kappa agreement between two raters over the same items.

    kappa = (p_o - p_e) / (1 - p_e) where p_o is observed agreement and
    p_e is chance agreement from the raters' marginal distributions.
    Both raters constant on the same category gives 1.0 by convention.
    """
    if len(a) != len(b):
        raise LengthMismatchError(f"rater sequences differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n == 0:
        raise DataError("cannot compute kappa on zero items")
    categories = sorted(set(a) | set(b), key=str)
    index = {c: i for i, c in enumerate(categories)}
    ai = np.array([index[x] for x in a])
    bi = np.array([index[x] for x in b])
    p_o = float(np.mean(ai == bi))
    pa = np.bincount(ai, minlength=len(categories)) / n
    pb = np.bincount(bi, minlength=len(categories)) / n
    p_e = float(np.dot(pa, pb))
    if p_e == 1.0:
        return 1.0
    return (p_o - p_e) / (1.0 - p_e)


@dataclass(frozen=True)
class LabeledTweet:
    """One corpus item."""

    id: str
    text: str
    type: HarassmentType
    label: BinaryLabel
    votes: Optional[tuple[AnnotationVote, AnnotationVote, AnnotationVote]] = None


@dataclass(frozen=True)
class Corpus:
    """Immutable ordered collection of labeled tweets."""

    tweets: tuple[LabeledTweet, ...]
    source: Optional[str] = None

    def __len__(self) -> int:
        return len(self.tweets)

    def __iter__(self) -> Iterator[LabeledTweet]:
        return iter(self.tweets)

    def __getitem__(self, i: int) -> LabeledTweet:
        return self.tweets[i]

    def texts(self) -> list[str]:
        return [t.text for t in self.tweets]

    def labels(self) -> np.ndarray:
        return np.array([int(t.label) for t in self.tweets], dtype=np.int64)

    def types(self) -> np.ndarray:
        return np.array([int(t.type) for t in self.tweets], dtype=np.int64)

    def count(self, *, type: Optional[HarassmentType] = None,
              label: Optional[BinaryLabel] = None) -> int:
        n = 0
        for t in self.tweets:
            if type is not None and t.type is not type:
                continue
            if label is not None and t.label is not label:
                continue
            n += 1
        return n


_REQUIRED_COLUMNS = ("id", "text", "type")


def _build_tweet(row: dict, where: str, seen_ids: set) -> Optional[LabeledTweet]:
    """Validate one parsed row; returns None for undecidable-vote rows."""
    for col in _REQUIRED_COLUMNS:
        if row.get(col) is None:
            raise MalformedRowError(f"{where}: missing column {col!r}")
    tid = str(row["id"]).strip()
    if not tid:
        raise MalformedRowError(f"{where}: empty id")
    if tid in seen_ids:
        raise DuplicateIdError(f"{where}: duplicate id {tid!r}")
    text = str(row["text"])
    if not text.strip():
        raise MalformedRowError(f"{where}: empty text for id {tid!r}")
    htype = HarassmentType.from_string(str(row["type"]))

    raw_votes = row.get("votes")
    has_votes = raw_votes is not None and str(raw_votes).strip() != ""
    votes = None
    consensus = None
    if has_votes:
        parts = str(raw_votes).strip().split("|")
        if len(parts) != 3:
            raise MalformedRowError(
                f"{where}: votes must be three pipe-joined entries, got {raw_votes!r}"
            )
        votes = tuple(AnnotationVote.from_string(p) for p in parts)
        consensus = consensus_label(votes)

    if has_votes and consensus is None:
        return None  # undecidable: excluded, not an error
    raw_label = row.get("label")
    has_label = raw_label is not None and str(raw_label).strip() != ""
    if has_label:
        label = BinaryLabel.from_string(str(raw_label))
        if has_votes and consensus is not label:
            raise MalformedRowError(
                f"{where}: label {label} conflicts with vote consensus "
                f"{consensus} for id {tid!r}"
            )
    elif has_votes:
        label = consensus
    else:
        raise MalformedRowError(f"{where}: row {tid!r} has neither label nor votes")

    seen_ids.add(tid)
    return LabeledTweet(id=tid, text=text, type=htype, label=label, votes=votes)


def load_corpus(path: Union[str, Path], fmt: Optional[str] = None) -> Corpus:
    """Load a corpus from a CSV or TSV file.

    Header: id, text, type, label, and optionally a `votes` column holding
    three pipe-joined annotator votes (yes|no|other).  When votes are
    present the label may be omitted and is derived by consensus; rows
    whose votes reach no consensus are silently excluded.  A stated label
    that contradicts the vote consensus is an error.

    Args:
        path: file to read.
        fmt: "csv" or "tsv"; inferred from the suffix when None.

    Returns:
        Corpus in file order.
    """
    path = Path(path)
    if fmt is None:
        fmt = "tsv" if path.suffix.lower() == ".tsv" else "csv"
    if fmt not in ("csv", "tsv"):
        raise DataError(f"unknown corpus format {fmt!r}")
    delimiter = "\t" if fmt == "tsv" else ","

    tweets: list[LabeledTweet] = []
    seen: set = set()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        if reader.fieldnames is None:
            raise MalformedRowError(f"{path}: empty file")
        missing = [c for c in _REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise MalformedRowError(f"{path}: missing columns {missing}")
        for lineno, row in enumerate(reader, start=2):
            t = _build_tweet(row, f"{path}:{lineno}", seen)
            if t is not None:
                tweets.append(t)
    return Corpus(tweets=tuple(tweets), source=str(path))


def save_corpus(corpus: Corpus, path: Union[str, Path], fmt: Optional[str] = None) -> None:
    """Write a corpus as CSV/TSV, with a votes column when any tweet has votes."""
    path = Path(path)
    if fmt is None:
        fmt = "tsv" if path.suffix.lower() == ".tsv" else "csv"
    delimiter = "\t" if fmt == "tsv" else ","
    with_votes = any(t.votes is not None for t in corpus)
    fieldnames = list(_REQUIRED_COLUMNS) + ["label"] + (["votes"] if with_votes else [])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames, delimiter=delimiter)
        writer.writeheader()
        for t in corpus:
            row = {"id": t.id, "text": t.text, "type": str(t.type), "label": str(t.label)}
            if with_votes:
                row["votes"] = "|".join(str(v) for v in t.votes) if t.votes else ""
            writer.writerow(row)


def corpus_digest(corpus: Corpus) -> str:
    """Stable sha256 over the corpus content (ids, texts, types, labels, votes)."""
    h = hashlib.sha256()
    for t in corpus:
        votes = ",".join(str(v) for v in t.votes) if t.votes else ""
        rec = "\x1f".join([t.id, t.text, str(t.type), str(t.label), votes])
        h.update(rec.encode("utf-8"))
        h.update(b"\x1e")
    return h.hexdigest()


def filter_corpus(corpus: Corpus, *, type: Optional[HarassmentType] = None,
                  label: Optional[BinaryLabel] = None) -> Corpus:
    """Sub-corpus of tweets matching the given type and/or label, order kept."""
    kept = tuple(
        t for t in corpus
        if (type is None or t.type is type) and (label is None or t.label is label)
    )
    return Corpus(tweets=kept, source=corpus.source)


def balanced_undersample(corpus: Corpus, seed: int) -> Corpus:
    """Downsample the majority binary class to the minority class size.

    Sampling is without replacement using a seeded generator; surviving
    tweets keep their original corpus order.
    """
    idx_h = [i for i, t in enumerate(corpus) if t.label is BinaryLabel.HARASSING]
    idx_n = [i for i, t in enumerate(corpus) if t.label is BinaryLabel.NONHARASSING]
    if not idx_h or not idx_n:
        raise DataError("balanced_undersample requires both classes present")
    rng = np.random.default_rng(seed)
    if len(idx_h) > len(idx_n):
        keep_h = rng.choice(len(idx_h), size=len(idx_n), replace=False)
        kept = sorted([idx_h[i] for i in keep_h] + idx_n)
    else:
        keep_n = rng.choice(len(idx_n), size=len(idx_h), replace=False)
        kept = sorted(idx_h + [idx_n[i] for i in keep_n])
    return Corpus(tweets=tuple(corpus[i] for i in kept), source=corpus.source)


@dataclass(frozen=True)
class FoldPlan:
    """Stratified fold assignments for repeated k-fold cross-validation.

    assignments[r][i] is the fold (0..k-1) of item i in repeat r.
    """

    k: int
    repeats: int
    seed: int
    assignments: tuple = field(repr=False)

    def split(self, repeat: int, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """Train / test index arrays for one (repeat, fold) cell."""
        a = self.assignments[repeat]
        test = np.flatnonzero(a == fold)
        train = np.flatnonzero(a != fold)
        return train, test

    def iter_splits(self) -> Iterator[tuple[int, int, np.ndarray, np.ndarray]]:
        for r in range(self.repeats):
            for f in range(self.k):
                train, test = self.split(r, f)
                yield r, f, train, test


def make_folds(labels: Sequence, k: int, repeats: int, seed: int) -> FoldPlan:
    """Build a stratified repeated k-fold plan.

    Within every repeat, items of each class are shuffled and dealt onto
    folds from a running round-robin counter shared across classes, so per
    class and overall the fold sizes differ by at most one.  Each repeat
    reshuffles with a generator seeded by (seed, repeat).

    Args:
        labels: per-item class labels used for stratification.
        k: number of folds, 2 <= k <= len(labels).
        repeats: how many independent fold assignments to produce.
        seed: base seed; the plan is a pure function of (labels, k, repeats, seed).
    """
    n = len(labels)
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if k > n:
        raise DataError(f"k={k} exceeds number of items {n}")
    if repeats < 1:
        raise DataError(f"repeats must be >= 1, got {repeats}")
    try:
        classes = sorted(set(labels))
    except TypeError:
        classes = sorted(set(labels), key=str)
    by_class = {c: [i for i, y in enumerate(labels) if y == c] for c in classes}

    assignments = []
    for r in range(repeats):
        rng = np.random.default_rng([seed, r])
        a = np.empty(n, dtype=np.int64)
        counter = int(rng.integers(k))
        for c in classes:
            members = np.array(by_class[c], dtype=np.int64)
            members = members[rng.permutation(len(members))]
            for j, i in enumerate(members):
                a[i] = (counter + j) % k
            counter += len(members)
        assignments.append(a)
    return FoldPlan(k=k, repeats=repeats, seed=seed, assignments=tuple(assignments))
