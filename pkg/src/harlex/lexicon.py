"""Category lexicons, percentage vectors, effect sizes, word frequencies.

A category lexicon is an ordered list of named categories, each holding
literal tokens and/or prefix patterns (trailing ``*``).  Running a lexicon
over a tweet yields a dense vector of per-category match percentages with
a leading word count; comparing those vectors between harassing and
non-harassing groups yields per-feature effect sizes.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .corpus import Corpus, BinaryLabel, HarassmentType, filter_corpus
from .errors import DataError, NumericError
from .text import TokenStream, tokenize

__all__ = [
    "Category",
    "CategoryLexicon",
    "EffectSizeTable",
    "LexiconParseError",
    "DuplicateCategoryError",
    "BadPatternError",
    "EmptyGroupError",
    "ZeroVarianceError",
    "load_lexicon",
    "match",
    "liwc_vector",
    "effect_size",
    "effect_size_table",
    "frequent_words",
    "COMBINED",
]


class LexiconParseError(DataError):
    """Lexicon file line is not a section header, pattern, or comment."""


class DuplicateCategoryError(DataError):
    """Two lexicon sections share a name."""


class BadPatternError(DataError):
    """A pattern uses the wildcard anywhere but as its final character."""


class EmptyGroupError(DataError):
    """A requested comparison group contains no tweets."""


class ZeroVarianceError(NumericError):
    """Effect size undefined: zero spread but different group means."""


@dataclass(frozen=True)
class Category:
    name: str
    patterns: tuple[str, ...]


@dataclass(frozen=True)
class CategoryLexicon:
    """Ordered categories; order defines the layout of percentage vectors."""

    categories: tuple[Category, ...]

    def __len__(self) -> int:
        return len(self.categories)

    def names(self) -> list[str]:
        return [c.name for c in self.categories]


def load_lexicon(path: Union[str, Path]) -> CategoryLexicon:
    """Parse a category lexicon file.

    Format: UTF-8 text, ``[category]`` section headers, one pattern per
    line, ``#`` starts a comment, a trailing ``*`` marks a prefix
    wildcard.  The wildcard is only legal as the final character, so a
    literal containing ``*`` elsewhere (censored profanity) cannot be
    expressed; use a prefix pattern instead.
    """
    path = Path(path)
    categories: list[Category] = []
    seen: set[str] = set()
    current_name: Optional[str] = None
    current_patterns: list[str] = []

    def flush() -> None:
        if current_name is None:
            return
        if not current_patterns:
            raise LexiconParseError(f"{path}: category {current_name!r} has no patterns")
        categories.append(Category(current_name, tuple(current_patterns)))

    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("["):
                if not line.endswith("]") or len(line) < 3:
                    raise LexiconParseError(f"{path}:{lineno}: malformed section header {raw.strip()!r}")
                flush()
                current_name = line[1:-1].strip().lower()
                if not current_name:
                    raise LexiconParseError(f"{path}:{lineno}: empty category name")
                if current_name in seen:
                    raise DuplicateCategoryError(f"{path}:{lineno}: duplicate category {current_name!r}")
                seen.add(current_name)
                current_patterns = []
            else:
                if current_name is None:
                    raise LexiconParseError(f"{path}:{lineno}: pattern before any [category] header")
                pattern = line.lower()
                if "*" in pattern[:-1]:
                    raise BadPatternError(
                        f"{path}:{lineno}: wildcard only allowed as final character: {pattern!r}"
                    )
                current_patterns.append(pattern)
    flush()
    if not categories:
        raise LexiconParseError(f"{path}: no categories found")
    return CategoryLexicon(categories=tuple(categories))


@functools.lru_cache(maxsize=16)
def _compiled(lexicon: CategoryLexicon) -> list[tuple[frozenset, tuple[str, ...]]]:
    """Per category: (set of literals, tuple of wildcard stems)."""
    out = []
    for cat in lexicon.categories:
        literals = frozenset(p for p in cat.patterns if not p.endswith("*"))
        stems = tuple(p[:-1] for p in cat.patterns if p.endswith("*"))
        out.append((literals, stems))
    return out


def match(lexicon: CategoryLexicon, token: str) -> set[int]:
    """Indices of every category matching a lowercase word token.

    A category matches when it holds a literal equal to the token or a
    prefix pattern whose stem is a prefix of the token.
    """
    hits: set[int] = set()
    for i, (literals, stems) in enumerate(_compiled(lexicon)):
        if token in literals or any(token.startswith(s) for s in stems):
            hits.add(i)
    return hits


def liwc_vector(lexicon: CategoryLexicon, tweet: TokenStream) -> np.ndarray:
    """Percentage-of-tokens vector for one tweet.

    Entry 0 is the word-token count; entry 1+i is 100 x (word tokens
    matching category i) / (total word tokens).  Empty streams give the
    zero vector.
    """
    words = tweet.words()
    vec = np.zeros(1 + len(lexicon), dtype=np.float64)
    vec[0] = len(words)
    if not words:
        return vec
    compiled = _compiled(lexicon)
    for w in words:
        for i, (literals, stems) in enumerate(compiled):
            if w in literals or any(w.startswith(s) for s in stems):
                vec[1 + i] += 1.0
    vec[1:] *= 100.0 / len(words)
    return vec


def effect_size(experimental: Sequence[float], control: Sequence[float],
                std_mode: str = "pooled") -> float:
    """Standardized mean difference (mean(experimental) - mean(control)) / std.

    std_mode selects the denominator: "pooled" (sample variances pooled
    with n1+n2-2 degrees of freedom, the Cohen's d convention and the
    default), "control" (control group sample std), or "population"
    (uncorrected std of the union of both groups).

    Raises ZeroVarianceError when the chosen std is zero but the means
    differ; returns 0.0 when the std is zero and the means are equal.
    """
    x = np.asarray(experimental, dtype=np.float64)
    y = np.asarray(control, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise DataError(f"both groups need >= 2 values, got {x.size} and {y.size}")
    mean_diff = float(np.mean(x) - np.mean(y))
    if std_mode == "pooled":
        s2 = ((x.size - 1) * np.var(x, ddof=1) + (y.size - 1) * np.var(y, ddof=1)) / (
            x.size + y.size - 2
        )
        std = math.sqrt(float(s2))
    elif std_mode == "control":
        std = float(np.std(y, ddof=1))
    elif std_mode == "population":
        std = float(np.std(np.concatenate([x, y]), ddof=0))
    else:
        raise DataError(f"unknown std_mode {std_mode!r}")
    if std == 0.0:
        if mean_diff == 0.0:
            return 0.0
        raise ZeroVarianceError(
            f"zero {std_mode} std with differing means ({mean_diff:+g})"
        )
    return mean_diff / std


COMBINED = "combined"

TypeColumn = Union[HarassmentType, str]


@dataclass(frozen=True)
class EffectSizeTable:
    """Per-feature, per-type effect sizes between harassing and non-harassing tweets."""

    feature_names: tuple[str, ...]
    column_names: tuple[str, ...]
    values: np.ndarray  # shape (features, columns)

    def save_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature"] + list(self.column_names))
            for i, name in enumerate(self.feature_names):
                writer.writerow([name] + [repr(float(v)) for v in self.values[i]])


def effect_size_table(corpus: Corpus, lexicon: CategoryLexicon,
                      types: Optional[Sequence[TypeColumn]] = None,
                      threshold: float = 0.5, prune: bool = False,
                      std_mode: str = "pooled") -> EffectSizeTable:
    """Effect size of every lexicon feature for each requested type column.

    For each column, the experimental group is the per-tweet percentage
    vectors of harassing tweets and the control group those of
    non-harassing tweets (of that type, or of the whole corpus for the
    "combined" column).  Feature rows are the leading word count plus one
    row per category.  A feature that is constant within both groups but
    differs between them gets +/-inf (unbounded separation).  With
    prune=True, rows with no column where |e| > threshold are dropped.
    """
    if types is None:
        types = list(HarassmentType) + [COMBINED]
    feature_names = ["word_count"] + lexicon.names()

    vectors = np.stack([liwc_vector(lexicon, tokenize(t.text, t.id)) for t in corpus])
    labels = corpus.labels()
    tweet_types = corpus.types()

    columns = []
    column_names = []
    for col in types:
        if isinstance(col, str) and col.lower() == COMBINED:
            sel = np.ones(len(corpus), dtype=bool)
            column_names.append(COMBINED)
            col_desc = COMBINED
        else:
            htype = col if isinstance(col, HarassmentType) else HarassmentType.from_string(str(col))
            sel = tweet_types == int(htype)
            column_names.append(str(htype))
            col_desc = str(htype)
        exp_rows = vectors[sel & (labels == int(BinaryLabel.HARASSING))]
        ctl_rows = vectors[sel & (labels == int(BinaryLabel.NONHARASSING))]
        if exp_rows.shape[0] == 0:
            raise EmptyGroupError(f"no harassing tweets for column {col_desc!r}")
        if ctl_rows.shape[0] == 0:
            raise EmptyGroupError(f"no non-harassing tweets for column {col_desc!r}")
        col_vals = np.empty(len(feature_names), dtype=np.float64)
        for fi in range(len(feature_names)):
            try:
                col_vals[fi] = effect_size(exp_rows[:, fi], ctl_rows[:, fi], std_mode=std_mode)
            except ZeroVarianceError:
                diff = float(np.mean(exp_rows[:, fi]) - np.mean(ctl_rows[:, fi]))
                col_vals[fi] = math.inf if diff > 0 else -math.inf
        columns.append(col_vals)

    values = np.stack(columns, axis=1)
    names = tuple(feature_names)
    if prune:
        keep = np.abs(values).max(axis=1) > threshold
        values = values[keep]
        names = tuple(n for n, k in zip(names, keep) if k)
    return EffectSizeTable(feature_names=names, column_names=tuple(column_names), values=values)


def frequent_words(corpus: Corpus, k: int,
                   stoplist: Optional[set[str]] = None) -> list[tuple[str, int]]:
    """Top-k word tokens by count, descending, ties broken lexicographically.

    Only word-like tokens count (mentions, URLs, numbers, symbols are
    excluded); stoplist tokens are dropped when a stoplist is given.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    counts: dict[str, int] = {}
    for t in corpus:
        for w in tokenize(t.text, t.id).words():
            if stoplist is not None and w in stoplist:
                continue
            counts[w] = counts.get(w, 0) + 1
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]
