"""TFIDF vectors and combination of feature blocks into one matrix.

Feature blocks follow the table notation used throughout the reports:
``T`` (unigram TFIDF), ``L`` (lexicon percentage vector), ``W(S)`` /
``W(C)`` (word-level skip-gram / CBOW embeddings), ``F(S)`` / ``F(C)``
(subword-level skip-gram / CBOW).  A FeatureSpec is a ``+``-joined list
of blocks, e.g. ``"F(S)+W(S)"``.  Blocks are computed independently,
column-standardized over the fitting corpus, and concatenated.
"""

from __future__ import annotations

import math
import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .corpus import Corpus
from .errors import ConfigError, DataError
from .lexicon import CategoryLexicon, liwc_vector
from .embeddings import EmbeddingTable, compose_tweet
from .serialize import pack_array, unpack_array
from .text import TokenStream, tokenize

__all__ = [
    "TfidfModel",
    "FeatureSpec",
    "FeatureMatrix",
    "FeatureResources",
    "FeatureBuilder",
    "EmptyCorpusError",
    "MissingResourceError",
    "DimensionMismatchError",
    "UnknownBlockError",
    "DuplicateBlockError",
    "EmptySpecError",
    "fit_tfidf",
    "transform_tfidf",
    "transform_tfidf_corpus",
    "parse_feature_spec",
    "parse_composition",
    "build_features",
    "builder_from_state",
    "save_matrix_csv",
    "save_matrix_binary",
    "load_matrix_binary",
]

VALID_BLOCKS = ("T", "L", "W(S)", "W(C)", "F(S)", "F(C)")
EMBEDDING_BLOCKS = ("W(S)", "W(C)", "F(S)", "F(C)")


class EmptyCorpusError(DataError):
    """An operation that fits on a corpus received an empty one."""


class MissingResourceError(ConfigError):
    """A feature block was requested without its fitted resource."""


class DimensionMismatchError(DataError):
    """Matrix width does not match what a fitted object expects."""


class UnknownBlockError(ConfigError):
    """Feature spec names a block outside the known set."""


class DuplicateBlockError(ConfigError):
    """Feature spec repeats a block."""


class EmptySpecError(ConfigError):
    """Feature spec contains no blocks."""


@dataclass(frozen=True)
class TfidfModel:
    """Unigram TFIDF weights fitted on a corpus.

    Column order is descending document frequency with lexicographic
    tie-break.  idf(t) = ln((1+N)/(1+df(t))) + 1, which is finite and
    positive for every in-vocabulary token.
    """

    vocabulary: dict
    idf: np.ndarray
    norm: str = "l2"
    fitted_on: Optional[str] = None

    def __len__(self) -> int:
        return len(self.idf)

    def tokens(self) -> list[str]:
        out = [""] * len(self.vocabulary)
        for t, i in self.vocabulary.items():
            out[i] = t
        return out


def fit_tfidf(corpus: Corpus, norm: str = "l2") -> TfidfModel:
    """Fit TFIDF on the word tokens of a corpus."""
    if len(corpus) == 0:
        raise EmptyCorpusError("cannot fit TFIDF on an empty corpus")
    if norm not in ("l2", "none"):
        raise ConfigError(f"unknown norm {norm!r}")
    df: dict[str, int] = {}
    for t in corpus:
        for tok in set(tokenize(t.text, t.id).words()):
            df[tok] = df.get(tok, 0) + 1
    ordered = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))
    vocabulary = {tok: i for i, (tok, _) in enumerate(ordered)}
    n = len(corpus)
    idf = np.array(
        [math.log((1 + n) / (1 + dfc)) + 1.0 for _, dfc in ordered], dtype=np.float64
    )
    return TfidfModel(vocabulary=vocabulary, idf=idf, norm=norm, fitted_on=corpus.source)


def transform_tfidf(model: TfidfModel, tweet: TokenStream) -> sp.csr_matrix:
    """TFIDF row vector (1 x |vocab|) for one tweet.

    Entry = in-tweet count x idf, L2-normalized when the model's norm is
    l2; out-of-vocabulary tokens are ignored.
    """
    counts: dict[int, float] = {}
    for tok in tweet.words():
        j = model.vocabulary.get(tok)
        if j is not None:
            counts[j] = counts.get(j, 0.0) + 1.0
    if not counts:
        return sp.csr_matrix((1, len(model)), dtype=np.float64)
    cols = sorted(counts)
    vals = np.array([counts[j] * model.idf[j] for j in cols], dtype=np.float64)
    if model.norm == "l2":
        nrm = float(np.sqrt(np.sum(vals * vals)))
        if nrm > 0:
            vals = vals / nrm
    return sp.csr_matrix(
        (vals, (np.zeros(len(cols), dtype=np.int64), np.array(cols, dtype=np.int64))),
        shape=(1, len(model)),
        dtype=np.float64,
    )


def transform_tfidf_corpus(model: TfidfModel, corpus: Corpus) -> sp.csr_matrix:
    """Stacked TFIDF rows for a whole corpus."""
    rows = [transform_tfidf(model, tokenize(t.text, t.id)) for t in corpus]
    return sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, len(model)))


@dataclass(frozen=True)
class FeatureSpec:
    """Ordered feature blocks plus the composition rule for embedding blocks.

    composition is "mean" or "concat_pad(N)" and applies to every
    embedding block in the spec.
    """

    blocks: tuple[str, ...]
    composition: str = "mean"

    def __str__(self) -> str:
        return "+".join(self.blocks)


def parse_composition(text: str) -> tuple[str, int]:
    """Parse a composition string into (strategy, pad_length)."""
    s = text.strip()
    if s == "mean":
        return "mean", 0
    m = re.fullmatch(r"concat_pad\((\d+)\)", s)
    if m:
        pad = int(m.group(1))
        if pad < 1:
            raise ConfigError("concat_pad length must be >= 1")
        return "concat", pad
    raise ConfigError(f"unknown composition {text!r}; use 'mean' or 'concat_pad(N)'")


def parse_feature_spec(text: str, composition: str = "mean") -> FeatureSpec:
    """Parse a '+'-joined block list exactly as printed in the result tables.

    Whitespace around block names is tolerated; block letters are
    case-sensitive.
    """
    parts = [p.strip() for p in text.split("+")]
    parts = [p for p in parts if p != ""]
    if not parts:
        raise EmptySpecError(f"no blocks in spec {text!r}")
    seen = set()
    for p in parts:
        if p not in VALID_BLOCKS:
            raise UnknownBlockError(f"unknown block {p!r}; valid: {', '.join(VALID_BLOCKS)}")
        if p in seen:
            raise DuplicateBlockError(f"block {p!r} repeated in spec {text!r}")
        seen.add(p)
    parse_composition(composition)  # validate early
    return FeatureSpec(blocks=tuple(parts), composition=composition)


@dataclass(frozen=True)
class FeatureResources:
    """Fitted inputs needed by feature blocks.

    tables maps embedding block names ("W(S)", "F(C)", ...) to trained
    embedding tables.
    """

    tfidf: Optional[TfidfModel] = None
    lexicon: Optional[CategoryLexicon] = None
    tables: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FeatureMatrix:
    """Dense feature rows aligned with tweet ids."""

    rows: np.ndarray
    row_ids: tuple[str, ...]
    spec: FeatureSpec
    block_offsets: tuple[tuple[str, int, int], ...]
    column_labels: tuple[str, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows.shape


class FeatureBuilder:
    """Fits per-block standardization on one corpus and reapplies it later.

    fit_transform computes each block, standardizes every column to zero
    mean and unit variance over the fitting corpus (constant columns map
    to zero), and concatenates blocks in spec order.  transform reuses the
    stored parameters, so held-out data never influences scaling.
    """

    def __init__(self, spec: FeatureSpec, resources: FeatureResources):
        for block in spec.blocks:
            if block == "T" and resources.tfidf is None:
                raise MissingResourceError("block T needs a fitted TFIDF model")
            if block == "L" and resources.lexicon is None:
                raise MissingResourceError("block L needs a category lexicon")
            if block in EMBEDDING_BLOCKS and block not in resources.tables:
                raise MissingResourceError(f"block {block} needs an embedding table")
        self.spec = spec
        self.resources = resources
        self.strategy, self.pad_length = parse_composition(spec.composition)
        self.means: Optional[list[np.ndarray]] = None
        self.scales: Optional[list[np.ndarray]] = None

    def _raw_block(self, block: str, corpus: Corpus) -> np.ndarray:
        if block == "T":
            return transform_tfidf_corpus(self.resources.tfidf, corpus).toarray()
        if block == "L":
            lex = self.resources.lexicon
            return np.stack(
                [liwc_vector(lex, tokenize(t.text, t.id)) for t in corpus]
            ) if len(corpus) else np.zeros((0, 1 + len(lex)))
        table: EmbeddingTable = self.resources.tables[block]
        dim = table.dim if self.strategy == "mean" else table.dim * self.pad_length
        if len(corpus) == 0:
            return np.zeros((0, dim))
        return np.stack([
            compose_tweet(table, tokenize(t.text, t.id), self.strategy, self.pad_length)
            for t in corpus
        ])

    def _labels(self) -> tuple[str, ...]:
        labels: list[str] = []
        for block in self.spec.blocks:
            if block == "T":
                labels += [f"T.{tok}" for tok in self.resources.tfidf.tokens()]
            elif block == "L":
                labels += ["L.word_count"] + [f"L.{n}" for n in self.resources.lexicon.names()]
            else:
                table = self.resources.tables[block]
                width = table.dim if self.strategy == "mean" else table.dim * self.pad_length
                labels += [f"{block}.{i}" for i in range(width)]
        return tuple(labels)

    def fit_transform(self, corpus: Corpus) -> FeatureMatrix:
        if len(corpus) == 0:
            raise EmptyCorpusError("cannot fit features on an empty corpus")
        raw = [self._raw_block(b, corpus) for b in self.spec.blocks]
        self.means = [r.mean(axis=0) for r in raw]
        self.scales = []
        parts = []
        for r, mu in zip(raw, self.means):
            sd = r.std(axis=0, ddof=0)
            inv = np.where(sd > 0, 1.0 / np.where(sd > 0, sd, 1.0), 0.0)
            self.scales.append(inv)
            parts.append((r - mu) * inv)
        return self._assemble(parts, corpus)

    def transform(self, corpus: Corpus) -> FeatureMatrix:
        if self.means is None:
            raise ConfigError("transform called before fit_transform")
        parts = []
        for block, mu, inv in zip(self.spec.blocks, self.means, self.scales):
            r = self._raw_block(block, corpus)
            if r.shape[1] != mu.shape[0]:
                raise DimensionMismatchError(
                    f"block {block}: got width {r.shape[1]}, fitted {mu.shape[0]}"
                )
            parts.append((r - mu) * inv)
        return self._assemble(parts, corpus)

    def _assemble(self, parts: list[np.ndarray], corpus: Corpus) -> FeatureMatrix:
        offsets = []
        start = 0
        for block, p in zip(self.spec.blocks, parts):
            offsets.append((block, start, start + p.shape[1]))
            start += p.shape[1]
        rows = np.concatenate(parts, axis=1) if parts else np.zeros((len(corpus), 0))
        if not np.all(np.isfinite(rows)):
            raise DataError("non-finite feature values produced")
        return FeatureMatrix(
            rows=rows,
            row_ids=tuple(t.id for t in corpus),
            spec=self.spec,
            block_offsets=tuple(offsets),
            column_labels=self._labels(),
        )

    def to_state(self) -> dict:
        """Serializable snapshot of the fitted builder, embedding tables included."""
        if self.means is None:
            raise ConfigError("builder not fitted")
        state: dict = {
            "spec": str(self.spec),
            "composition": self.spec.composition,
            "means": [pack_array(m) for m in self.means],
            "scales": [pack_array(s) for s in self.scales],
        }
        if self.resources.tfidf is not None:
            m = self.resources.tfidf
            state["tfidf"] = {
                "tokens": m.tokens(),
                "idf": pack_array(m.idf),
                "norm": m.norm,
                "fitted_on": m.fitted_on,
            }
        if self.resources.lexicon is not None:
            state["lexicon"] = [
                {"name": c.name, "patterns": list(c.patterns)}
                for c in self.resources.lexicon.categories
            ]
        tables = {}
        for block in self.spec.blocks:
            if block in EMBEDDING_BLOCKS:
                tables[block] = _table_state(self.resources.tables[block])
        if tables:
            state["tables"] = tables
        return state


def build_features(corpus: Corpus, spec: FeatureSpec,
                   resources: FeatureResources) -> FeatureMatrix:
    """One-shot fit_transform; the fitted builder is not retained."""
    return FeatureBuilder(spec, resources).fit_transform(corpus)


def _table_state(table: EmbeddingTable) -> dict:
    cfg = table.config
    state = {
        "tokens": list(table.vocab.tokens),
        "vectors": pack_array(table.input_vectors),
        "config": {
            "dim": cfg.dim, "window": cfg.window, "min_count": cfg.min_count,
            "mode": cfg.mode, "level": cfg.level, "n_min": cfg.n_min,
            "n_max": cfg.n_max, "bucket_count": cfg.bucket_count,
            "negatives": cfg.negatives, "epochs": cfg.epochs,
            "initial_lr": cfg.initial_lr, "subsample_t": cfg.subsample_t,
            "seed": cfg.seed,
        },
    }
    if table.subword_buckets is not None:
        sb = table.subword_buckets
        state["subword"] = {
            "bucket_ids": pack_array(sb.bucket_ids),
            "rows": pack_array(sb.rows),
            "bucket_count": sb.bucket_count,
        }
    return state


def _table_from_state(state: dict) -> EmbeddingTable:
    from .embeddings import EmbeddingConfig, Vocabulary, _SparseBuckets

    tokens = tuple(state["tokens"])
    vocab = Vocabulary(
        tokens=tokens,
        counts=np.ones(len(tokens), dtype=np.int64),
        index={t: i for i, t in enumerate(tokens)},
    )
    config = EmbeddingConfig(**state["config"])
    buckets = None
    if "subword" in state:
        sw = state["subword"]
        buckets = _SparseBuckets(
            unpack_array(sw["bucket_ids"]), unpack_array(sw["rows"]), sw["bucket_count"]
        )
    return EmbeddingTable(
        vocab=vocab, input_vectors=unpack_array(state["vectors"]),
        config=config, subword_buckets=buckets,
    )


def builder_from_state(state: dict) -> FeatureBuilder:
    """Rebuild a fitted FeatureBuilder from to_state output."""
    from .lexicon import Category, CategoryLexicon as Lexicon

    spec = parse_feature_spec(state["spec"], composition=state.get("composition", "mean"))
    tfidf = None
    if "tfidf" in state:
        t = state["tfidf"]
        tfidf = TfidfModel(
            vocabulary={tok: i for i, tok in enumerate(t["tokens"])},
            idf=unpack_array(t["idf"]),
            norm=t["norm"],
            fitted_on=t.get("fitted_on"),
        )
    lexicon = None
    if "lexicon" in state:
        lexicon = Lexicon(categories=tuple(
            Category(name=c["name"], patterns=tuple(c["patterns"]))
            for c in state["lexicon"]
        ))
    tables = {}
    for block, tstate in state.get("tables", {}).items():
        tables[block] = _table_from_state(tstate)
    builder = FeatureBuilder(spec, FeatureResources(tfidf=tfidf, lexicon=lexicon,
                                                    tables=tables))
    builder.means = [unpack_array(m) for m in state["means"]]
    builder.scales = [unpack_array(s) for s in state["scales"]]
    return builder


def save_matrix_csv(matrix: FeatureMatrix, path: Union[str, Path]) -> None:
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        labels = matrix.column_labels or tuple(
            f"c{i}" for i in range(matrix.rows.shape[1])
        )
        writer.writerow(["id"] + list(labels))
        for rid, row in zip(matrix.row_ids, matrix.rows):
            writer.writerow([rid] + [repr(float(x)) for x in row])


_MATRIX_MAGIC = b"HXFM"
_MATRIX_VERSION = 1


def save_matrix_binary(matrix: FeatureMatrix, path: Union[str, Path]) -> None:
    """Binary matrix: magic, version, row/column counts, row-major float64."""
    rows = np.ascontiguousarray(matrix.rows, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sHQQ", _MATRIX_MAGIC, _MATRIX_VERSION,
                             rows.shape[0], rows.shape[1]))
        fh.write(rows.tobytes())


def load_matrix_binary(path: Union[str, Path]) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, n, d = struct.unpack("<4sHQQ", fh.read(22))
        if magic != _MATRIX_MAGIC or version != _MATRIX_VERSION:
            raise DataError(f"{path}: not a feature matrix file")
        data = np.frombuffer(fh.read(8 * n * d), dtype="<f8")
    return data.reshape(n, d).astype(np.float64)
