"""Skip-gram and CBOW embeddings with negative sampling, word or subword level.

Training is plain SGD over (predictor, target) pairs inside a fixed
context window.  At word level every vocabulary token owns one input
vector; at subword level a token's input vector is the mean of hashed
character n-gram bucket vectors (including the whole wrapped token), so
vectors exist for unseen words too.  Training is strictly sequential and
bit-reproducible for a fixed seed; there is no parallel mode.

Memory note: the subword bucket matrix is bucket_count x dim float64,
so the default 2,000,000 buckets at dim 300 is several GB; pick a small
bucket_count for desk-scale corpora.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np
from scipy.special import expit

from .errors import ConfigError, DataError
from .text import TokenStream, character_ngrams

__all__ = [
    "EmbeddingConfig",
    "Vocabulary",
    "EmbeddingTable",
    "EmptyVocabularyError",
    "TooFewPointsError",
    "build_vocab",
    "train",
    "word_vector",
    "compose_tweet",
    "project_2d",
    "save_table",
    "load_table",
    "negative_sampling_loss",
    "negative_sampling_grads",
    "fnv1a_64",
]


class EmptyVocabularyError(DataError):
    """No token met the minimum count."""


class TooFewPointsError(DataError):
    """2D projection needs at least two resolvable tokens."""


@dataclass(frozen=True)
class EmbeddingConfig:
    """Hyperparameters for embedding training.

    level is "word" or "subword"; the n-gram range and bucket count only
    apply at subword level.  subsample_t > 0 enables frequent-token
    subsampling with that threshold (off by default).
    """

    dim: int = 300
    window: int = 3
    min_count: int = 10
    mode: str = "skipgram"  # or "cbow"
    level: str = "word"  # or "subword"
    n_min: int = 3
    n_max: int = 6
    bucket_count: int = 2_000_000
    negatives: int = 5
    epochs: int = 5
    initial_lr: float = 0.025
    subsample_t: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.min_count < 1 or self.negatives < 1:
            raise ConfigError("dim, window, min_count, negatives must all be >= 1")
        if self.mode not in ("skipgram", "cbow"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.level not in ("word", "subword"):
            raise ConfigError(f"unknown level {self.level!r}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not (1 <= self.n_min <= self.n_max):
            raise ConfigError("need 1 <= n_min <= n_max")
        if self.bucket_count < 1:
            raise ConfigError("bucket_count must be >= 1")


@dataclass(frozen=True)
class Vocabulary:
    """Tokens kept for training, ordered by descending count then lexicographically."""

    tokens: tuple[str, ...]
    counts: np.ndarray = field(repr=False)
    index: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


def _sentence_tokens(sentence: Union[TokenStream, Sequence[str]]) -> list[str]:
    if isinstance(sentence, TokenStream):
        return sentence.surfaces()
    return list(sentence)


def build_vocab(sentences: Iterable[Union[TokenStream, Sequence[str]]],
                min_count: int) -> Vocabulary:
    """Count tokens and keep those occurring at least min_count times.

    Index order is descending count with lexicographic tie-break, so the
    layout is a pure function of the corpus.
    """
    counts: dict[str, int] = {}
    for sentence in sentences:
        for tok in _sentence_tokens(sentence):
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(
        ((t, c) for t, c in counts.items() if c >= min_count),
        key=lambda kv: (-kv[1], kv[0]),
    )
    if not kept:
        raise EmptyVocabularyError(
            f"no token reached min_count={min_count} over {len(counts)} distinct tokens"
        )
    tokens = tuple(t for t, _ in kept)
    arr = np.array([c for _, c in kept], dtype=np.int64)
    return Vocabulary(tokens=tokens, counts=arr, index={t: i for i, t in enumerate(tokens)})


def fnv1a_64(s: str) -> int:
    """64-bit FNV-1a hash of a string's UTF-8 bytes."""
    h = 0xCBF29CE484222325
    for b in s.encode("utf-8"):
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def _gram_buckets(token: str, n_min: int, n_max: int, bucket_count: int) -> np.ndarray:
    grams = character_ngrams(token, n_min, n_max)
    return np.array([fnv1a_64(g) % bucket_count for g in grams], dtype=np.int64)


@dataclass
class EmbeddingTable:
    """Trained embeddings.  Treat as immutable after training/loading.

    input_vectors holds one row per vocabulary token (at subword level the
    precomputed bucket means).  loss_history is the mean probe-batch loss
    after each epoch.
    """

    vocab: Vocabulary
    input_vectors: np.ndarray
    config: EmbeddingConfig
    subword_buckets: Optional[np.ndarray] = None
    output_vectors: Optional[np.ndarray] = field(default=None, repr=False)
    loss_history: tuple = ()

    def __post_init__(self):
        self._subword_cache: dict[str, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.input_vectors.shape[1]


def log_sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable log(sigmoid(x))."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x >= 0, -np.log1p(np.exp(-x)), x - np.log1p(np.exp(x)))


def negative_sampling_loss(v: np.ndarray, u_pos: np.ndarray, u_neg: np.ndarray) -> float:
    """Loss for one (predictor, target) pair with a fixed negative set.

    L = -log sigmoid(u_pos . v) - sum_j log sigmoid(-u_neg_j . v)
    """
    pos = float(log_sigmoid(np.dot(u_pos, v)))
    neg = float(np.sum(log_sigmoid(-(u_neg @ v)))) if len(u_neg) else 0.0
    return -(pos + neg)


def negative_sampling_grads(v: np.ndarray, u_pos: np.ndarray,
                            u_neg: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Analytic gradients of negative_sampling_loss wrt (v, u_pos, u_neg)."""
    s_pos = float(expit(np.dot(u_pos, v)))
    dv = (s_pos - 1.0) * u_pos
    du_pos = (s_pos - 1.0) * v
    if len(u_neg):
        s_neg = expit(u_neg @ v)  # shape (k,)
        dv = dv + s_neg @ u_neg
        du_neg = np.outer(s_neg, v)
    else:
        du_neg = np.zeros_like(u_neg)
    return dv, du_pos, du_neg


def _noise_cdf(counts: np.ndarray) -> np.ndarray:
    weights = counts.astype(np.float64) ** 0.75
    return np.cumsum(weights / weights.sum())


def train(sentences: Iterable[Union[TokenStream, Sequence[str]]],
          config: EmbeddingConfig) -> EmbeddingTable:
    """Train an embedding table with sequential, seeded SGD.

    Skip-gram predicts each context token from the center token; CBOW
    predicts the center token from the mean of its context tokens'
    input vectors.  Negatives are drawn from the unigram^(3/4)
    distribution; draws that hit the positive target are skipped.  The
    learning rate decays linearly per center position to 1e-4 of its
    initial value.
    """
    sentences = [_sentence_tokens(s) for s in sentences]
    vocab = build_vocab(sentences, config.min_count)
    V, dim = len(vocab), config.dim
    rng = np.random.default_rng(config.seed)

    subword = config.level == "subword"
    if subword:
        grams = [
            _gram_buckets(t, config.n_min, config.n_max, config.bucket_count)
            for t in vocab.tokens
        ]
        used = sorted(set(int(b) for g in grams for b in g))
        # allocate only rows that can ever be touched, keyed by dense position
        dense = {b: i for i, b in enumerate(used)}
        gram_rows = [np.array([dense[int(b)] for b in g], dtype=np.int64) for g in grams]
        inputs = (rng.random((len(used), dim)) - 0.5) / dim
        bucket_ids = np.array(used, dtype=np.int64)
    else:
        gram_rows = None
        bucket_ids = None
        inputs = (rng.random((V, dim)) - 0.5) / dim
    # output rows start as a copy of each word's composed input vector:
    # with zero-init outputs, first-order co-occurrence never reaches the
    # input space, so directly co-occurring words would not end up similar
    if subword:
        outputs = np.stack([inputs[g].mean(axis=0) for g in gram_rows])
    else:
        outputs = inputs.copy()

    encoded = [
        np.array([vocab.index[t] for t in s if t in vocab.index], dtype=np.int64)
        for s in sentences
    ]
    encoded = [s for s in encoded if len(s) > 0]
    cdf = _noise_cdf(vocab.counts)

    keep_prob = None
    if config.subsample_t > 0:
        freq = vocab.counts / vocab.counts.sum()
        ratio = config.subsample_t / freq
        keep_prob = np.minimum(1.0, np.sqrt(ratio) + ratio)

    def input_of(word: int) -> np.ndarray:
        if subword:
            return inputs[gram_rows[word]].mean(axis=0)
        return inputs[word]

    def apply_input_grad(word: int, grad: np.ndarray) -> None:
        if subword:
            rows = gram_rows[word]
            np.add.at(inputs, rows, -grad / len(rows))
        else:
            inputs[word] -= grad

    # fixed probe batch for the per-epoch loss history
    probe_rng = np.random.default_rng([config.seed, 1_000_003])
    probe: list[tuple[tuple, int, np.ndarray]] = []
    for sent in encoded:
        for pos in range(len(sent)):
            lo, hi = max(0, pos - config.window), min(len(sent), pos + config.window + 1)
            ctx = [int(sent[i]) for i in range(lo, hi) if i != pos]
            if not ctx:
                continue
            if config.mode == "skipgram":
                for c in ctx:
                    probe.append(((int(sent[pos]),), c, _draw_negs(probe_rng, cdf, c, config.negatives)))
            else:
                probe.append((tuple(ctx), int(sent[pos]),
                              _draw_negs(probe_rng, cdf, int(sent[pos]), config.negatives)))
            if len(probe) >= 512:
                break
        if len(probe) >= 512:
            break

    def probe_loss() -> float:
        total = 0.0
        for in_words, target, negs in probe:
            h = input_of(in_words[0]) if len(in_words) == 1 else (
                np.mean([input_of(w) for w in in_words], axis=0))
            total += negative_sampling_loss(h, outputs[target], outputs[negs])
        return total / max(1, len(probe))

    total_centers = max(1, config.epochs * sum(len(s) for s in encoded))
    lr_floor = config.initial_lr * 1e-4
    processed = 0
    losses = []
    for _epoch in range(config.epochs):
        for sent in encoded:
            for pos in range(len(sent)):
                lr = max(lr_floor, config.initial_lr * (1.0 - processed / total_centers))
                processed += 1
                if keep_prob is not None and rng.random() >= keep_prob[sent[pos]]:
                    continue
                lo, hi = max(0, pos - config.window), min(len(sent), pos + config.window + 1)
                ctx = [int(sent[i]) for i in range(lo, hi) if i != pos]
                if not ctx:
                    continue
                center = int(sent[pos])
                if config.mode == "skipgram":
                    v = input_of(center)
                    for c in ctx:
                        negs = _draw_negs(rng, cdf, c, config.negatives)
                        dv, du_pos, du_neg = negative_sampling_grads(v, outputs[c], outputs[negs])
                        outputs[c] -= lr * du_pos
                        if len(negs):
                            np.add.at(outputs, negs, -lr * du_neg)
                        apply_input_grad(center, lr * dv)
                        v = input_of(center)
                else:
                    h = np.mean([input_of(w) for w in ctx], axis=0)
                    negs = _draw_negs(rng, cdf, center, config.negatives)
                    dv, du_pos, du_neg = negative_sampling_grads(h, outputs[center], outputs[negs])
                    outputs[center] -= lr * du_pos
                    if len(negs):
                        np.add.at(outputs, negs, -lr * du_neg)
                    for w in ctx:
                        apply_input_grad(w, lr * dv / len(ctx))
        losses.append(probe_loss())

    if subword:
        word_vecs = np.stack([inputs[g].mean(axis=0) for g in gram_rows])
        full = _SparseBuckets(bucket_ids, inputs, config.bucket_count)
        table = EmbeddingTable(vocab=vocab, input_vectors=word_vecs, config=config,
                               subword_buckets=full, output_vectors=outputs,
                               loss_history=tuple(losses))
    else:
        table = EmbeddingTable(vocab=vocab, input_vectors=inputs, config=config,
                               output_vectors=outputs, loss_history=tuple(losses))
    return table


def _draw_negs(rng: np.random.Generator, cdf: np.ndarray, positive: int, k: int) -> np.ndarray:
    # clip guards the case where a draw lands above the float cdf's last entry
    draws = np.minimum(np.searchsorted(cdf, rng.random(k)), len(cdf) - 1)
    return draws[draws != positive]


class _SparseBuckets:
    """Bucket matrix storing only rows ever touched by the training vocab.

    Rows absent from the trained set read as zero vectors, matching what
    dense allocation would have produced for never-updated buckets.
    """

    def __init__(self, bucket_ids: np.ndarray, rows: np.ndarray, bucket_count: int):
        self.bucket_ids = bucket_ids
        self.rows = rows
        self.bucket_count = bucket_count
        self._pos = {int(b): i for i, b in enumerate(bucket_ids)}

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def lookup(self, buckets: np.ndarray) -> np.ndarray:
        out = np.zeros((len(buckets), self.dim), dtype=np.float64)
        for i, b in enumerate(buckets):
            j = self._pos.get(int(b))
            if j is not None:
                out[i] = self.rows[j]
        return out


def word_vector(table: EmbeddingTable, token: str) -> Optional[np.ndarray]:
    """Vector for one token, or None when the table cannot resolve it.

    Word level: vocabulary lookup.  Subword level: mean of the token's
    n-gram bucket vectors, well-defined for any string.
    """
    if table.config.level == "subword" and table.subword_buckets is not None:
        cached = table._subword_cache.get(token)
        if cached is not None:
            return cached
        cfg = table.config
        buckets = _gram_buckets(token, cfg.n_min, cfg.n_max, table.subword_buckets.bucket_count)
        vec = table.subword_buckets.lookup(buckets).mean(axis=0)
        table._subword_cache[token] = vec
        return vec
    idx = table.vocab.index.get(token)
    if idx is None:
        return None
    return table.input_vectors[idx]


def compose_tweet(table: EmbeddingTable, tweet: TokenStream,
                  strategy: str = "mean", pad_length: int = 30) -> np.ndarray:
    """Compose one tweet vector from its token vectors.

    "mean" averages the resolvable token vectors (zero vector when none
    resolve).  "concat" concatenates the first pad_length token vectors in
    order, zero-filling unresolvable tokens and padding the tail, for a
    fixed length pad_length * dim.
    """
    surfaces = tweet.surfaces()
    if strategy == "mean":
        vecs = [v for v in (word_vector(table, s) for s in surfaces) if v is not None]
        if not vecs:
            return np.zeros(table.dim, dtype=np.float64)
        return np.mean(vecs, axis=0)
    if strategy == "concat":
        if pad_length < 1:
            raise ConfigError("pad_length must be >= 1")
        out = np.zeros(pad_length * table.dim, dtype=np.float64)
        for i, s in enumerate(surfaces[:pad_length]):
            v = word_vector(table, s)
            if v is not None:
                out[i * table.dim:(i + 1) * table.dim] = v
        return out
    raise ConfigError(f"unknown composition strategy {strategy!r}")


def project_2d(table: EmbeddingTable, tokens: Sequence[str]) -> list[tuple[str, float, float]]:
    """Project selected token vectors onto their top-2 principal components.

    Coordinates are centered; tokens the table cannot resolve are skipped.
    """
    resolved = [(t, word_vector(table, t)) for t in tokens]
    resolved = [(t, v) for t, v in resolved if v is not None]
    if len(resolved) < 2:
        raise TooFewPointsError(f"need >= 2 resolvable tokens, got {len(resolved)}")
    X = np.stack([v for _, v in resolved])
    X = X - X.mean(axis=0)
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    k = min(2, s.size)
    coords = np.zeros((X.shape[0], 2), dtype=np.float64)
    coords[:, :k] = u[:, :k] * s[:k]
    # deterministic sign: make the largest-magnitude coordinate of each axis positive
    for j in range(k):
        col = coords[:, j]
        if col.any():
            lead = np.argmax(np.abs(col))
            if col[lead] < 0:
                coords[:, j] = -col
    return [(t, float(coords[i, 0]), float(coords[i, 1])) for i, (t, _) in enumerate(resolved)]


_SIDECAR_MAGIC = b"HXSB"
_SIDECAR_VERSION = 1


def save_table(table: EmbeddingTable, path: Union[str, Path]) -> None:
    """Write the table in word2vec text format: header `|V| dim`, then one
    token and its vector per line.  Floats use shortest exact repr, so a
    reload reproduces every vector bit for bit.  Subword tables add a
    binary bucket sidecar at <path>.buckets.
    """
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.vocab)} {table.dim}\n")
        for i, tok in enumerate(table.vocab.tokens):
            vals = " ".join(repr(float(x)) for x in table.input_vectors[i])
            fh.write(f"{tok} {vals}\n")
    if table.config.level == "subword" and table.subword_buckets is not None:
        sb = table.subword_buckets
        header = struct.pack(
            "<4sHBBII", _SIDECAR_MAGIC, _SIDECAR_VERSION,
            table.config.n_min, table.config.n_max, sb.bucket_count, table.dim,
        )
        with open(str(path) + ".buckets", "wb") as fh:
            fh.write(header)
            fh.write(struct.pack("<Q", len(sb.bucket_ids)))
            fh.write(sb.bucket_ids.astype("<i8").tobytes())
            fh.write(sb.rows.astype("<f8").tobytes())


def load_table(path: Union[str, Path]) -> EmbeddingTable:
    """Load a table written by save_table (with its sidecar when present)."""
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise DataError(f"{path}: malformed embedding header")
        V, dim = int(header[0]), int(header[1])
        tokens = []
        rows = np.empty((V, dim), dtype=np.float64)
        for i in range(V):
            parts = fh.readline().rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise DataError(f"{path}: line {i + 2} has {len(parts) - 1} values, expected {dim}")
            tokens.append(parts[0])
            rows[i] = [float(x) for x in parts[1:]]
    vocab = Vocabulary(
        tokens=tuple(tokens),
        counts=np.ones(V, dtype=np.int64),
        index={t: i for i, t in enumerate(tokens)},
    )
    sidecar = Path(str(path) + ".buckets")
    if sidecar.exists():
        with open(sidecar, "rb") as fh:
            head = fh.read(16)
            magic, version, n_min, n_max, bucket_count, sdim = struct.unpack("<4sHBBII", head)
            if magic != _SIDECAR_MAGIC or version != _SIDECAR_VERSION:
                raise DataError(f"{sidecar}: bad magic or version")
            if sdim != dim:
                raise DataError(f"{sidecar}: dim {sdim} does not match table dim {dim}")
            (n_rows,) = struct.unpack("<Q", fh.read(8))
            ids = np.frombuffer(fh.read(8 * n_rows), dtype="<i8").astype(np.int64)
            data = np.frombuffer(fh.read(8 * n_rows * dim), dtype="<f8").astype(np.float64)
        buckets = _SparseBuckets(ids, data.reshape(n_rows, dim), bucket_count)
        config = EmbeddingConfig(dim=dim, min_count=1, level="subword",
                                 n_min=n_min, n_max=n_max, bucket_count=bucket_count)
        return EmbeddingTable(vocab=vocab, input_vectors=rows, config=config,
                              subword_buckets=buckets)
    config = EmbeddingConfig(dim=dim, min_count=1, level="word")
    return EmbeddingTable(vocab=vocab, input_vectors=rows, config=config)
