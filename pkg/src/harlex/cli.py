"""Command-line entry point wiring the modules into end-to-end workflows.

Subcommands: stats, kappa, analyze, freq, embed-train, project2d,
vectorize, train, cv, predict, transfer, report.  Settings resolve with
precedence CLI > config file (TOML) > built-in defaults.  Commands that
write into an output directory take an exclusive lock file there and drop
a run manifest (JSON) describing inputs, settings, and outputs; the
manifest timestamp is the only non-deterministic byte in any artifact.

Exit codes: 0 ok, 2 configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .corpus import (
    BinaryLabel,
    Corpus,
    HarassmentType,
    balanced_undersample,
    cohen_kappa,
    corpus_digest,
    filter_corpus,
    load_corpus,
    make_folds,
    save_corpus,
)
from .classify import load_model, predict, save_model
from .errors import ConfigError, DataError, HarlexError, NumericError
from .embeddings import (
    EmbeddingConfig,
    load_table,
    project_2d,
    save_table,
    train as train_embeddings,
)
from .evaluate import cross_validate, emit_report, make_learner, transfer_evaluate
from .lexicon import COMBINED, effect_size_table, frequent_words, load_lexicon
from .text import tokenize
from .vectorize import (
    EMBEDDING_BLOCKS,
    FeatureBuilder,
    FeatureResources,
    builder_from_state,
    fit_tfidf,
    parse_feature_spec,
    save_matrix_binary,
    save_matrix_csv,
)

NONHARASSING_CLASS = 5  # multi-class code for the non-harassing class

_LOCK_NAME = ".harlex.lock"
_MANIFEST_NAME = "manifest.json"


# ---------------------------------------------------------------------------
# config plumbing


class Settings:
    """Layered lookup: CLI value if given, else config file, else default."""

    def __init__(self, config: dict, args: argparse.Namespace):
        self.config = config
        self.args = args

    def get(self, cli_name: str, section: str, key: str, default=None):
        value = getattr(self.args, cli_name, None)
        if value is not None:
            return value
        return self.config.get(section, {}).get(key, default)

    def require(self, cli_name: str, section: str, key: str, what: str):
        value = self.get(cli_name, section, key)
        if value is None:
            raise ConfigError(f"missing {what}: pass --{cli_name.replace('_', '-')} "
                              f"or set [{section}] {key} in the config file")
        return value


def _load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        with open(p, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None


class OutputDir:
    """Exclusive writer lock plus manifest bookkeeping for one directory."""

    def __init__(self, path: Path):
        self.path = path
        self.outputs: list[str] = []
        self._lock_fd: Optional[int] = None

    def __enter__(self) -> "OutputDir":
        self.path.mkdir(parents=True, exist_ok=True)
        lock = self.path / _LOCK_NAME
        try:
            self._lock_fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"output directory {self.path} is locked by another run "
                f"(remove {lock} if that run is dead)"
            ) from None
        return self

    def __exit__(self, *exc) -> None:
        if self._lock_fd is not None:
            os.close(self._lock_fd)
            os.unlink(self.path / _LOCK_NAME)

    def file(self, name: str) -> Path:
        self.outputs.append(name)
        return self.path / name

    def write_manifest(self, command: str, settings: dict, inputs: dict,
                       extra: Optional[dict] = None) -> None:
        manifest = {
            "tool": "harlex",
            "version": __version__,
            "command": command,
            "created": datetime.now(timezone.utc).isoformat(),
            "settings": settings,
            "inputs": inputs,
            "outputs": sorted(self.outputs),
        }
        if extra:
            manifest.update(extra)
        with open(self.path / _MANIFEST_NAME, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=1, sort_keys=True)
            fh.write("\n")


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# corpus task shaping


def _multiclass_view(corpus: Corpus, seed: int) -> tuple[Corpus, list[int]]:
    """Six-class corpus: five harassing type classes + sampled non-harassing.

    The non-harassing class is sampled (without replacement) down to the
    mean size of the five type classes, since keeping all of it would
    swamp the others.
    """
    harassing = [t for t in corpus if t.label is BinaryLabel.HARASSING]
    nonharassing = [t for t in corpus if t.label is BinaryLabel.NONHARASSING]
    if not harassing:
        raise DataError("multi-class task needs harassing tweets")
    type_sizes = [sum(1 for t in harassing if int(t.type) == c) for c in range(5)]
    present = [s for s in type_sizes if s > 0]
    target = max(1, int(round(float(np.mean(present)))))
    rng = np.random.default_rng([seed, 17])
    if len(nonharassing) > target:
        keep = sorted(rng.choice(len(nonharassing), size=target, replace=False).tolist())
        nonharassing = [nonharassing[i] for i in keep]
    tweets = tuple(harassing + nonharassing)
    labels = [int(t.type) for t in harassing] + [NONHARASSING_CLASS] * len(nonharassing)
    return Corpus(tweets=tweets, source=corpus.source), labels


def _class_display(code: int) -> str:
    if code == NONHARASSING_CLASS:
        return "nonharassing"
    return str(HarassmentType(code))


def _binary_display(code: int) -> str:
    return str(BinaryLabel(code))


# ---------------------------------------------------------------------------
# embedding resources


_BLOCK_MODE = {
    "W(S)": ("word", "skipgram"),
    "W(C)": ("word", "cbow"),
    "F(S)": ("subword", "skipgram"),
    "F(C)": ("subword", "cbow"),
}


def _parse_embedding_args(pairs: Optional[list[str]], config: dict) -> dict:
    """Block -> path mapping from repeated BLOCK=PATH flags and config."""
    mapping = dict(config.get("embeddings", {}))
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--embedding expects BLOCK=PATH, got {pair!r}")
        block, path = pair.split("=", 1)
        mapping[block.strip()] = path.strip()
    for block in mapping:
        if block not in _BLOCK_MODE:
            raise ConfigError(f"unknown embedding block {block!r}")
    return mapping


def _embedding_config(settings: Settings, level: str, mode: str) -> EmbeddingConfig:
    section = "embedding"
    return EmbeddingConfig(
        dim=int(settings.get("dim", section, "dim", 300)),
        window=int(settings.get("window", section, "window", 3)),
        min_count=int(settings.get("min_count", section, "min_count", 10)),
        mode=mode,
        level=level,
        n_min=int(settings.get("n_min", section, "n_min", 3)),
        n_max=int(settings.get("n_max", section, "n_max", 6)),
        bucket_count=int(settings.get("buckets", section, "buckets", 2_000_000)),
        negatives=int(settings.get("negatives", section, "negatives", 5)),
        epochs=int(settings.get("epochs", section, "epochs", 5)),
        initial_lr=float(settings.get("initial_lr", section, "initial_lr", 0.025)),
        subsample_t=float(settings.get("subsample_t", section, "subsample_t", 0.0)),
        seed=int(settings.get("embed_seed", section, "seed", 1)),
    )


def _resources_for_spec(spec, corpus: Corpus, settings: Settings,
                        emb_paths: dict, lexicon_path: Optional[str]) -> FeatureResources:
    """Load or train whatever the feature spec needs.

    Embedding blocks with a supplied path are loaded; blocks without one
    are trained on the input corpus with the [embedding] settings (the
    block letter fixes level and mode).
    """
    lexicon = None
    if "L" in spec.blocks:
        if lexicon_path is None:
            raise ConfigError("feature spec includes L: supply --lexicon")
        lexicon = load_lexicon(lexicon_path)
    tables = {}
    for block in spec.blocks:
        if block not in EMBEDDING_BLOCKS:
            continue
        if block in emb_paths:
            tables[block] = load_table(emb_paths[block])
        else:
            level, mode = _BLOCK_MODE[block]
            cfg = _embedding_config(settings, level, mode)
            sentences = [tokenize(t.text, t.id) for t in corpus]
            tables[block] = train_embeddings(sentences, cfg)
    return FeatureResources(lexicon=lexicon, tables=tables)


def _learner_from_settings(settings: Settings):
    kind = settings.get("learner", "learner", "kind", "gbm")
    params = {k: v for k, v in settings.config.get("learner", {}).items() if k != "kind"}
    for pair in getattr(settings.args, "learner_opt", None) or []:
        if "=" not in pair:
            raise ConfigError(f"--learner-opt expects KEY=VALUE, got {pair!r}")
        key, raw = pair.split("=", 1)
        params[key.strip()] = _parse_literal(raw.strip())
    seed = getattr(settings.args, "seed", None)
    if seed is not None and kind in ("gbm", "linear_svm") and "seed" not in params:
        params["seed"] = int(seed)
    return kind, params, make_learner(kind, **params)


def _parse_literal(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    rows = []
    for htype in HarassmentType:
        sub = filter_corpus(corpus, type=htype)
        h = sub.count(label=BinaryLabel.HARASSING)
        rows.append([str(htype), len(sub), h, len(sub) - h])
    h_all = corpus.count(label=BinaryLabel.HARASSING)
    rows.append(["combined", len(corpus), h_all, len(corpus) - h_all])
    header = ["type", "total", "harassing", "nonharassing"]
    out_dir = settings.get("out_dir", "paths", "output")
    table = [header] + rows
    for line in table:
        print(",".join(str(x) for x in line))
    if out_dir:
        with OutputDir(Path(out_dir)) as out:
            _write_csv(out.file("stats.csv"), header, rows)
            out.write_manifest("stats", {}, {"corpus": corpus.source,
                                             "corpus_sha256": corpus_digest(corpus)})
    return 0


def cmd_kappa(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    groups: list[tuple[str, Corpus]] = [(str(t), filter_corpus(corpus, type=t))
                                        for t in HarassmentType]
    groups.append(("combined", corpus))
    header = ["type", "kappa_12", "kappa_13", "kappa_23", "mean"]
    rows = []
    for name, sub in groups:
        voted = [t for t in sub if t.votes is not None]
        if not voted:
            rows.append([name, "", "", "", ""])
            continue
        raters = [[str(t.votes[i]) for t in voted] for i in range(3)]
        k12 = cohen_kappa(raters[0], raters[1])
        k13 = cohen_kappa(raters[0], raters[2])
        k23 = cohen_kappa(raters[1], raters[2])
        mean = (k12 + k13 + k23) / 3.0
        rows.append([name] + [f"{v:.4f}" for v in (k12, k13, k23, mean)])
    for line in [header] + rows:
        print(",".join(str(x) for x in line))
    out_dir = settings.get("out_dir", "paths", "output")
    if out_dir:
        with OutputDir(Path(out_dir)) as out:
            _write_csv(out.file("kappa.csv"), header, rows)
            out.write_manifest("kappa", {}, {"corpus": corpus.source,
                                             "corpus_sha256": corpus_digest(corpus)})
    return 0


def cmd_analyze(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    lexicon = load_lexicon(settings.require("lexicon", "paths", "lexicon", "lexicon path"))
    threshold = float(settings.get("threshold", "analyze", "threshold", 0.5))
    prune = bool(settings.get("prune", "analyze", "prune", False))
    std_mode = settings.get("std_mode", "analyze", "std_mode", "pooled")
    stoplist = _load_stoplist(settings.get("stoplist", "paths", "stoplist"))
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))
    with OutputDir(out_path) as out:
        table = effect_size_table(corpus, lexicon, threshold=threshold,
                                  prune=prune, std_mode=std_mode)
        table.save_csv(out.file("effects.csv"))
        for label, fname in ((BinaryLabel.HARASSING, "freq_harassing.csv"),
                             (BinaryLabel.NONHARASSING, "freq_nonharassing.csv")):
            sub = filter_corpus(corpus, label=label)
            top = frequent_words(sub, 25, stoplist) if len(sub) else []
            _write_csv(out.file(fname), ["token", "count"], top)
        out.write_manifest(
            "analyze",
            {"threshold": threshold, "prune": prune, "std_mode": std_mode},
            {"corpus": corpus.source, "corpus_sha256": corpus_digest(corpus)},
        )
    return 0


def _load_stoplist(path: Optional[str]) -> Optional[set]:
    if path is None:
        return None
    p = Path(path)
    if not p.exists():
        raise DataError(f"stoplist file not found: {p}")
    return {line.strip() for line in p.read_text(encoding="utf-8").splitlines()
            if line.strip()}


def cmd_freq(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    k = int(settings.get("k", "freq", "k", 25))
    stoplist = _load_stoplist(settings.get("stoplist", "paths", "stoplist"))
    label = settings.get("label", "freq", "label")
    htype = settings.get("type", "freq", "type")
    sub = filter_corpus(
        corpus,
        type=HarassmentType.from_string(htype) if htype else None,
        label=BinaryLabel.from_string(label) if label else None,
    )
    top = frequent_words(sub, k, stoplist)
    print("token,count")
    for tok, count in top:
        print(f"{tok},{count}")
    out_dir = settings.get("out_dir", "paths", "output")
    if out_dir:
        with OutputDir(Path(out_dir)) as out:
            _write_csv(out.file("freq.csv"), ["token", "count"], top)
            out.write_manifest("freq", {"k": k, "label": label, "type": htype},
                               {"corpus": corpus.source,
                                "corpus_sha256": corpus_digest(corpus)})
    return 0


def cmd_embed_train(settings: Settings) -> int:
    sentences_path = settings.get("sentences", "paths", "sentences")
    corpus_path = settings.get("corpus", "paths", "corpus")
    if sentences_path:
        lines = Path(sentences_path).read_text(encoding="utf-8").splitlines()
        sentences = [tokenize(line) for line in lines if line.strip()]
        source = str(sentences_path)
    elif corpus_path:
        corpus = load_corpus(corpus_path)
        sentences = [tokenize(t.text, t.id) for t in corpus]
        source = str(corpus_path)
    else:
        raise ConfigError("embed-train needs --corpus or --sentences")
    level = settings.get("level", "embedding", "level", "word")
    mode = settings.get("mode", "embedding", "mode", "skipgram")
    cfg = _embedding_config(settings, level, mode)
    table = train_embeddings(sentences, cfg)
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))
    with OutputDir(out_path) as out:
        target = out.file("embeddings.txt")
        save_table(table, target)
        if (out_path / "embeddings.txt.buckets").exists():
            out.outputs.append("embeddings.txt.buckets")
        out.write_manifest(
            "embed-train",
            {"dim": cfg.dim, "window": cfg.window, "min_count": cfg.min_count,
             "mode": cfg.mode, "level": cfg.level, "negatives": cfg.negatives,
             "epochs": cfg.epochs, "initial_lr": cfg.initial_lr, "seed": cfg.seed,
             "bucket_count": cfg.bucket_count if cfg.level == "subword" else None},
            {"sentences": source},
            extra={"vocab_size": len(table.vocab),
                   "probe_losses": list(table.loss_history)},
        )
    return 0


def cmd_project2d(settings: Settings) -> int:
    table = load_table(settings.require("embeddings", "paths", "embeddings",
                                        "embeddings path"))
    tokens_arg = settings.get("tokens", "project2d", "tokens")
    tokens_file = settings.get("tokens_file", "project2d", "tokens_file")
    if tokens_arg:
        tokens = [t.strip() for t in str(tokens_arg).split(",") if t.strip()]
    elif tokens_file:
        tokens = [line.strip() for line in Path(tokens_file).read_text(
            encoding="utf-8").splitlines() if line.strip()]
    else:
        raise ConfigError("project2d needs --tokens or --tokens-file")
    coords = project_2d(table, tokens)
    print("token,x,y")
    for tok, x, y in coords:
        print(f"{tok},{x!r},{y!r}")
    out_dir = settings.get("out_dir", "paths", "output")
    if out_dir:
        with OutputDir(Path(out_dir)) as out:
            _write_csv(out.file("projection.csv"), ["token", "x", "y"],
                       [[t, repr(x), repr(y)] for t, x, y in coords])
            out.write_manifest("project2d", {"tokens": tokens}, {})
    return 0


def _prepared_spec(settings: Settings):
    spec_text = settings.require("spec", "features", "spec", "feature spec")
    composition = settings.get("composition", "features", "composition", "mean")
    return parse_feature_spec(spec_text, composition=composition)


def cmd_vectorize(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    spec = _prepared_spec(settings)
    emb_paths = _parse_embedding_args(getattr(settings.args, "embedding", None),
                                      settings.config)
    resources = _resources_for_spec(spec, corpus, settings, emb_paths,
                                    settings.get("lexicon", "paths", "lexicon"))
    if "T" in spec.blocks:
        resources = FeatureResources(tfidf=fit_tfidf(corpus), lexicon=resources.lexicon,
                                     tables=resources.tables)
    builder = FeatureBuilder(spec, resources)
    matrix = builder.fit_transform(corpus)
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))
    binary = bool(settings.get("binary", "vectorize", "binary", False))
    with OutputDir(out_path) as out:
        if binary:
            save_matrix_binary(matrix, out.file("features.bin"))
        else:
            save_matrix_csv(matrix, out.file("features.csv"))
        out.write_manifest(
            "vectorize",
            {"spec": str(spec), "composition": spec.composition, "binary": binary},
            {"corpus": corpus.source, "corpus_sha256": corpus_digest(corpus)},
            extra={"shape": list(matrix.shape)},
        )
    return 0


def _task_corpus(settings: Settings, corpus: Corpus, task: str, seed: int):
    """Returns (corpus, labels, positive, display) for a task name."""
    if task == "combined-binary":
        balanced = balanced_undersample(corpus, seed)
        return balanced, balanced.labels().tolist(), int(BinaryLabel.HARASSING), _binary_display
    if task == "multiclass":
        view, labels = _multiclass_view(corpus, seed)
        return view, labels, None, _class_display
    raise ConfigError(f"unknown task {task!r}; use combined-binary, per-type, or multiclass")


def cmd_train(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    task = settings.get("task", "run", "task", "combined-binary")
    if task == "per-type":
        raise ConfigError("train supports combined-binary and multiclass; "
                          "per-type is a cv workflow")
    seed = int(settings.get("seed", "run", "seed", 0))
    spec = _prepared_spec(settings)
    work, labels, positive, display = _task_corpus(settings, corpus, task, seed)
    emb_paths = _parse_embedding_args(getattr(settings.args, "embedding", None),
                                      settings.config)
    resources = _resources_for_spec(spec, corpus, settings, emb_paths,
                                    settings.get("lexicon", "paths", "lexicon"))
    if "T" in spec.blocks:
        resources = FeatureResources(tfidf=fit_tfidf(work), lexicon=resources.lexicon,
                                     tables=resources.tables)
    builder = FeatureBuilder(spec, resources)
    X = builder.fit_transform(work)
    kind, params, learner = _learner_from_settings(settings)
    model = learner(X, labels)
    model = _with_metadata(model, seed=seed, corpus_sha256=corpus_digest(work), task=task)
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))
    with OutputDir(out_path) as out:
        save_model(model, out.file("model.json"), builder_state=builder.to_state())
        save_corpus(work, out.file("training_corpus.csv"))
        result = predict(model, X)
        _write_predictions(out.file("predictions.csv"), work, result, display)
        out.write_manifest(
            "train",
            {"task": task, "spec": str(spec), "composition": spec.composition,
             "learner": kind, "learner_params": params, "seed": seed},
            {"corpus": corpus.source, "corpus_sha256": corpus_digest(corpus)},
            extra={"training_rows": len(work)},
        )
    return 0


def _with_metadata(model, **kv):
    from dataclasses import replace

    meta = dict(model.metadata)
    meta.update(kv)
    return replace(model, metadata=meta)


def _write_predictions(path: Path, corpus: Corpus, result, display) -> None:
    header = ["id", "predicted"] + [f"score_{display(c)}" for c in result.label_space]
    rows = []
    for i, t in enumerate(corpus):
        rows.append([t.id, display(result.labels[i])]
                    + [repr(float(s)) for s in result.scores[i]])
    _write_csv(path, header, rows)


def _report_files(out: OutputDir, prefix: str, cv_result, display) -> dict:
    agg = cv_result.aggregated
    csv_text = emit_report(agg, "csv", name=prefix, label_names=display)
    md_text = emit_report(agg, "markdown", name=prefix, label_names=display)
    with open(out.file(f"{prefix}report.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    with open(out.file(f"{prefix}report.md"), "w", encoding="utf-8") as fh:
        fh.write(md_text)
    with open(out.file(f"{prefix}report_pooled.csv"), "w", encoding="utf-8") as fh:
        fh.write(emit_report(cv_result.pooled, "csv", name=prefix, label_names=display))

    fold_rows = []
    metric_names = (["precision", "recall", "f_score", "accuracy", "specificity"]
                    if agg.kind == "binary"
                    else ["micro_precision", "micro_recall", "micro_f",
                          "macro_precision", "macro_recall", "macro_f", "accuracy"])
    for (r, f), rep in zip(cv_result.fold_cells, cv_result.per_fold):
        row = [r, f] + [("" if getattr(rep, m) is None else repr(float(getattr(rep, m))))
                        for m in metric_names]
        fold_rows.append(row)
    _write_csv(out.file(f"{prefix}per_fold.csv"), ["repeat", "fold"] + metric_names,
               fold_rows)
    per_fold_manifest = [
        {"repeat": r, "fold": f,
         **{m: getattr(rep, m) for m in metric_names if getattr(rep, m) is not None}}
        for (r, f), rep in zip(cv_result.fold_cells, cv_result.per_fold)
    ]
    return {"aggregated": {m: getattr(agg, m) for m in metric_names
                           if getattr(agg, m) is not None},
            "pooled": {m: getattr(cv_result.pooled, m) for m in metric_names
                       if getattr(cv_result.pooled, m) is not None},
            "std": agg.std, "per_fold": per_fold_manifest}


def cmd_cv(settings: Settings) -> int:
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    task = settings.get("task", "run", "task", "combined-binary")
    seed = int(settings.get("seed", "run", "seed", 0))
    k = int(settings.get("k", "cv", "k", 10))
    repeats = int(settings.get("repeats", "cv", "repeats", 5))
    spec = _prepared_spec(settings)
    emb_paths = _parse_embedding_args(getattr(settings.args, "embedding", None),
                                      settings.config)
    resources = _resources_for_spec(spec, corpus, settings, emb_paths,
                                    settings.get("lexicon", "paths", "lexicon"))
    kind, params, learner = _learner_from_settings(settings)
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))

    with OutputDir(out_path) as out:
        summaries = {}
        if task == "per-type":
            for htype in HarassmentType:
                sub = filter_corpus(corpus, type=htype)
                if sub.count(label=BinaryLabel.HARASSING) == 0 or \
                        sub.count(label=BinaryLabel.NONHARASSING) == 0:
                    raise DataError(f"type {htype} lacks one of the binary classes")
                balanced = balanced_undersample(sub, seed)
                labels = balanced.labels().tolist()
                folds = make_folds(labels, k, repeats, seed)
                result = cross_validate(balanced, spec, learner, folds, labels=labels,
                                        resources=resources,
                                        positive=int(BinaryLabel.HARASSING))
                summaries[str(htype)] = _report_files(out, f"{htype}_", result,
                                                      _binary_display)
        else:
            work, labels, positive, display = _task_corpus(settings, corpus, task, seed)
            folds = make_folds(labels, k, repeats, seed)
            result = cross_validate(work, spec, learner, folds, labels=labels,
                                    resources=resources, positive=positive)
            summaries[task] = _report_files(out, "", result, display)
        out.write_manifest(
            "cv",
            {"task": task, "spec": str(spec), "composition": spec.composition,
             "learner": kind, "learner_params": params,
             "k": k, "repeats": repeats, "seed": seed},
            {"corpus": corpus.source, "corpus_sha256": corpus_digest(corpus)},
            extra={"results": summaries},
        )
    return 0


def cmd_predict(settings: Settings) -> int:
    model_path = settings.require("model", "paths", "model", "model path")
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    model, builder_state = load_model(model_path)
    if builder_state is None:
        raise DataError(f"{model_path} holds no feature builder; cannot vectorize")
    builder = builder_from_state(builder_state)
    X = builder.transform(corpus)
    result = predict(model, X)
    display = (_binary_display if model.metadata.get("task") == "combined-binary"
               else _class_display if model.metadata.get("task") == "multiclass"
               else str)
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))
    with OutputDir(out_path) as out:
        _write_predictions(out.file("predictions.csv"), corpus, result, display)
        out.write_manifest(
            "predict", {"model": str(model_path)},
            {"corpus": corpus.source, "corpus_sha256": corpus_digest(corpus)},
        )
    return 0


def cmd_transfer(settings: Settings) -> int:
    model_path = settings.require("model", "paths", "model", "model path")
    corpus = load_corpus(settings.require("corpus", "paths", "corpus", "corpus path"))
    model, builder_state = load_model(model_path)
    if builder_state is None:
        raise DataError(f"{model_path} holds no feature builder; cannot vectorize")
    builder = builder_from_state(builder_state)
    task = model.metadata.get("task", "combined-binary")
    seed = int(settings.get("seed", "run", "seed", 0))
    if task == "multiclass":
        work, labels = _multiclass_view(corpus, seed)
        display = _class_display
        positive = None
    else:
        work, labels = corpus, corpus.labels().tolist()
        display = _binary_display
        positive = int(BinaryLabel.HARASSING)
    report, proportions = transfer_evaluate(model, builder, work, labels=labels,
                                            positive=positive)
    out_path = Path(settings.require("out_dir", "paths", "output", "output directory"))
    with OutputDir(out_path) as out:
        with open(out.file("report.csv"), "w", encoding="utf-8") as fh:
            fh.write(emit_report(report, "csv", name=task, label_names=display))
        with open(out.file("report.md"), "w", encoding="utf-8") as fh:
            fh.write(emit_report(report, "markdown", name=task, label_names=display))
        _write_csv(out.file("proportions.csv"), ["class", "proportion"],
                   [[display(c), repr(float(p))] for c, p in proportions])
        out.write_manifest(
            "transfer", {"model": str(model_path), "task": task},
            {"corpus": corpus.source, "corpus_sha256": corpus_digest(corpus)},
        )
    return 0


def cmd_report(settings: Settings) -> int:
    """Re-render a saved report CSV as a 2-decimal markdown table."""
    src = Path(settings.require("input", "report", "input", "report CSV path"))
    if not src.exists():
        raise DataError(f"report file not found: {src}")
    with open(src, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{src}: empty report")
    header, body = rows[0], rows[1:]
    lines = ["| " + " | ".join(header) + " |",
             "|" + "---|" * len(header)]
    for row in body:
        cells = [row[0]] + [
            (f"{float(v):.2f}" if v not in ("", None) else "") for v in row[1:]
        ]
        lines.append("| " + " | ".join(cells) + " |")
    text = "\n".join(lines) + "\n"
    print(text, end="")
    out_dir = settings.get("out_dir", "paths", "output")
    if out_dir:
        with OutputDir(Path(out_dir)) as out:
            with open(out.file("report.md"), "w", encoding="utf-8") as fh:
                fh.write(text)
            out.write_manifest("report", {"input": str(src)}, {})
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "corpus" in names:
        p.add_argument("--corpus", help="corpus CSV/TSV path")
    if "lexicon" in names:
        p.add_argument("--lexicon", help="category lexicon path")
    if "out_dir" in names:
        p.add_argument("--out-dir", dest="out_dir", help="output directory")
    if "spec" in names:
        p.add_argument("--spec", help='feature spec, e.g. "F(S)+W(S)"')
        p.add_argument("--composition", help='embedding composition: mean | concat_pad(N)')
    if "seed" in names:
        p.add_argument("--seed", type=int, help="run seed")
    if "embedding" in names:
        p.add_argument("--embedding", action="append", metavar="BLOCK=PATH",
                       help="pre-trained embedding table for a block (repeatable)")
        for flag, typ in (("--dim", int), ("--window", int), ("--min-count", int),
                          ("--n-min", int), ("--n-max", int), ("--buckets", int),
                          ("--negatives", int), ("--epochs", int),
                          ("--initial-lr", float), ("--subsample-t", float),
                          ("--embed-seed", int)):
            p.add_argument(flag, type=typ, dest=flag[2:].replace("-", "_"))
    if "learner" in names:
        p.add_argument("--learner", help="nb_multinomial | nb_gaussian | knn | linear_svm | gbm")
        p.add_argument("--learner-opt", action="append", metavar="KEY=VALUE",
                       help="learner hyperparameter (repeatable)")
    if "task" in names:
        p.add_argument("--task", help="combined-binary | per-type | multiclass")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harlex",
        description="Harassment-language corpus analysis, embeddings, and classifiers.",
    )
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--version", action="version", version=f"harlex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="per-type corpus counts")
    _add_common(p, "corpus", "out_dir")

    p = sub.add_parser("kappa", help="pairwise annotator agreement per type")
    _add_common(p, "corpus", "out_dir")

    p = sub.add_parser("analyze", help="effect-size table and frequency lists")
    _add_common(p, "corpus", "lexicon", "out_dir")
    p.add_argument("--threshold", type=float, help="pruning threshold on |effect size|")
    p.add_argument("--prune", action="store_const", const=True, default=None,
                   help="drop features below the threshold in every column")
    p.add_argument("--std-mode", dest="std_mode",
                   help="effect size denominator: pooled | control | population")
    p.add_argument("--stoplist", help="stop-word list path")

    p = sub.add_parser("freq", help="top-k frequent words")
    _add_common(p, "corpus", "out_dir")
    p.add_argument("--k", type=int, help="how many words (default 25)")
    p.add_argument("--label", help="restrict to harassing | nonharassing")
    p.add_argument("--type", help="restrict to one harassment type")
    p.add_argument("--stoplist", help="stop-word list path")

    p = sub.add_parser("embed-train", help="train an embedding table")
    _add_common(p, "corpus", "out_dir", "embedding")
    p.add_argument("--sentences", help="plain text file, one sentence per line")
    p.add_argument("--mode", help="skipgram | cbow")
    p.add_argument("--level", help="word | subword")

    p = sub.add_parser("project2d", help="2-d projection of selected token vectors")
    _add_common(p, "out_dir")
    p.add_argument("--embeddings", help="embedding table path")
    p.add_argument("--tokens", help="comma-separated tokens")
    p.add_argument("--tokens-file", dest="tokens_file", help="file with one token per line")

    p = sub.add_parser("vectorize", help="export the feature matrix for a corpus")
    _add_common(p, "corpus", "lexicon", "out_dir", "spec", "embedding")
    p.add_argument("--binary", action="store_const", const=True, default=None,
                   help="write features.bin instead of features.csv")

    p = sub.add_parser("train", help="fit one model and save it")
    _add_common(p, "corpus", "lexicon", "out_dir", "spec", "seed", "embedding",
                "learner", "task")

    p = sub.add_parser("cv", help="repeated stratified cross-validation")
    _add_common(p, "corpus", "lexicon", "out_dir", "spec", "seed", "embedding",
                "learner", "task")
    p.add_argument("--k", type=int, help="folds (default 10)")
    p.add_argument("--repeats", type=int, help="repeats (default 5)")

    p = sub.add_parser("predict", help="apply a saved model to a corpus")
    _add_common(p, "corpus", "out_dir")
    p.add_argument("--model", help="model JSON path")

    p = sub.add_parser("transfer", help="evaluate a saved model on an external corpus")
    _add_common(p, "corpus", "out_dir", "seed")
    p.add_argument("--model", help="model JSON path")

    p = sub.add_parser("report", help="render a saved report CSV as markdown")
    _add_common(p, "out_dir")
    p.add_argument("--input", help="report CSV produced by cv/transfer")

    return parser


_COMMANDS = {
    "stats": cmd_stats,
    "kappa": cmd_kappa,
    "analyze": cmd_analyze,
    "freq": cmd_freq,
    "embed-train": cmd_embed_train,
    "project2d": cmd_project2d,
    "vectorize": cmd_vectorize,
    "train": cmd_train,
    "cv": cmd_cv,
    "predict": cmd_predict,
    "transfer": cmd_transfer,
    "report": cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        settings = Settings(config, args)
        return _COMMANDS[args.command](settings)
    except ConfigError as exc:
        print(f"error (config): {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"error (numeric): {exc}", file=sys.stderr)
        return 4
    except DataError as exc:
        print(f"error (data): {exc}", file=sys.stderr)
        return 3
    except FileNotFoundError as exc:
        print(f"error (data): {exc}", file=sys.stderr)
        return 3
    except HarlexError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
