"""Metrics, repeated cross-validation, transfer evaluation, reports.

Metric conventions: any 0/0 rate is reported as 0.0 and the report
carries a flag naming the degenerate quantity, so large fold sweeps never
crash on a fold with no predicted positives.  Cross-validation refits
TFIDF and column standardization inside every fold; only pre-trained
embedding tables and the lexicon are shared across folds.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .corpus import Corpus, FoldPlan, LengthMismatchError
from .errors import ConfigError, DataError
from .classify import (
    GbmConfig,
    TrainedModel,
    UnknownLabelError,
    predict,
    train_gbm,
    train_knn,
    train_nb,
    train_svm,
)
from .vectorize import (
    FeatureBuilder,
    FeatureResources,
    FeatureSpec,
    fit_tfidf,
)

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "ClassMetrics",
    "CvResult",
    "NotBinaryError",
    "confusion",
    "binary_metrics",
    "multiclass_metrics",
    "make_learner",
    "cross_validate",
    "transfer_evaluate",
    "emit_report",
]


class NotBinaryError(DataError):
    """binary_metrics needs a 2x2 confusion matrix."""


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = number of samples with true class i predicted as j."""

    counts: np.ndarray
    label_space: tuple

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def confusion(true_labels: Sequence, predicted_labels: Sequence,
              label_space: Sequence) -> ConfusionMatrix:
    """Tally a confusion matrix over a fixed, ordered label space."""
    if len(true_labels) != len(predicted_labels):
        raise LengthMismatchError(
            f"{len(true_labels)} true vs {len(predicted_labels)} predicted"
        )
    space = tuple(label_space)
    index = {c: i for i, c in enumerate(space)}
    counts = np.zeros((len(space), len(space)), dtype=np.int64)
    for t, p in zip(true_labels, predicted_labels):
        ti = index.get(t)
        pi = index.get(p)
        if ti is None:
            raise UnknownLabelError(f"true label {t!r} outside label space")
        if pi is None:
            raise UnknownLabelError(f"predicted label {p!r} outside label space")
        counts[ti, pi] += 1
    return ConfusionMatrix(counts=counts, label_space=space)


@dataclass(frozen=True)
class ClassMetrics:
    label: object
    precision: float
    recall: float
    f_score: float
    support: int


@dataclass(frozen=True)
class MetricsReport:
    """Evaluation summary; optional fields stay None where not applicable.

    flags lists every 0/0 quantity that was reported as 0.0.  The std
    fields are filled by cross-validation aggregation.
    """

    kind: str  # "binary" or "multiclass"
    per_class: tuple[ClassMetrics, ...]
    accuracy: float
    precision: Optional[float] = None
    recall: Optional[float] = None
    f_score: Optional[float] = None
    specificity: Optional[float] = None
    micro_precision: Optional[float] = None
    micro_recall: Optional[float] = None
    micro_f: Optional[float] = None
    macro_precision: Optional[float] = None
    macro_recall: Optional[float] = None
    macro_f: Optional[float] = None
    flags: tuple[str, ...] = ()
    std: dict = field(default_factory=dict)


def _rate(num: float, den: float, name: str, flags: list[str]) -> float:
    if den == 0:
        flags.append(f"{name}: 0/0 reported as 0.0")
        return 0.0
    return num / den


def binary_metrics(cm: ConfusionMatrix, positive=None) -> MetricsReport:
    """Precision/recall/F/accuracy/specificity for a 2x2 confusion matrix.

    positive defaults to the second entry of the label space (the larger
    label under the sorted convention used by the learners).
    """
    if cm.counts.shape != (2, 2):
        raise NotBinaryError(f"expected 2x2 matrix, got {cm.counts.shape}")
    space = cm.label_space
    if positive is None:
        positive = space[1]
    if positive not in space:
        raise UnknownLabelError(f"positive class {positive!r} not in label space")
    pos = space.index(positive)
    neg = 1 - pos
    tp = float(cm.counts[pos, pos])
    fn = float(cm.counts[pos, neg])
    fp = float(cm.counts[neg, pos])
    tn = float(cm.counts[neg, neg])
    flags: list[str] = []
    precision = _rate(tp, tp + fp, "precision", flags)
    recall = _rate(tp, tp + fn, "recall", flags)
    f_score = _rate(2 * precision * recall, precision + recall, "f_score", flags)
    specificity = _rate(tn, tn + fp, "specificity", flags)
    accuracy = _rate(tp + tn, tp + tn + fp + fn, "accuracy", flags)
    per_class = (
        ClassMetrics(label=positive, precision=precision, recall=recall,
                     f_score=f_score, support=int(tp + fn)),
    )
    return MetricsReport(
        kind="binary", per_class=per_class, accuracy=accuracy,
        precision=precision, recall=recall, f_score=f_score,
        specificity=specificity, flags=tuple(flags),
    )


def multiclass_metrics(cm: ConfusionMatrix) -> MetricsReport:
    """Per-class one-vs-rest metrics with micro and macro averages."""
    C = cm.counts.shape[0]
    if C < 2:
        raise DataError("need at least 2 classes")
    flags: list[str] = []
    per_class = []
    tps = np.diag(cm.counts).astype(np.float64)
    col = cm.counts.sum(axis=0).astype(np.float64)
    row = cm.counts.sum(axis=1).astype(np.float64)
    precisions, recalls, fs = [], [], []
    for i, label in enumerate(cm.label_space):
        p = _rate(tps[i], col[i], f"precision[{label}]", flags)
        r = _rate(tps[i], row[i], f"recall[{label}]", flags)
        f = _rate(2 * p * r, p + r, f"f_score[{label}]", flags)
        precisions.append(p)
        recalls.append(r)
        fs.append(f)
        per_class.append(ClassMetrics(label=label, precision=p, recall=r,
                                      f_score=f, support=int(row[i])))
    total = float(cm.counts.sum())
    tp_sum = float(tps.sum())
    fp_sum = float((col - tps).sum())
    fn_sum = float((row - tps).sum())
    micro_p = _rate(tp_sum, tp_sum + fp_sum, "micro_precision", flags)
    micro_r = _rate(tp_sum, tp_sum + fn_sum, "micro_recall", flags)
    micro_f = _rate(2 * micro_p * micro_r, micro_p + micro_r, "micro_f", flags)
    accuracy = _rate(tp_sum, total, "accuracy", flags)
    return MetricsReport(
        kind="multiclass", per_class=tuple(per_class), accuracy=accuracy,
        micro_precision=micro_p, micro_recall=micro_r, micro_f=micro_f,
        macro_precision=float(np.mean(precisions)),
        macro_recall=float(np.mean(recalls)),
        macro_f=float(np.mean(fs)),
        flags=tuple(flags),
    )


def make_learner(kind: str, **kwargs):
    """Factory returning train(features, labels) for a learner kind.

    Kinds: nb_multinomial, nb_gaussian, knn, linear_svm, gbm.  kwargs are
    forwarded to the matching train_* function.
    """
    if kind == "nb_multinomial":
        return lambda X, y: train_nb(X, y, variant="multinomial", **kwargs)
    if kind == "nb_gaussian":
        return lambda X, y: train_nb(X, y, variant="gaussian", **kwargs)
    if kind == "knn":
        return lambda X, y: train_knn(X, y, **kwargs)
    if kind == "linear_svm":
        return lambda X, y: train_svm(X, y, **kwargs)
    if kind == "gbm":
        cfg = GbmConfig(**kwargs) if kwargs else GbmConfig()
        return lambda X, y: train_gbm(X, y, config=cfg)
    raise ConfigError(f"unknown learner kind {kind!r}")


@dataclass(frozen=True)
class CvResult:
    """Aggregated cross-validation outcome plus all per-fold reports."""

    aggregated: MetricsReport
    per_fold: tuple[MetricsReport, ...]
    fold_cells: tuple[tuple[int, int], ...]  # (repeat, fold) per report
    pooled: Optional[MetricsReport] = None


def _subset_corpus(corpus: Corpus, idx: np.ndarray) -> Corpus:
    return Corpus(tweets=tuple(corpus[int(i)] for i in idx), source=corpus.source)


def _mean_std(values: list[Optional[float]]) -> tuple[Optional[float], Optional[float]]:
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    arr = np.array(present, dtype=np.float64)
    return float(arr.mean()), float(arr.std(ddof=0))


def _aggregate_mean(reports: list[MetricsReport]) -> MetricsReport:
    kind = reports[0].kind
    std: dict = {}
    fields_binary = ["precision", "recall", "f_score", "specificity", "accuracy"]
    fields_multi = ["micro_precision", "micro_recall", "micro_f",
                    "macro_precision", "macro_recall", "macro_f", "accuracy"]
    names = fields_binary if kind == "binary" else fields_multi
    agg_vals: dict = {}
    for name in names:
        mean, sd = _mean_std([getattr(r, name) for r in reports])
        agg_vals[name] = mean
        if sd is not None:
            std[name] = sd

    # per-class means over folds, aligned by label
    labels: list = []
    for r in reports:
        for c in r.per_class:
            if c.label not in labels:
                labels.append(c.label)
    per_class = []
    for label in labels:
        ps, rs, fs, supports = [], [], [], []
        for r in reports:
            for c in r.per_class:
                if c.label == label:
                    ps.append(c.precision)
                    rs.append(c.recall)
                    fs.append(c.f_score)
                    supports.append(c.support)
        per_class.append(ClassMetrics(
            label=label,
            precision=float(np.mean(ps)),
            recall=float(np.mean(rs)),
            f_score=float(np.mean(fs)),
            support=int(np.sum(supports)),
        ))
    flags = tuple(f for r in reports for f in r.flags)
    if kind == "binary":
        return MetricsReport(
            kind=kind, per_class=tuple(per_class), accuracy=agg_vals["accuracy"],
            precision=agg_vals["precision"], recall=agg_vals["recall"],
            f_score=agg_vals["f_score"], specificity=agg_vals["specificity"],
            flags=flags, std=std,
        )
    return MetricsReport(
        kind=kind, per_class=tuple(per_class), accuracy=agg_vals["accuracy"],
        micro_precision=agg_vals["micro_precision"],
        micro_recall=agg_vals["micro_recall"], micro_f=agg_vals["micro_f"],
        macro_precision=agg_vals["macro_precision"],
        macro_recall=agg_vals["macro_recall"], macro_f=agg_vals["macro_f"],
        flags=flags, std=std,
    )


def cross_validate(corpus: Corpus, spec: FeatureSpec, learner, folds: FoldPlan,
                   labels: Optional[Sequence] = None,
                   resources: Optional[FeatureResources] = None,
                   positive=None) -> CvResult:
    """Repeated stratified cross-validation with leak-free per-fold fitting.

    learner is a callable (features, labels) -> TrainedModel, e.g. from
    make_learner.  labels defaults to the corpus binary labels; pass the
    type codes (or any sequence) for multi-class runs.  Within each fold,
    TFIDF (block T) and column standardization are fitted on the training
    split only.  Aggregation is the unweighted mean of per-fold metrics
    (std recorded); a pooled-confusion report is attached as well.
    """
    if labels is None:
        labels = corpus.labels().tolist()
    labels = list(labels)
    if len(labels) != len(corpus):
        raise LengthMismatchError(f"{len(labels)} labels for {len(corpus)} tweets")
    if resources is None:
        resources = FeatureResources()
    try:
        space = tuple(sorted(set(labels)))
    except TypeError:
        space = tuple(sorted(set(labels), key=str))

    reports: list[MetricsReport] = []
    cells: list[tuple[int, int]] = []
    pooled_counts = np.zeros((len(space), len(space)), dtype=np.int64)
    for r, f, train_idx, test_idx in folds.iter_splits():
        train_corpus = _subset_corpus(corpus, train_idx)
        test_corpus = _subset_corpus(corpus, test_idx)
        fold_resources = resources
        if "T" in spec.blocks:
            fold_resources = replace(resources, tfidf=fit_tfidf(train_corpus))
        builder = FeatureBuilder(spec, fold_resources)
        X_train = builder.fit_transform(train_corpus)
        X_test = builder.transform(test_corpus)
        y_train = [labels[int(i)] for i in train_idx]
        y_test = [labels[int(i)] for i in test_idx]
        if len(set(y_train)) < 2:
            raise DataError(
                f"training split of repeat {r} fold {f} has a single class; "
                "use more data or fewer folds"
            )
        model = learner(X_train, y_train)
        result = predict(model, X_test)
        cm = confusion(y_test, list(result.labels), space)
        pooled_counts += cm.counts
        report = (binary_metrics(cm, positive=positive) if len(space) == 2
                  else multiclass_metrics(cm))
        reports.append(report)
        cells.append((r, f))
    aggregated = _aggregate_mean(reports)
    pooled_cm = ConfusionMatrix(counts=pooled_counts, label_space=space)
    pooled = (binary_metrics(pooled_cm, positive=positive) if len(space) == 2
              else multiclass_metrics(pooled_cm))
    return CvResult(aggregated=aggregated, per_fold=tuple(reports),
                    fold_cells=tuple(cells), pooled=pooled)


def transfer_evaluate(model: TrainedModel, builder: FeatureBuilder,
                      external: Corpus, labels: Optional[Sequence] = None,
                      positive=None) -> tuple[MetricsReport, list[tuple[object, float]]]:
    """Score a trained model on an external corpus without any refitting.

    The builder must be the fitted one the model was trained with.
    Returns the metrics report and a per-class proportion table: the
    fraction of external tweets assigned to each predicted class, in
    label-space order (sums to 1).
    """
    if labels is None:
        labels = external.labels().tolist()
    labels = list(labels)
    X = builder.transform(external)
    result = predict(model, X)
    for lab in labels:
        if lab not in model.label_space:
            raise UnknownLabelError(f"external label {lab!r} outside model label space")
    cm = confusion(labels, list(result.labels), model.label_space)
    report = (binary_metrics(cm, positive=positive) if len(model.label_space) == 2
              else multiclass_metrics(cm))
    n = len(external)
    proportions = [
        (label, float(np.sum(result.labels == label)) / n if n else 0.0)
        for label in model.label_space
    ]
    return report, proportions


_COLUMNS = ("Precision", "Recall", "F-Score", "Accuracy", "Specificity")


def _binary_row(report: MetricsReport) -> list:
    return [report.precision, report.recall, report.f_score,
            report.accuracy, report.specificity]


def emit_report(report: MetricsReport, fmt: str = "csv", name: str = "",
                label_names=None) -> str:
    """Render a metrics report as CSV (full precision) or markdown (2 decimals).

    Column order is fixed: Precision, Recall, F-Score, Accuracy,
    Specificity.  Values that do not apply (e.g. specificity for
    multi-class rows) are left blank.  label_names maps class labels to
    display strings.
    """
    if fmt not in ("csv", "markdown"):
        raise ConfigError(f"unknown report format {fmt!r}")
    label_names = label_names or str

    rows: list[tuple[str, list]] = []
    if report.kind == "binary":
        rows.append((name or "binary", _binary_row(report)))
    else:
        for c in report.per_class:
            rows.append((label_names(c.label), [c.precision, c.recall, c.f_score, None, None]))
        rows.append(("micro", [report.micro_precision, report.micro_recall,
                               report.micro_f, report.accuracy, None]))
        rows.append(("macro", [report.macro_precision, report.macro_recall,
                               report.macro_f, None, None]))

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["Name"] + list(_COLUMNS))
        for rname, vals in rows:
            writer.writerow([rname] + ["" if v is None else repr(float(v)) for v in vals])
        return buf.getvalue()

    lines = ["| Name | " + " | ".join(_COLUMNS) + " |",
             "|" + "---|" * (len(_COLUMNS) + 1)]
    for rname, vals in rows:
        cells = ["" if v is None else f"{v:.2f}" for v in vals]
        lines.append("| " + rname + " | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"
