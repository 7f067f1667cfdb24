"""Type-aware harassment language analysis toolkit.

Corpus handling, tokenization, category-lexicon effect sizes, trained
word and subword embeddings, feature assembly, classifiers, and
evaluation, plus a CLI that chains them into reproducible runs.
"""

from .corpus import (
    AnnotationVote,
    BinaryLabel,
    Corpus,
    FoldPlan,
    HarassmentType,
    LabeledTweet,
    balanced_undersample,
    cohen_kappa,
    consensus_label,
    corpus_digest,
    filter_corpus,
    load_corpus,
    make_folds,
    save_corpus,
)
from .classify import (
    GbmConfig,
    PredictionResult,
    TrainedModel,
    load_model,
    predict,
    save_model,
    train_gbm,
    train_knn,
    train_nb,
    train_svm,
)
from .embeddings import (
    EmbeddingConfig,
    EmbeddingTable,
    Vocabulary,
    build_vocab,
    compose_tweet,
    fnv1a_64,
    load_table,
    project_2d,
    save_table,
    word_vector,
)
from .embeddings import train as train_embeddings
from .errors import ConfigError, DataError, HarlexError, NumericError
from .evaluate import (
    ClassMetrics,
    ConfusionMatrix,
    CvResult,
    MetricsReport,
    binary_metrics,
    confusion,
    cross_validate,
    emit_report,
    make_learner,
    multiclass_metrics,
    transfer_evaluate,
)
from .lexicon import (
    Category,
    CategoryLexicon,
    EffectSizeTable,
    effect_size,
    effect_size_table,
    frequent_words,
    liwc_vector,
    load_lexicon,
)
from .text import Token, TokenKind, TokenStream, character_ngrams, tokenize
from .vectorize import (
    FeatureBuilder,
    FeatureMatrix,
    FeatureResources,
    FeatureSpec,
    TfidfModel,
    build_features,
    builder_from_state,
    fit_tfidf,
    parse_feature_spec,
    transform_tfidf,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotationVote", "BinaryLabel", "Corpus", "FoldPlan", "HarassmentType",
    "LabeledTweet", "balanced_undersample", "cohen_kappa", "consensus_label",
    "corpus_digest", "filter_corpus", "load_corpus", "make_folds", "save_corpus",
    "GbmConfig", "PredictionResult", "TrainedModel", "load_model", "predict",
    "save_model", "train_gbm", "train_knn", "train_nb", "train_svm",
    "EmbeddingConfig", "EmbeddingTable", "Vocabulary", "build_vocab",
    "compose_tweet", "fnv1a_64", "load_table", "project_2d",
    "save_table", "train_embeddings", "word_vector",
    "ConfigError", "DataError", "HarlexError", "NumericError",
    "ClassMetrics", "ConfusionMatrix", "CvResult", "MetricsReport",
    "binary_metrics", "confusion", "cross_validate", "emit_report",
    "make_learner", "multiclass_metrics", "transfer_evaluate",
    "Category", "CategoryLexicon", "EffectSizeTable", "effect_size",
    "effect_size_table", "frequent_words", "liwc_vector", "load_lexicon",
    "Token", "TokenKind", "TokenStream", "character_ngrams", "tokenize",
    "FeatureBuilder", "FeatureMatrix", "FeatureResources", "FeatureSpec",
    "TfidfModel", "build_features", "builder_from_state", "fit_tfidf",
    "parse_feature_spec", "transform_tfidf",
    "__version__",
]
