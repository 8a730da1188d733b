"""patchpred: predict program-repair patch correctness from static features."""

from .corpus import Corpus, Label, PatchRecord, ingest, persist, split_by_bug
from .crossing import CrossedVector, cross, crossed_dim, feature_names as crossed_feature_names
from .diffparse import (FragmentPair, HunkSet, extract_fragments, fragments_for_diff,
                        parse_diff, tokenize)
from .embed import (EmbedderConfig, EmbeddingPair, ParagraphVectorModel, cosine,
                    euclidean_similarity, import_embeddings, infer_vector, train_embedder)
from .engineered import EngineeredVector, extract_all, extract_code_description, extract_patterns
from .evaluate import auc, confusion_metrics, crossval
from .explain import GlobalImportance, ShapExplanation, global_importance, linear_shap, tree_shap
from .filtering import SimilarityStats, ThresholdPolicy, filter_by_threshold, stats, top1_per_bug
from .learn import FeatureRow, TrainedModel, load as load_model, train
from .synth import generate_corpus

__version__ = "0.1.0"

__all__ = [
    "Corpus", "Label", "PatchRecord", "ingest", "persist", "split_by_bug",
    "CrossedVector", "cross", "crossed_dim", "crossed_feature_names",
    "FragmentPair", "HunkSet", "extract_fragments", "fragments_for_diff", "parse_diff", "tokenize",
    "EmbedderConfig", "EmbeddingPair", "ParagraphVectorModel", "cosine",
    "euclidean_similarity", "import_embeddings", "infer_vector", "train_embedder",
    "EngineeredVector", "extract_all", "extract_code_description", "extract_patterns",
    "auc", "confusion_metrics", "crossval",
    "GlobalImportance", "ShapExplanation", "global_importance", "linear_shap", "tree_shap",
    "SimilarityStats", "ThresholdPolicy", "filter_by_threshold", "stats", "top1_per_bug",
    "FeatureRow", "TrainedModel", "load_model", "train",
    "generate_corpus",
    "__version__",
]
