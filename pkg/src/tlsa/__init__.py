"""Training-free label-space alignment for universal domain adaptation over
precomputed embeddings: discover target labels from captions, filter them
against the source vocabulary, classify with a universal zero-shot head, and
optionally self-train a residual adapter."""

from .align import (
    FrequencyBank,
    PredictionSet,
    SimilarityMatrix,
    Verdict,
    build_prediction_set,
    classify_sample,
    run_alignment,
    score,
)
from .classifier import UniversalClassifier, build, predict, predict_batch
from .corpus import (
    DiscoveredLabelRecord,
    EmbeddingTable,
    LabelSet,
    SplitConfig,
    collect_discovered,
    load_captions,
    load_embeddings,
    majority_vote,
    normalize_label,
    normalize_rows,
    write_embeddings,
)
from .errors import TlsaError
from .lexicon import SynonymDb, are_synonyms, parse_synonym_db, synonym_align
from .metrics import EvalResult, evaluate, h3_score, h_score, nmi
from .refine import RefineConfig, frequency_filter
from .selftrain import AdapterParams, TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "AdapterParams",
    "DiscoveredLabelRecord",
    "EmbeddingTable",
    "EvalResult",
    "FrequencyBank",
    "LabelSet",
    "PredictionSet",
    "RefineConfig",
    "SimilarityMatrix",
    "SplitConfig",
    "SynonymDb",
    "TlsaError",
    "TrainConfig",
    "TrainResult",
    "UniversalClassifier",
    "Verdict",
    "are_synonyms",
    "build",
    "build_prediction_set",
    "classify_sample",
    "collect_discovered",
    "evaluate",
    "frequency_filter",
    "h3_score",
    "h_score",
    "load_captions",
    "load_embeddings",
    "majority_vote",
    "nmi",
    "normalize_label",
    "normalize_rows",
    "parse_synonym_db",
    "predict",
    "predict_batch",
    "run_alignment",
    "score",
    "synonym_align",
    "train",
    "write_embeddings",
]
