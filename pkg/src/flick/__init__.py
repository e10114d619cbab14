"""Few-label classification over frozen embeddings: pseudo-label
clustering, top-k cluster refinement, intermediate training and
weight-transfer fine-tuning."""

from .classifier import (
    ClassifierModel,
    TrainConfig,
    TrainHistory,
    cross_entropy,
    forward,
    init_classifier,
    predict,
    train,
    transfer_init,
)
from .clustering import ClusterModel, PseudoLabeledSet, assign, kmeans_fit, pseudo_label
from .errors import (
    ArgumentError,
    DataError,
    FlickError,
    FormatError,
    NumericError,
    SelectionError,
    StageError,
)
from .evaluation import EvaluationReport, compute_metrics, confusion_matrix, evaluate
from .ingestion import (
    EmbeddingSet,
    FewLabelSample,
    LabelTable,
    load_embeddings,
    load_labels,
    subsample_few_labels,
    write_embeddings,
    write_labels,
)
from .pipeline import (
    PipelineConfig,
    PipelineResult,
    SeedBundle,
    make_config,
    run_baseline,
    run_flick,
    run_no_refinement,
)
from .refinement import (
    ClusterReport,
    RefinedSet,
    SplitPair,
    TopKSelection,
    build_refined,
    probe_and_report,
    select_top_k,
    stratified_split,
)

__version__ = "0.1.0"
