"""Few-shot text anomaly detection over precomputed token embeddings.

An attention head turns each document's token-embedding matrix into a bag
of anomaly-score instances; the document score is the mean of the top-K
instances. Training standardizes scores against draws from a Gaussian prior
and applies a contrastive deviation loss: inliers toward zero, the few
labeled outliers above a margin, plus an orthogonality penalty that keeps
the attention heads distinct.
"""

from .archive import Archive, read_archive, write_archive
from .checkpoint import AdamState, Checkpoint, load_checkpoint, save_checkpoint
from .config import RunConfig, load_config, save_config
from .datasets import (
    DatasetManifest,
    TrainingSet,
    build_split,
    generate_synthetic,
    load_labeled_examples,
    load_manifest,
    load_training_set,
    write_synthetic_archives,
)
from .losses import (
    LossConfig,
    PriorSpec,
    ReferenceStats,
    ablation_loss,
    deviation_loss,
    sample_reference,
    total_loss,
    z_deviation,
)
from .metrics import ScoredSet, auprc, auroc, metric_report, score_dataset
from .model import (
    AttentionParams,
    DocumentScore,
    EmbeddingSequence,
    LabeledExample,
    attention_forward,
    document_score,
    orthogonality_loss,
    score_matrix,
    topk_score,
)
from .sweep import SweepData, SweepReport, SweepSpec, run_sweep
from .trainer import (
    GradientBundle,
    adam_step,
    balanced_batch,
    init_params,
    loss_and_gradients,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "Archive",
    "AttentionParams",
    "Checkpoint",
    "DatasetManifest",
    "DocumentScore",
    "EmbeddingSequence",
    "GradientBundle",
    "LabeledExample",
    "LossConfig",
    "PriorSpec",
    "ReferenceStats",
    "RunConfig",
    "ScoredSet",
    "SweepData",
    "SweepReport",
    "SweepSpec",
    "TrainingSet",
    "ablation_loss",
    "adam_step",
    "attention_forward",
    "auprc",
    "auroc",
    "balanced_batch",
    "build_split",
    "deviation_loss",
    "document_score",
    "generate_synthetic",
    "init_params",
    "load_checkpoint",
    "load_config",
    "load_labeled_examples",
    "load_manifest",
    "load_training_set",
    "loss_and_gradients",
    "metric_report",
    "orthogonality_loss",
    "read_archive",
    "run_sweep",
    "sample_reference",
    "save_checkpoint",
    "save_config",
    "score_dataset",
    "score_matrix",
    "topk_score",
    "total_loss",
    "train",
    "write_archive",
    "write_synthetic_archives",
    "z_deviation",
]
