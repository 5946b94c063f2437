"""Differentiable topology divergence for point clouds and embeddings.

The package compares two representations of the same items by the persistent
homology of a doubled Vietoris-Rips complex, exposes subgradients of that
divergence with respect to point coordinates, and uses it as a regulariser
when adapting a frozen classifier to a few-shot task.
"""
from .divergence import (
    CrossMatrix,
    DivergenceError,
    RtdReport,
    build_rtd_matrix,
    cross_barcode,
    mtop_div,
    r_cross_barcode,
    rtd_score,
)
from .fewshot import (
    BaseClassifier,
    EmbeddingDataset,
    EpochStats,
    LambdaSearchResult,
    LossResult,
    TaskResidualModel,
    TrainConfig,
    class_balanced_batches,
    combined_loss,
    evaluate,
    forward_logits,
    gen_synthetic,
    lambda_search,
    train,
)
from .geometry import (
    BLOCKED,
    DistanceMatrix,
    FilteredComplex,
    PointCloud,
    Simplex,
    build_vr_filtration,
    complex_at_threshold,
    pairwise_distances,
)
from .gradient import RtdGradient, descend_rtd, rtd_subgradient
from .io import (
    RunManifest,
    load_base_classifier,
    load_embeddings,
    load_manifest,
    load_point_cloud,
    save_manifest,
    write_barcode_csv,
    write_base_classifier,
    write_embeddings,
    write_point_cloud,
)
from .persistence import (
    Barcode,
    PersistencePair,
    betti_at,
    compute_persistence,
    zero_dim_persistence,
)

__version__ = "0.1.0"

__all__ = [
    "BLOCKED",
    "Barcode",
    "BaseClassifier",
    "CrossMatrix",
    "DistanceMatrix",
    "DivergenceError",
    "EmbeddingDataset",
    "EpochStats",
    "FilteredComplex",
    "LambdaSearchResult",
    "LossResult",
    "PersistencePair",
    "PointCloud",
    "RtdGradient",
    "RtdReport",
    "RunManifest",
    "Simplex",
    "TaskResidualModel",
    "TrainConfig",
    "betti_at",
    "build_rtd_matrix",
    "build_vr_filtration",
    "class_balanced_batches",
    "combined_loss",
    "complex_at_threshold",
    "compute_persistence",
    "cross_barcode",
    "descend_rtd",
    "evaluate",
    "forward_logits",
    "gen_synthetic",
    "lambda_search",
    "load_base_classifier",
    "load_embeddings",
    "load_manifest",
    "load_point_cloud",
    "mtop_div",
    "pairwise_distances",
    "r_cross_barcode",
    "rtd_score",
    "rtd_subgradient",
    "save_manifest",
    "train",
    "write_barcode_csv",
    "write_base_classifier",
    "write_embeddings",
    "write_point_cloud",
    "zero_dim_persistence",
]
