"""Ear identification toolkit: texture and subspace pipelines over
gallery/probe protocols, with score-level fusion and CMC/EER evaluation."""

from .image import GrayImage, load_image, resize_bilinear, write_pgm
from .dataset import (
    DatasetManifest,
    Protocol,
    SampleRecord,
    load_manifest,
    make_protocol,
    synth_dataset,
)
from .features import (
    FeatureVector,
    GridSpec,
    hog_descriptor,
    intensity_vector,
    lpq_histogram,
    ulbp_histogram,
)
from .subspace import (
    LabeledTrainingSet,
    SubspaceModel,
    fit_dcva,
    fit_lda,
    fit_pca,
    load_model,
    project,
    project_rows,
    save_model,
)
from .matching import ScoreMatrix, chi_square, euclidean, read_score_matrix, score_matrix, write_score_matrix
from .fusion import FusionSpec, min_max_normalize, weighted_fuse
from .evaluation import CmcCurve, EvalReport, cmc, eer, perfect_rank, report, split_scores
from .pipeline import MethodSpec, builtin_methods, run_experiment, run_method
from .config import ExperimentConfig, FeatureParams, SubspaceParams, load_config

__version__ = "0.1.0"

__all__ = [
    "GrayImage", "load_image", "resize_bilinear", "write_pgm",
    "DatasetManifest", "Protocol", "SampleRecord",
    "load_manifest", "make_protocol", "synth_dataset",
    "FeatureVector", "GridSpec",
    "intensity_vector", "ulbp_histogram", "lpq_histogram", "hog_descriptor",
    "LabeledTrainingSet", "SubspaceModel",
    "fit_pca", "fit_lda", "fit_dcva", "project", "project_rows",
    "save_model", "load_model",
    "ScoreMatrix", "euclidean", "chi_square", "score_matrix",
    "read_score_matrix", "write_score_matrix",
    "FusionSpec", "min_max_normalize", "weighted_fuse",
    "CmcCurve", "EvalReport", "cmc", "perfect_rank", "split_scores", "eer", "report",
    "MethodSpec", "builtin_methods", "run_method", "run_experiment",
    "ExperimentConfig", "FeatureParams", "SubspaceParams", "load_config",
    "__version__",
]
