"""Named method pipelines (extractor -> subspace -> metric) and experiments."""

from __future__ import annotations

import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import ExperimentConfig, FeatureParams, SubspaceParams
from .dataset import DatasetManifest, Protocol, SampleRecord, load_manifest, make_protocol, synth_dataset
from .evaluation import EvalReport, cmc, report, summary_lines, write_cmc_csv, write_report_json
from .features import FeatureVector, hog_descriptor, intensity_vector, lpq_histogram, ulbp_histogram
from .fusion import min_max_normalize, weighted_fuse
from .matching import (
    ScoreMatrix,
    format_labels_csv,
    format_score_csv,
    labels_sidecar_path,
    score_matrix,
)
from .subspace import LabeledTrainingSet, fit_dcva, fit_lda, fit_pca, project_rows

EXTRACTORS = ("intensity", "ulbp_8_2", "ulbp_16_2", "lpq", "hog")
SUBSPACES = ("none", "pca", "lda", "dcva")
_HISTOGRAM_EXTRACTORS = ("ulbp_8_2", "ulbp_16_2", "lpq")


@dataclass(frozen=True)
class MethodSpec:
    """One identification pipeline: extractor, optional subspace, metric."""

    name: str
    extractor: str
    subspace: str
    metric: str

    def __post_init__(self) -> None:
        if self.extractor not in EXTRACTORS:
            raise ValueError(f"unknown extractor {self.extractor!r}")
        if self.subspace not in SUBSPACES:
            raise ValueError(f"unknown subspace {self.subspace!r}")
        if self.metric not in ("euclidean", "chi_square"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.metric == "chi_square" and (
            self.subspace != "none" or self.extractor not in _HISTOGRAM_EXTRACTORS
        ):
            raise ValueError("chi_square applies only to raw histogram features")
        if self.subspace == "none" and self.extractor not in _HISTOGRAM_EXTRACTORS:
            raise ValueError(f"extractor {self.extractor!r} requires a subspace")


def builtin_methods() -> List[MethodSpec]:
    """The 14 standard pipelines, in the canonical row order."""
    rows = [
        ("pca", "intensity", "pca", "euclidean"),
        ("lda", "intensity", "lda", "euclidean"),
        ("dcva", "intensity", "dcva", "euclidean"),
        ("ulbp_8_2", "ulbp_8_2", "none", "chi_square"),
        ("ulbp_16_2", "ulbp_16_2", "none", "chi_square"),
        ("lpq", "lpq", "none", "chi_square"),
        ("hog+lda", "hog", "lda", "euclidean"),
        ("hog+dcva", "hog", "dcva", "euclidean"),
        ("ulbp_8_2+lda", "ulbp_8_2", "lda", "euclidean"),
        ("ulbp_16_2+lda", "ulbp_16_2", "lda", "euclidean"),
        ("ulbp_8_2+dcva", "ulbp_8_2", "dcva", "euclidean"),
        ("ulbp_16_2+dcva", "ulbp_16_2", "dcva", "euclidean"),
        ("lpq+lda", "lpq", "lda", "euclidean"),
        ("lpq+dcva", "lpq", "dcva", "euclidean"),
    ]
    return [MethodSpec(*row) for row in rows]


def builtin_method_names() -> List[str]:
    return [spec.name for spec in builtin_methods()]


def method_by_name(name: str) -> MethodSpec:
    for spec in builtin_methods():
        if spec.name == name:
            return spec
    raise ValueError(f"unknown method {name!r}")


def extract_feature(img, extractor: str, params: FeatureParams) -> FeatureVector:
    if extractor == "intensity":
        return intensity_vector(img)
    if extractor == "ulbp_8_2":
        return ulbp_histogram(img, P=8, R=params.ulbp_radius, grid=params.ulbp_grid)
    if extractor == "ulbp_16_2":
        return ulbp_histogram(img, P=16, R=params.ulbp_radius, grid=params.ulbp_grid)
    if extractor == "lpq":
        return lpq_histogram(img, win=params.lpq_window, grid=params.lpq_grid)
    if extractor == "hog":
        return hog_descriptor(img, cell=params.hog_cell, block_cells=params.hog_block_cells,
                              bins=params.hog_bins)
    raise ValueError(f"unknown extractor {extractor!r}")


class FeatureCache:
    """Extracted features per (role, extractor), shared across pipelines.

    Populate sequentially via ensure(); lookups afterwards are read-only and
    safe under concurrent method execution.
    """

    def __init__(self, protocol: Protocol, params: FeatureParams):
        self.protocol = protocol
        self.params = params
        self._store: Dict[Tuple[str, str], List[FeatureVector]] = {}

    def _records(self, role: str) -> Sequence[SampleRecord]:
        return getattr(self.protocol, role)

    def ensure(self, role: str, extractor: str) -> List[FeatureVector]:
        key = (role, extractor)
        if key not in self._store:
            target = (self.params.image_width, self.params.image_height)
            self._store[key] = [
                extract_feature(rec.load(target=target), extractor, self.params)
                for rec in self._records(role)
            ]
        return self._store[key]


def _fit_subspace(kind: str, train: LabeledTrainingSet, params: SubspaceParams):
    if kind == "pca":
        return fit_pca(train, k=params.pca_k)
    if kind == "lda":
        return fit_lda(train, k=params.lda_k)
    if kind == "dcva":
        return fit_dcva(train)
    raise ValueError(f"unknown subspace {kind!r}")


def run_method(
    spec: MethodSpec,
    protocol: Protocol,
    feature_params: FeatureParams = FeatureParams(),
    subspace_params: SubspaceParams = SubspaceParams(),
    cache: Optional[FeatureCache] = None,
) -> ScoreMatrix:
    """Execute one pipeline over a protocol and return its score matrix.

    Subspace models are fit on the training features only; gallery and probe
    features are projected through the fitted model.
    """
    if cache is None or cache.protocol is not protocol or cache.params != feature_params:
        cache = FeatureCache(protocol, feature_params)
    gallery_feats = cache.ensure("gallery", spec.extractor)
    probe_feats = cache.ensure("probes", spec.extractor)

    if spec.subspace != "none":
        if not protocol.training:
            raise ValueError(f"method {spec.name!r}: training required for subspace fitting")
        train_feats = cache.ensure("training", spec.extractor)
        train = LabeledTrainingSet(
            vectors=np.stack([f.values for f in train_feats]),
            labels=tuple(rec.subject_id for rec in protocol.training),
        )
        model = _fit_subspace(spec.subspace, train, subspace_params)
        tag = f"{gallery_feats[0].method}+{model.kind}"
        gallery_feats = [
            FeatureVector(method=tag, values=row)
            for row in project_rows(model, np.stack([f.values for f in gallery_feats]))
        ]
        probe_feats = [
            FeatureVector(method=tag, values=row)
            for row in project_rows(model, np.stack([f.values for f in probe_feats]))
        ]

    gallery = [(rec.key, rec.subject_id, f) for rec, f in zip(protocol.gallery, gallery_feats)]
    probes = [(rec.key, rec.subject_id, f) for rec, f in zip(protocol.probes, probe_feats)]
    return score_matrix(gallery, probes, metric=spec.metric, method=spec.name)


# ---------------------------------------------------------------------------
# whole experiments


def _atomic_write(path: Path, write_fn: Callable[[Path], None]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    os.close(fd)
    tmp = Path(tmp)
    try:
        write_fn(tmp)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _safe_name(method: str) -> str:
    return method.replace("/", "_")


def resolve_manifest(config: ExperimentConfig) -> DatasetManifest:
    """Load the configured manifest, synthesizing the dataset if requested."""
    if config.manifest_path is not None:
        return load_manifest(config.manifest_path)
    sy = config.synth
    return synth_dataset(
        sy.out_dir,
        n_subjects=sy.subjects,
        n_samples=sy.samples,
        width=sy.width,
        height=sy.height,
        noise_sigma=sy.noise_sigma,
        shift_max=sy.shift_max,
        seed=config.synth_seed(),
    )


def _config_record(config: ExperimentConfig, protocol: Protocol) -> Dict:
    rec = {
        "protocol": {
            "ear_side": config.protocol.ear_side,
            "train_subjects": config.protocol.train_subjects,
            "train_samples": config.protocol.train_samples,
            "probe_samples": config.protocol.probe_samples,
            "seed": config.protocol.seed,
            "n_training": len(protocol.training),
            "n_gallery": len(protocol.gallery),
            "n_probes": len(protocol.probes),
            "training_subjects": sorted({r.subject_id for r in protocol.training}),
        },
        "features": {
            "image_width": config.features.image_width,
            "image_height": config.features.image_height,
            "ulbp_radius": config.features.ulbp_radius,
            "ulbp_grid": [config.features.ulbp_grid.blocks_x, config.features.ulbp_grid.blocks_y],
            "lpq_window": config.features.lpq_window,
            "lpq_grid": [config.features.lpq_grid.blocks_x, config.features.lpq_grid.blocks_y],
            "hog_cell": config.features.hog_cell,
            "hog_block_cells": config.features.hog_block_cells,
            "hog_bins": config.features.hog_bins,
        },
        "subspace": {"pca_k": config.subspace.pca_k, "lda_k": config.subspace.lda_k},
        "normalization": config.normalization,
    }
    if config.manifest_path is not None:
        rec["dataset"] = {"manifest": str(config.manifest_path)}
    else:
        sy = config.synth
        rec["dataset"] = {
            "synth": {
                "dir": str(sy.out_dir),
                "subjects": sy.subjects,
                "samples": sy.samples,
                "width": sy.width,
                "height": sy.height,
                "noise_sigma": sy.noise_sigma,
                "shift_max": sy.shift_max,
                "seed": config.synth_seed(),
            }
        }
    return rec


def run_experiment(config: ExperimentConfig, threads: int = 1) -> List[EvalReport]:
    """Run every configured method, then every fusion, and write all outputs.

    Output layout under config.output_dir: scores/<method>.csv (plus label
    sidecars), reports/<method>.json, reports/<method>_cmc.csv and
    reports/summary.csv. Returns the reports in method-then-fusion order.
    """
    manifest = resolve_manifest(config)
    protocol = make_protocol(
        manifest,
        ear_side=config.protocol.ear_side,
        n_train_subjects=config.protocol.train_subjects,
        n_train_samples=config.protocol.train_samples,
        n_probe_samples=config.protocol.probe_samples,
        seed=config.protocol.seed,
    )
    specs = [method_by_name(name) for name in config.methods]
    base_record = _config_record(config, protocol)

    cache = FeatureCache(protocol, config.features)
    for extractor in dict.fromkeys(spec.extractor for spec in specs):
        cache.ensure("gallery", extractor)
        cache.ensure("probes", extractor)
    for extractor in dict.fromkeys(s.extractor for s in specs if s.subspace != "none"):
        if protocol.training:
            cache.ensure("training", extractor)

    def execute(spec: MethodSpec) -> ScoreMatrix:
        return run_method(spec, protocol, config.features, config.subspace, cache=cache)

    if threads == 1 or len(specs) <= 1:
        matrices = [execute(spec) for spec in specs]
    else:
        workers = threads if threads > 0 else min(len(specs), os.cpu_count() or 1)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            matrices = list(pool.map(execute, specs))

    scores_dir = config.output_dir / "scores"
    reports_dir = config.output_dir / "reports"
    reports: List[EvalReport] = []
    by_name: Dict[str, ScoreMatrix] = {}

    def emit(matrix: ScoreMatrix, record: Dict) -> None:
        name = _safe_name(matrix.method)
        scores_path = scores_dir / f"{name}.csv"
        _atomic_write(scores_path, lambda p: p.write_text(format_score_csv(matrix), encoding="utf-8"))
        _atomic_write(labels_sidecar_path(scores_path),
                      lambda p: p.write_text(format_labels_csv(matrix), encoding="utf-8"))
        rep = report(matrix, record)
        _atomic_write(reports_dir / f"{name}.json", lambda p: write_report_json(rep, p))
        _atomic_write(reports_dir / f"{name}_cmc.csv", lambda p: write_cmc_csv(cmc(matrix), p))
        reports.append(rep)

    for spec, matrix in zip(specs, matrices):
        by_name[spec.name] = matrix
        record = dict(base_record)
        record["method"] = {
            "name": spec.name,
            "extractor": spec.extractor,
            "subspace": spec.subspace,
            "metric": spec.metric,
        }
        emit(matrix, record)

    for fusion in config.fusions:
        missing = [m for m in fusion.methods if m not in by_name]
        if missing:
            raise ValueError(
                f"fusion {fusion.name!r} references method(s) not run: {', '.join(missing)}"
            )
        parts = [
            (min_max_normalize(by_name[m], scope=config.normalization), w)
            for m, w in fusion.components
        ]
        fused = weighted_fuse(parts)
        if fusion.name != fused.method:
            fused = fused.with_scores(fused.scores, method=fusion.name)
        record = dict(base_record)
        record["fusion"] = {
            "name": fusion.name,
            "components": [{"method": m, "weight": w} for m, w in fusion.components],
        }
        emit(fused, record)

    _atomic_write(
        reports_dir / "summary.csv",
        lambda p: p.write_text("\n".join(summary_lines(reports)) + "\n", encoding="utf-8"),
    )
    return reports
